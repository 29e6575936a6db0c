#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "scate/noise_model.hpp"
#include "scate/values.hpp"

namespace scate {

/// One tag per factor family of the SCATE posterior.
enum class FactorTag : std::uint8_t {
  Start,
  Goal,
  StateMeasurement,
  BearingRange,
  Dynamics,
  ControlLimit,
  Obstacle,
  Condensed,  ///< linear summary of executed steps, solver internal
};

inline constexpr FactorTag kAllFactorTags[] = {
    FactorTag::Start,        FactorTag::Goal,     FactorTag::StateMeasurement,
    FactorTag::BearingRange, FactorTag::Dynamics, FactorTag::ControlLimit,
    FactorTag::Obstacle,     FactorTag::Condensed,
};

std::string_view to_string(FactorTag tag);

/// A Gaussian factor: residual r(values) over an ordered key list, weighted by
/// a noise model. Contributes 0.5 * ||W r||^2 to the total error.
class Factor {
 public:
  Factor(std::vector<Key> keys, NoiseModel noise, FactorTag tag)
      : keys_(std::move(keys)), noise_(std::move(noise)), tag_(tag) {}
  virtual ~Factor() = default;

  const std::vector<Key>& keys() const { return keys_; }
  const NoiseModel& noise() const { return noise_; }
  FactorTag tag() const { return tag_; }
  int dim() const { return noise_.dim(); }

  /// Unwhitened residual. When `jacobians` is non-null it receives one
  /// dim() x dim(key) matrix per key, in key order.
  virtual Eigen::VectorXd evaluate(const Values& values,
                                   std::vector<Eigen::MatrixXd>* jacobians = nullptr) const = 0;

  double error(const Values& values) const {
    return 0.5 * noise_.squared_mahalanobis(evaluate(values));
  }

 private:
  std::vector<Key> keys_;
  NoiseModel noise_;
  FactorTag tag_;
};

using FactorPtr = std::shared_ptr<const Factor>;

struct FactorId {
  std::uint64_t value = 0;
  friend auto operator<=>(const FactorId&, const FactorId&) = default;
};

struct AddFactor {
  FactorPtr factor;
};
struct RemoveFactor {
  FactorId id;
};
struct ReplaceFactor {
  FactorId id;
  FactorPtr factor;
};
using FactorEdit = std::variant<AddFactor, RemoveFactor, ReplaceFactor>;

class UnknownFactorError : public std::out_of_range {
 public:
  explicit UnknownFactorError(FactorId id)
      : std::out_of_range("unknown factor id " + std::to_string(id.value)), id_(id) {}
  FactorId id() const { return id_; }

 private:
  FactorId id_;
};

/// Bipartite graph of variables and factors. Factor ids are never reused, so
/// a factor created many steps ago can still be removed by id. Removing a
/// factor never removes variables.
class FactorGraph {
 public:
  FactorId add(FactorPtr factor);
  void remove(FactorId id);
  void replace(FactorId id, FactorPtr factor);

  /// Applies the edits in order, all or nothing. Returns the ids assigned to
  /// the Add edits. Throws UnknownFactorError and leaves the graph unchanged
  /// when a Remove/Replace names a missing id.
  std::vector<FactorId> apply(std::span<const FactorEdit> edits);

  bool contains(FactorId id) const { return factors_.count(id) != 0; }
  const Factor& at(FactorId id) const;
  FactorPtr get(FactorId id) const;
  std::size_t size() const { return factors_.size(); }
  bool empty() const { return factors_.empty(); }

  const std::map<FactorId, FactorPtr>& factors() const { return factors_; }
  const std::set<Key>& variables() const { return variables_; }

  std::size_t count(FactorTag tag) const;
  /// Number of factors currently referencing `key`.
  std::size_t degree(const Key& key) const;

 private:
  std::map<FactorId, FactorPtr> factors_;
  std::set<Key> variables_;
  std::uint64_t next_id_ = 0;
};

/// Functional form of FactorGraph::apply.
FactorGraph edit_factors(FactorGraph graph, std::span<const FactorEdit> edits);

/// 0.5 * sum over factors of ||W r||^2. Throws MissingKeyError when `values`
/// lacks a graph variable.
double total_error(const FactorGraph& graph, const Values& values);

}  // namespace scate
