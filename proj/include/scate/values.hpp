#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scate {

enum class VarKind : std::uint8_t { State, Control, Obstacle };

/// Variable identifier: (kind, timestep). Keys sort by timestep first so the
/// natural order interleaves x_i, u_i, l_i along the trajectory.
struct Key {
  VarKind kind = VarKind::State;
  int index = 0;

  friend bool operator==(const Key&, const Key&) = default;
  friend std::strong_ordering operator<=>(const Key& a, const Key& b) {
    if (auto c = a.index <=> b.index; c != 0) return c;
    return a.kind <=> b.kind;
  }
};

inline Key X(int i) { return {VarKind::State, i}; }
inline Key U(int i) { return {VarKind::Control, i}; }
inline Key L(int i) { return {VarKind::Obstacle, i}; }

std::string to_string(const Key& key);

// Planar state layout [x, vx, y, vy, psi, omega].
inline constexpr int kStateDim = 6;
inline constexpr int kControlDim = 3;
inline constexpr int kObstacleDim = 2;
inline constexpr int kPsiIndex = 4;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

class MissingKeyError : public std::out_of_range {
 public:
  explicit MissingKeyError(const Key& key)
      : std::out_of_range("missing variable " + to_string(key)), key_(key) {}
  const Key& key() const { return key_; }

 private:
  Key key_;
};

using Increment = std::map<Key, Eigen::VectorXd>;

/// Assignment of vectors to variable keys. The heading component of planar
/// states is kept wrapped to (-pi, pi].
class Values {
 public:
  using Map = std::map<Key, Eigen::VectorXd>;

  void insert(const Key& key, Eigen::VectorXd value);
  void update(const Key& key, Eigen::VectorXd value);
  void insert_or_assign(const Key& key, Eigen::VectorXd value);
  void erase(const Key& key);

  bool contains(const Key& key) const { return entries_.count(key) != 0; }
  const Eigen::VectorXd& at(const Key& key) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<Key> keys() const;

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  /// x <- x + delta for every key present in delta, then re-wraps headings.
  Values retract(const Increment& delta) const;

  friend bool operator==(const Values&, const Values&) = default;

 private:
  static void normalize(const Key& key, Eigen::VectorXd& value);
  Map entries_;
};

}  // namespace scate
