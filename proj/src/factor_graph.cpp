#include "scate/factor_graph.hpp"

#include <algorithm>

namespace scate {

std::string_view to_string(FactorTag tag) {
  switch (tag) {
    case FactorTag::Start: return "start";
    case FactorTag::Goal: return "goal";
    case FactorTag::StateMeasurement: return "state_measurement";
    case FactorTag::BearingRange: return "bearing_range";
    case FactorTag::Dynamics: return "dynamics";
    case FactorTag::ControlLimit: return "control_limit";
    case FactorTag::Obstacle: return "obstacle";
    case FactorTag::Condensed: return "condensed";
  }
  return "unknown";
}

FactorId FactorGraph::add(FactorPtr factor) {
  if (!factor) throw std::invalid_argument("null factor");
  const FactorId id{next_id_++};
  variables_.insert(factor->keys().begin(), factor->keys().end());
  factors_.emplace(id, std::move(factor));
  return id;
}

void FactorGraph::remove(FactorId id) {
  if (factors_.erase(id) == 0) throw UnknownFactorError(id);
}

void FactorGraph::replace(FactorId id, FactorPtr factor) {
  if (!factor) throw std::invalid_argument("null factor");
  auto it = factors_.find(id);
  if (it == factors_.end()) throw UnknownFactorError(id);
  variables_.insert(factor->keys().begin(), factor->keys().end());
  it->second = std::move(factor);
}

std::vector<FactorId> FactorGraph::apply(std::span<const FactorEdit> edits) {
  // Validate against the id set the edits would see, then commit.
  std::set<FactorId> live;
  for (const auto& [id, f] : factors_) live.insert(id);
  std::uint64_t next = next_id_;
  for (const auto& edit : edits) {
    if (const auto* add = std::get_if<AddFactor>(&edit)) {
      if (!add->factor) throw std::invalid_argument("null factor");
      live.insert(FactorId{next++});
    } else if (const auto* rm = std::get_if<RemoveFactor>(&edit)) {
      if (live.erase(rm->id) == 0) throw UnknownFactorError(rm->id);
    } else {
      const auto& rep = std::get<ReplaceFactor>(edit);
      if (!rep.factor) throw std::invalid_argument("null factor");
      if (!live.count(rep.id)) throw UnknownFactorError(rep.id);
    }
  }

  std::vector<FactorId> added;
  for (const auto& edit : edits) {
    if (const auto* add = std::get_if<AddFactor>(&edit)) {
      added.push_back(this->add(add->factor));
    } else if (const auto* rm = std::get_if<RemoveFactor>(&edit)) {
      remove(rm->id);
    } else {
      const auto& rep = std::get<ReplaceFactor>(edit);
      replace(rep.id, rep.factor);
    }
  }
  return added;
}

const Factor& FactorGraph::at(FactorId id) const { return *get(id); }

FactorPtr FactorGraph::get(FactorId id) const {
  auto it = factors_.find(id);
  if (it == factors_.end()) throw UnknownFactorError(id);
  return it->second;
}

std::size_t FactorGraph::count(FactorTag tag) const {
  return static_cast<std::size_t>(std::count_if(
      factors_.begin(), factors_.end(), [tag](const auto& kv) { return kv.second->tag() == tag; }));
}

std::size_t FactorGraph::degree(const Key& key) const {
  std::size_t n = 0;
  for (const auto& [id, f] : factors_) {
    if (std::find(f->keys().begin(), f->keys().end(), key) != f->keys().end()) ++n;
  }
  return n;
}

FactorGraph edit_factors(FactorGraph graph, std::span<const FactorEdit> edits) {
  graph.apply(edits);
  return graph;
}

double total_error(const FactorGraph& graph, const Values& values) {
  for (const Key& key : graph.variables()) {
    if (!values.contains(key)) throw MissingKeyError(key);
  }
  double sum = 0.0;
  for (const auto& [id, factor] : graph.factors()) sum += factor->error(values);
  return sum;
}

}  // namespace scate
