#include "scate/values.hpp"

#include <cmath>
#include <numbers>

namespace scate {

std::string to_string(const Key& key) {
  const char* prefix = "x";
  switch (key.kind) {
    case VarKind::State: prefix = "x"; break;
    case VarKind::Control: prefix = "u"; break;
    case VarKind::Obstacle: prefix = "l"; break;
  }
  return prefix + std::to_string(key.index);
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  double w = std::remainder(a, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

void Values::normalize(const Key& key, Eigen::VectorXd& value) {
  if (key.kind == VarKind::State && value.size() == kStateDim) {
    value[kPsiIndex] = wrap_angle(value[kPsiIndex]);
  }
}

void Values::insert(const Key& key, Eigen::VectorXd value) {
  normalize(key, value);
  auto [it, inserted] = entries_.emplace(key, std::move(value));
  if (!inserted) {
    throw std::invalid_argument("variable " + to_string(key) + " already present");
  }
}

void Values::update(const Key& key, Eigen::VectorXd value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw MissingKeyError(key);
  if (it->second.size() != value.size()) {
    throw std::invalid_argument("dimension change for " + to_string(key));
  }
  normalize(key, value);
  it->second = std::move(value);
}

void Values::insert_or_assign(const Key& key, Eigen::VectorXd value) {
  normalize(key, value);
  entries_.insert_or_assign(key, std::move(value));
}

void Values::erase(const Key& key) {
  if (entries_.erase(key) == 0) throw MissingKeyError(key);
}

const Eigen::VectorXd& Values::at(const Key& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw MissingKeyError(key);
  return it->second;
}

std::vector<Key> Values::keys() const {
  std::vector<Key> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

Values Values::retract(const Increment& delta) const {
  Values out = *this;
  for (const auto& [key, d] : delta) {
    auto it = out.entries_.find(key);
    if (it == out.entries_.end()) throw MissingKeyError(key);
    if (it->second.size() != d.size()) {
      throw std::invalid_argument("increment dimension mismatch for " + to_string(key));
    }
    it->second += d;
    normalize(key, it->second);
  }
  return out;
}

}  // namespace scate
