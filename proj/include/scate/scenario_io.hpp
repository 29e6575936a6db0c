#pragma once

#include <stdexcept>
#include <string>

#include "scate/sim.hpp"

namespace scate {

/// Parse or validation failure. line() is 1-based, 0 when unknown.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses a YAML scenario. Missing keys take their documented defaults,
/// unknown keys are rejected. The result is validated.
Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario(const std::string& path);

/// Emits every field, so parse_scenario_text(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& scenario);

/// Field-by-field equality of the configurable parts of two scenarios.
bool same_scenario(const Scenario& a, const Scenario& b);

}  // namespace scate
