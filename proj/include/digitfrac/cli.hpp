#pragma once

#include "digitfrac/digit_system.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace digitfrac::cli {

// Built-in names ("cantor", "lebesgue:b:k", "slab:b:a:k") or a path to a
// system JSON file. The result is validated.
DigitSystem load_system(const std::string& spec);
DigitSystem load_system(const nlohmann::json& spec);
inline DigitSystem load_system(const char* spec) { return load_system(std::string(spec)); }

// Experiment description: everything a run needs besides the binary.
struct ExperimentConfig {
  nlohmann::json system;  // built-in name, path, or inline system object
  std::string command;
  std::map<std::string, std::string> params;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

const std::vector<std::string>& command_names();

// Parameter names accepted by a command (besides system/seed/threads/output).
const std::vector<std::string>& command_params(const std::string& command);

// Executes a fully specified config, writing the result to `out`.
// Throws digitfrac::Error on failure.
void execute(const ExperimentConfig& config, std::ostream& out);

// Command-line entry point. Returns 0 on success, 2 on usage, parse and
// validation errors, 3 when a work budget or tolerance limit was hit.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace digitfrac::cli
