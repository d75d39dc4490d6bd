#pragma once

// Experiment configuration: a flat key=value file, overridden by flags.
//
//   # comment
//   kappa = 0.1
//   xi = 20            # or n_steps = 2000, never both
//   psi_plus_sq = 0.6
//   psi_phase = 0      # relative phase of psi- (radians)
//   phi = 0            # total Phi, split evenly over the steps
//   phases = 0.1,0.2   # or explicit phi_n list (length N)
//   samples = 100000
//   seed = 42
//   dead_zone = 0.5
//   bins = 80
//   workers = 1
//   export_paths = 0
//   out = results

#include <bornsim/error.hpp>
#include <bornsim/model.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace bornsim::cli {

inline constexpr double kDefaultXi = 20.0;
inline constexpr double kKappaWarning = 0.3;
inline constexpr const char* kSeedEnv = "BORN_SIM_SEED";

struct ExperimentConfig {
  double kappa = 0.1;
  std::optional<int> n_steps;
  std::optional<double> xi;
  double psi_plus_sq = 0.6;
  double psi_phase = 0.0;
  std::optional<double> phi;              // total Phi, split evenly
  std::optional<std::vector<double>> phases;
  std::uint64_t samples = 100000;
  std::optional<std::uint64_t> seed;
  double dead_zone = 0.5;
  std::size_t bins = 80;
  unsigned workers = 1;
  std::size_t export_paths = 0;
  std::string out = ".";

  // Throws ConfigError on any violated constraint.
  void validate() const {
    if (n_steps && xi) throw ConfigError("give exactly one of n_steps and xi, not both");
    if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("kappa must lie in (0, 1)");
    if (n_steps && *n_steps < 1) throw ConfigError("n_steps must be positive");
    if (xi && !(*xi > 0.0)) throw ConfigError("xi must be positive");
    if (!(psi_plus_sq >= 0.0 && psi_plus_sq <= 1.0)) {
      throw ConfigError("psi_plus_sq must lie in [0, 1]");
    }
    if (!std::isfinite(psi_phase)) throw ConfigError("psi_phase must be finite");
    if (phi && phases) throw ConfigError("give either phi or phases, not both");
    if (samples < 1) throw ConfigError("samples must be at least 1");
    if (!(dead_zone >= 0.0 && dead_zone < 1.0)) throw ConfigError("dead_zone must lie in [0, 1)");
    if (bins < 1) throw ConfigError("bins must be at least 1");
    if (workers < 1) throw ConfigError("workers must be at least 1");
  }

  ModelParams params() const {
    validate();
    const ModelParams shape = n_steps ? ModelParams(kappa, *n_steps)
                                      : ModelParams::from_xi(kappa, xi.value_or(kDefaultXi));
    const int n = shape.n_steps();
    if (phases) return ModelParams(kappa, n, *phases);
    if (phi) return ModelParams(kappa, n, std::vector<double>(static_cast<std::size_t>(n), *phi / n));
    return shape;
  }

  QubitState psi() const { return QubitState::from_probability(psi_plus_sq, psi_phase); }

  std::uint64_t seed_or_default() const { return seed.value_or(42); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value for '" + std::string(key) + "': '" + std::string(text) + "'");
  }
  return value;
}

inline std::vector<double> parse_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_number<double>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace detail

// Applies one key=value assignment. Unknown keys are an error.
inline void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_number;
  key = detail::trim(key);
  value = detail::trim(value);
  if (key == "kappa") cfg.kappa = parse_number<double>(key, value);
  else if (key == "n_steps") cfg.n_steps = parse_number<int>(key, value);
  else if (key == "xi") cfg.xi = parse_number<double>(key, value);
  else if (key == "psi_plus_sq") cfg.psi_plus_sq = parse_number<double>(key, value);
  else if (key == "psi_phase") cfg.psi_phase = parse_number<double>(key, value);
  else if (key == "phi") cfg.phi = parse_number<double>(key, value);
  else if (key == "phases") cfg.phases = detail::parse_list(key, value);
  else if (key == "samples") cfg.samples = parse_number<std::uint64_t>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "dead_zone") cfg.dead_zone = parse_number<double>(key, value);
  else if (key == "bins") cfg.bins = parse_number<std::size_t>(key, value);
  else if (key == "workers") cfg.workers = parse_number<unsigned>(key, value);
  else if (key == "export_paths") cfg.export_paths = parse_number<std::size_t>(key, value);
  else if (key == "out") cfg.out = std::string(value);
  else throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

inline ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(cfg, view.substr(0, eq), view.substr(eq + 1));
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Seed precedence: flag, config file, BORN_SIM_SEED, default 42.
inline void apply_seed_fallback(ExperimentConfig& cfg) {
  if (cfg.seed) return;
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
    cfg.seed = detail::parse_number<std::uint64_t>(kSeedEnv, env);
  }
}

}  // namespace bornsim::cli
