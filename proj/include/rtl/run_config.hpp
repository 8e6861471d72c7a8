#pragma once

#include <fstream>
#include <functional>
#include <map>

#include "rtl/features.hpp"
#include "rtl/synth.hpp"

namespace rtl {

// Plain-text `key = value` configuration with dotted keys; '#' starts a
// comment. Every key is listed in the README.
struct RunConfig {
  std::string dataset_path;
  std::string load_csv, temperature_csv, humidity_csv;
  std::string time_column = "timestamp";
  std::string load_column = "value";
  std::string temperature_column = "value";
  std::string humidity_column = "value";
  std::string building_id;
  int max_gap_hours = 3;

  DesignOptions features;

  std::string model_kind = "r2tl";
  double k_fraction = 0.5;
  double lambda = 0.1;
  double mu = 1.0;
  double gamma = 0.05;
  double epsilon = 1e-3;
  int max_iters = 20;
  double rel_tol = 1e-4;
  std::string z0_policy = "zero";

  double ridge_alpha = 0.05;
  double tl_mu_sparsity = 1.0;

  std::vector<std::string> eval_models = {"r2tl", "rtl", "tl_ridge",
                                          "ridge_raw", "persistence"};
  std::vector<int> eval_windows;  // empty: just features.window_days

  std::vector<double> lambda_grid = {0.01, 0.0316, 0.1, 0.316, 1.0};
  std::vector<double> gamma_grid = {0.005, 0.0158, 0.05, 0.158, 0.5};
  int folds = 5;

  std::string split_policy = "half";  // train on first half, or "full"

  SynthSpec synth;

  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  std::size_t b = s.find_last_not_of(" \t");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

inline double config_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  return x;
}

inline long long config_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  return x;
}

inline std::vector<std::string> config_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = trim(cur);
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

// Applies one dotted key. Shared by the file parser and CLI flag overrides.
inline void set_config_key(RunConfig& cfg, const std::string& key,
                           const std::string& value) {
  using detail::config_double;
  using detail::config_int;
  auto num = [&] { return config_double(key, value); };
  auto integer = [&] { return config_int(key, value); };
  if (key == "data.dataset") cfg.dataset_path = value;
  else if (key == "data.load_csv") cfg.load_csv = value;
  else if (key == "data.temperature_csv") cfg.temperature_csv = value;
  else if (key == "data.humidity_csv") cfg.humidity_csv = value;
  else if (key == "data.time_column") cfg.time_column = value;
  else if (key == "data.load_column") cfg.load_column = value;
  else if (key == "data.temperature_column") cfg.temperature_column = value;
  else if (key == "data.humidity_column") cfg.humidity_column = value;
  else if (key == "data.building_id") cfg.building_id = value;
  else if (key == "data.max_gap_hours")
    cfg.max_gap_hours = static_cast<int>(integer());
  else if (key == "features.window_days")
    cfg.features.window_days = static_cast<int>(integer());
  else if (key == "features.granularity") {
    if (value == "hourly") cfg.features.granularity = FeatureGranularity::hourly;
    else if (value == "daily") cfg.features.granularity = FeatureGranularity::daily;
    else throw ConfigError("features.granularity must be hourly or daily");
  } else if (key == "features.day_offset_hours")
    cfg.features.day_offset_hours = static_cast<int>(integer());
  else if (key == "model.kind") cfg.model_kind = value;
  else if (key == "model.k_fraction") cfg.k_fraction = num();
  else if (key == "model.lambda") cfg.lambda = num();
  else if (key == "model.mu") cfg.mu = num();
  else if (key == "model.gamma") cfg.gamma = num();
  else if (key == "model.epsilon") cfg.epsilon = num();
  else if (key == "model.max_iters") cfg.max_iters = static_cast<int>(integer());
  else if (key == "model.rel_tol") cfg.rel_tol = num();
  else if (key == "model.z0_policy") {
    if (value != "zero" && value != "carry")
      throw ConfigError("model.z0_policy must be zero or carry");
    cfg.z0_policy = value;
  } else if (key == "baseline.ridge_alpha") cfg.ridge_alpha = num();
  else if (key == "baseline.tl_mu_sparsity") cfg.tl_mu_sparsity = num();
  else if (key == "eval.models") cfg.eval_models = detail::config_list(value);
  else if (key == "eval.windows") {
    cfg.eval_windows.clear();
    for (const std::string& w : detail::config_list(value))
      cfg.eval_windows.push_back(static_cast<int>(config_int(key, w)));
  } else if (key == "tune.lambda_grid") {
    cfg.lambda_grid.clear();
    for (const std::string& g : detail::config_list(value))
      cfg.lambda_grid.push_back(config_double(key, g));
  } else if (key == "tune.gamma_grid") {
    cfg.gamma_grid.clear();
    for (const std::string& g : detail::config_list(value))
      cfg.gamma_grid.push_back(config_double(key, g));
  } else if (key == "tune.folds") cfg.folds = static_cast<int>(integer());
  else if (key == "split.policy") {
    if (value != "half" && value != "full")
      throw ConfigError("split.policy must be half or full");
    cfg.split_policy = value;
  }
  else if (key == "synth.days") cfg.synth.days = static_cast<int>(integer());
  else if (key == "synth.k_star") cfg.synth.k_star = static_cast<int>(integer());
  else if (key == "synth.sigma") cfg.synth.sigma = num();
  else if (key == "synth.daily_amp") cfg.synth.daily_amp = num();
  else if (key == "synth.weekly_amp") cfg.synth.weekly_amp = num();
  else if (key == "synth.recur") cfg.synth.recur = num();
  else if (key == "synth.drive") cfg.synth.drive = num();
  else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(integer());
    cfg.synth.seed = cfg.seed;
  } else if (key == "out.dir") cfg.out_dir = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void validate(const RunConfig& cfg) {
  validate(cfg.features);
  if (!(cfg.k_fraction > 0.0) || cfg.k_fraction > 1.0)
    throw ConfigError("model.k_fraction must be in (0,1]");
  if (cfg.model_kind != "rtl" && cfg.model_kind != "r2tl")
    throw ConfigError("model.kind must be rtl or r2tl");
  if (cfg.max_gap_hours < 0)
    throw ConfigError("data.max_gap_hours must be >= 0");
  for (int w : cfg.eval_windows)
    if (w < 2 || w > 7) throw ConfigError("eval.windows entries must be in [2,7]");
}

inline RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config '" + path + "' line " +
                        std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (config '" + path +
                        "' line " + std::to_string(line_no) + ")");
    }
  }
  return cfg;
}

}  // namespace rtl
