#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <optional>

#include "rtl/rtl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json matrix_to_json(const rtl::Matrix& m) {
  json rows = json::array();
  for (rtl::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (rtl::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

rtl::RawSeries channel_series(const rtl::TimeSeriesDataset& ds,
                             const rtl::Vector& values) {
  rtl::RawSeries s;
  s.timestamps = ds.timestamps;
  s.values.assign(values.data(), values.data() + values.size());
  s.parsed_count = s.values.size();
  return s;
}

std::string format_mape(const rtl::MetricsReport& m) {
  if (!m.mape_defined) return "undef";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", m.mape);
  return buf;
}

int run_synth(const rtl::RunConfig& cfg) {
  rtl::SynthResult res = rtl::generate_synthetic(cfg.synth);
  fs::create_directories(cfg.out_dir);
  rtl::write_series_csv(join_path(cfg.out_dir, "load.csv"),
                        channel_series(res.dataset, res.dataset.load),
                        "timestamp", "load_kwh");
  rtl::write_series_csv(join_path(cfg.out_dir, "temperature.csv"),
                        channel_series(res.dataset, res.dataset.temperature),
                        "timestamp", "temperature_c");
  rtl::write_series_csv(join_path(cfg.out_dir, "humidity.csv"),
                        channel_series(res.dataset, res.dataset.humidity),
                        "timestamp", "humidity_pct");
  rtl::write_dataset_csv(join_path(cfg.out_dir, "dataset.csv"), res.dataset);

  json params;
  params["spec"] = {{"days", cfg.synth.days},
                    {"k_star", cfg.synth.k_star},
                    {"sigma", cfg.synth.sigma},
                    {"daily_amp", cfg.synth.daily_amp},
                    {"weekly_amp", cfg.synth.weekly_amp},
                    {"recur", cfg.synth.recur},
                    {"drive", cfg.synth.drive},
                    {"seed", cfg.synth.seed}};
  params["start_epoch"] = rtl::kSynthStartEpoch;
  params["recurrence"] = matrix_to_json(res.recurrence);
  params["input_map"] = matrix_to_json(res.input_map);
  params["inputs"] = matrix_to_json(res.inputs);
  rtl::atomic_write_file(join_path(cfg.out_dir, "params.json"),
                         params.dump(2) + "\n");

  std::printf("synth: %d days (%lld hourly rows), seed %llu -> %s\n",
              cfg.synth.days,
              static_cast<long long>(res.dataset.size()),
              static_cast<unsigned long long>(cfg.synth.seed),
              cfg.out_dir.c_str());
  return 0;
}

int run_ingest(const rtl::RunConfig& cfg) {
  if (cfg.load_csv.empty() || cfg.temperature_csv.empty() ||
      cfg.humidity_csv.empty())
    throw rtl::ConfigError(
        "ingest needs data.load_csv, data.temperature_csv and "
        "data.humidity_csv");
  auto read = [&](const std::string& path, const std::string& col) {
    rtl::CsvReadSpec spec;
    spec.time_column = cfg.time_column;
    spec.value_column = col;
    rtl::RawSeries s = rtl::read_load_csv(path, spec);
    if (!s.monotone)
      std::fprintf(stderr, "warning: '%s' has out-of-order timestamps\n",
                   path.c_str());
    return rtl::resample_series(s);
  };
  rtl::RawSeries load = read(cfg.load_csv, cfg.load_column);
  rtl::RawSeries temp = read(cfg.temperature_csv, cfg.temperature_column);
  rtl::RawSeries hum = read(cfg.humidity_csv, cfg.humidity_column);
  rtl::TimeSeriesDataset ds =
      rtl::join_weather(load, temp, hum, cfg.building_id);
  fs::create_directories(cfg.out_dir);
  std::string out = join_path(cfg.out_dir, "dataset.csv");
  rtl::write_dataset_csv(out, ds);
  rtl::Index missing = 0;
  for (rtl::Index i = 0; i < ds.size(); ++i)
    if (rtl::is_missing(ds.load(i)) || rtl::is_missing(ds.temperature(i)) ||
        rtl::is_missing(ds.humidity(i)))
      ++missing;
  std::printf("ingest: %lld hourly rows (%lld with missing marks) -> %s\n",
              static_cast<long long>(ds.size()),
              static_cast<long long>(missing), out.c_str());
  return 0;
}

rtl::TimeSeriesDataset load_dataset(const rtl::RunConfig& cfg) {
  if (cfg.dataset_path.empty())
    throw rtl::ConfigError("data.dataset is required for this command");
  return rtl::read_dataset_csv(cfg.dataset_path);
}

rtl::EvalOptions eval_options(const rtl::RunConfig& cfg) {
  rtl::EvalOptions opt;
  opt.models = cfg.eval_models;
  opt.k_fraction = cfg.k_fraction;
  opt.lambda = cfg.lambda;
  opt.mu = cfg.mu;
  opt.gamma = cfg.gamma;
  opt.epsilon = cfg.epsilon;
  opt.max_iters = cfg.max_iters;
  opt.rel_tol = cfg.rel_tol;
  opt.ridge_alpha = cfg.ridge_alpha;
  opt.tl_mu_sparsity = cfg.tl_mu_sparsity;
  opt.z0_policy =
      cfg.z0_policy == "carry" ? rtl::Z0Policy::carry : rtl::Z0Policy::zero;
  return opt;
}

int run_train(const rtl::RunConfig& cfg) {
  rtl::TimeSeriesDataset ds = load_dataset(cfg);
  rtl::DesignMatrix dm =
      rtl::build_design_from_dataset(ds, cfg.features, cfg.max_gap_hours);
  rtl::DesignMatrix train =
      cfg.split_policy == "full" ? dm : rtl::split_half(dm).first;
  rtl::Z0Policy policy =
      cfg.z0_policy == "carry" ? rtl::Z0Policy::carry : rtl::Z0Policy::zero;
  fs::create_directories(cfg.out_dir);

  std::vector<double> trace;
  int iters = 0;
  std::string model_path =
      join_path(cfg.out_dir, "model_" + cfg.model_kind + ".rtlm");
  if (cfg.model_kind == "r2tl") {
    rtl::R2tlConfig mc;
    mc.k = static_cast<int>(rtl::choose_k(train.d(), cfg.k_fraction));
    mc.lambda = cfg.lambda;
    mc.mu = cfg.mu;
    mc.gamma = cfg.gamma;
    mc.epsilon = cfg.epsilon;
    mc.max_iters = cfg.max_iters;
    mc.rel_tol = cfg.rel_tol;
    rtl::R2tlForecaster fc =
        rtl::fit_r2tl_forecaster(train, mc, cfg.features, policy);
    rtl::save_model(model_path, fc);
    trace = fc.model.objective_trace;
    iters = fc.model.iterations;
  } else {
    rtl::RtlConfig mc;
    mc.k = static_cast<int>(rtl::choose_k(train.d(), cfg.k_fraction));
    mc.lambda = cfg.lambda;
    mc.epsilon = cfg.epsilon;
    mc.max_iters = cfg.max_iters;
    mc.rel_tol = cfg.rel_tol;
    rtl::RtlForecaster fc = rtl::fit_rtl_forecaster(
        train, mc, cfg.features, cfg.mu, cfg.gamma, policy);
    rtl::save_model(model_path, fc);
    trace = fc.core.objective_trace;
    iters = fc.core.iterations;
  }
  std::string trace_path =
      join_path(cfg.out_dir, "trace_" + cfg.model_kind + ".csv");
  rtl::write_trace_csv(trace_path, trace);
  std::printf("train: %s on %lld columns (window %d days)\n",
              cfg.model_kind.c_str(), static_cast<long long>(train.n()),
              cfg.features.window_days);
  for (std::size_t i = 0; i < trace.size(); ++i)
    std::printf("  iter %2zu  objective %.9g\n", i + 1, trace[i]);
  std::printf("final objective %.9g after %d iterations (max %d)\n",
              trace.back(), iters, cfg.max_iters);
  std::printf("model -> %s\ntrace -> %s\n", model_path.c_str(),
              trace_path.c_str());
  return 0;
}

int run_predict(const rtl::RunConfig& cfg, std::string model_file,
                bool kind_explicit) {
  if (model_file.empty())
    model_file = join_path(cfg.out_dir, "model_" + cfg.model_kind + ".rtlm");
  rtl::LoadedForecaster lf = rtl::load_model(model_file);
  if (kind_explicit && rtl::to_string(lf.kind) != cfg.model_kind)
    throw rtl::ModelKindError("'" + model_file + "' holds a model of kind '" +
                              rtl::to_string(lf.kind) + "', expected '" +
                              cfg.model_kind + "'");
  rtl::TimeSeriesDataset ds = load_dataset(cfg);
  const rtl::DesignOptions& features =
      lf.kind == rtl::ModelKind::r2tl ? lf.r2tl.features : lf.rtl.features;
  rtl::DesignMatrix dm =
      rtl::build_design_from_dataset(ds, features, cfg.max_gap_hours);
  rtl::Vector pred = lf.kind == rtl::ModelKind::r2tl
                         ? rtl::predict(lf.r2tl, dm.X)
                         : rtl::predict(lf.rtl, dm.X);
  fs::create_directories(cfg.out_dir);
  std::string out = join_path(cfg.out_dir, "forecast.csv");
  rtl::write_forecast_csv(out, dm.day_index, pred);
  std::printf("predict: %lld forecasts (days %lld..%lld) -> %s\n",
              static_cast<long long>(pred.size()),
              static_cast<long long>(dm.day_index.front()),
              static_cast<long long>(dm.day_index.back()), out.c_str());
  return 0;
}

int run_evaluate(const rtl::RunConfig& cfg) {
  rtl::TimeSeriesDataset ds = load_dataset(cfg);
  std::vector<int> windows = cfg.eval_windows;
  if (windows.empty()) windows.push_back(cfg.features.window_days);
  rtl::EvalOptions eopt = eval_options(cfg);

  std::vector<rtl::OverlayRow> overlay;
  std::ostringstream table;
  table << "model_kind,window_days,mae_kwh,rmse_kwh,mape_pct,n,"
           "mape_excluded\n";
  std::printf("%-12s %-6s %12s %12s %10s %6s\n", "model", "window", "MAE",
              "RMSE", "MAPE%", "n");
  for (int w : windows) {
    rtl::DesignOptions features = cfg.features;
    features.window_days = w;
    rtl::DesignMatrix dm =
        rtl::build_design_from_dataset(ds, features, cfg.max_gap_hours);
    auto [train, test] = rtl::split_half(dm);
    std::vector<rtl::EvalRow> rows =
        rtl::evaluate_models(dm, features, eopt);
    for (const rtl::EvalRow& row : rows) {
      std::printf("%-12s %-6d %12.4f %12.4f %10s %6lld\n",
                  row.model_kind.c_str(), w, row.metrics.mae,
                  row.metrics.rmse, format_mape(row.metrics).c_str(),
                  static_cast<long long>(row.metrics.n));
      table << row.model_kind << "," << w << ","
            << rtl::detail::format_double(row.metrics.mae) << ","
            << rtl::detail::format_double(row.metrics.rmse) << ","
            << (row.metrics.mape_defined
                    ? rtl::detail::format_double(row.metrics.mape)
                    : std::string("undefined"))
            << "," << row.metrics.n << "," << row.metrics.mape_excluded
            << "\n";
      for (rtl::Index t = 0; t < test.n(); ++t)
        overlay.push_back({test.day_index[static_cast<std::size_t>(t)],
                           test.l(t), row.forecast(t), row.model_kind});
    }
  }
  fs::create_directories(cfg.out_dir);
  std::string metrics_path = join_path(cfg.out_dir, "metrics.csv");
  std::string overlay_path = join_path(cfg.out_dir, "overlay.csv");
  rtl::atomic_write_file(metrics_path, table.str());
  rtl::write_overlay_csv(overlay_path, overlay);
  std::printf("metrics -> %s\noverlay -> %s\n", metrics_path.c_str(),
              overlay_path.c_str());
  return 0;
}

int run_tune(const rtl::RunConfig& cfg) {
  rtl::TimeSeriesDataset ds = load_dataset(cfg);
  rtl::DesignMatrix dm =
      rtl::build_design_from_dataset(ds, cfg.features, cfg.max_gap_hours);
  rtl::DesignMatrix train = rtl::split_half(dm).first;
  rtl::TuneReport rep = rtl::tune_hyperparameters(
      train, cfg.features, cfg.lambda_grid, cfg.gamma_grid, cfg.k_fraction,
      cfg.folds);

  std::ostringstream out;
  out << "stage,value,residual,penalty,curvature,selected\n";
  auto print_curve = [&](const char* stage, const rtl::LcurveResult& c) {
    std::printf("%s curve%s:\n", stage,
                c.collinear_fallback ? " (collinear fallback)" : "");
    std::printf("  %12s %14s %14s %12s\n", "value", "residual", "penalty",
                "curvature");
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      const rtl::LcurvePoint& p = c.points[i];
      bool sel = static_cast<rtl::Index>(i) == c.selected_index;
      std::printf("  %12.6g %14.6g %14.6g %12.6g%s\n", p.value, p.residual,
                  p.penalty, p.curvature, sel ? "  <- selected" : "");
      out << stage << "," << rtl::detail::format_double(p.value) << ","
          << rtl::detail::format_double(p.residual) << ","
          << rtl::detail::format_double(p.penalty) << ","
          << rtl::detail::format_double(p.curvature) << "," << (sel ? 1 : 0)
          << "\n";
    }
  };
  print_curve("lambda", rep.lambda_curve);
  print_curve("gamma", rep.gamma_curve);
  std::printf("selected lambda = %g, gamma = %g (mu fixed at 1)\n",
              rep.lambda, rep.gamma);
  fs::create_directories(cfg.out_dir);
  std::string path = join_path(cfg.out_dir, "tune_report.csv");
  rtl::atomic_write_file(path, out.str());
  std::printf("report -> %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent transform learning for one-day-ahead building "
               "load forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_opt;
  std::optional<std::string> out_opt, model_opt;
  std::optional<int> window_opt;
  std::string model_file;

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic data");
  CLI::App* ingest =
      app.add_subcommand("ingest", "build the hourly dataset cache from CSVs");
  CLI::App* train = app.add_subcommand("train", "fit a model and save it");
  CLI::App* predict =
      app.add_subcommand("predict", "forecast with a saved model");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "train/test metrics and overlay");
  CLI::App* tune = app.add_subcommand("tune", "greedy L-curve tuning");
  for (CLI::App* sub : {synth, ingest, train, predict, evaluate, tune}) {
    sub->add_option("--config", config_path, "run configuration file");
    sub->add_option("--seed", seed_opt, "random seed override");
    sub->add_option("--out", out_opt, "output directory");
    sub->add_option("--window", window_opt, "window days override")
        ->check(CLI::Range(2, 7));
    sub->add_option("--model", model_opt, "model kind (rtl or r2tl)");
  }
  predict->add_option("model_file", model_file, "saved model path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    rtl::RunConfig cfg;
    if (!config_path.empty()) cfg = rtl::parse_run_config(config_path);
    if (seed_opt) {
      cfg.seed = *seed_opt;
      cfg.synth.seed = *seed_opt;
    }
    if (out_opt) cfg.out_dir = *out_opt;
    if (window_opt) cfg.features.window_days = *window_opt;
    if (model_opt) cfg.model_kind = *model_opt;
    rtl::validate(cfg);

    if (app.got_subcommand(synth)) return run_synth(cfg);
    if (app.got_subcommand(ingest)) return run_ingest(cfg);
    if (app.got_subcommand(train)) return run_train(cfg);
    if (app.got_subcommand(predict))
      return run_predict(cfg, model_file, model_opt.has_value());
    if (app.got_subcommand(evaluate)) return run_evaluate(cfg);
    if (app.got_subcommand(tune)) return run_tune(cfg);
    return 2;
  } catch (const rtl::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const rtl::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const rtl::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const rtl::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
