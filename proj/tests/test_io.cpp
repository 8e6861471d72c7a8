#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <filesystem>
#include <fstream>

#include "rtl/rtl.hpp"

using namespace rtl;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

namespace fs = std::filesystem;

std::string work_dir() {
  static const std::string dir = [] {
    std::string d = "/tmp/rtl_io_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string write_text(const std::string& name, const std::string& content) {
  std::string path = work_dir() + "/" + name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RawSeries hourly_series(std::int64_t start_hour, Index n, double base) {
  RawSeries s;
  for (Index i = 0; i < n; ++i) {
    s.timestamps.push_back((start_hour + i) * 3600);
    s.values.push_back(base + static_cast<double>(i));
  }
  return s;
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

R2tlForecaster small_fitted_forecaster(unsigned seed) {
  SynthSpec spec;
  spec.days = 30;
  spec.seed = seed;
  DesignOptions opt;
  opt.window_days = 2;
  DesignMatrix dm = build_design_matrix(generate_synthetic(spec).dataset, opt);
  auto [train, test] = split_half(dm);
  R2tlConfig cfg;
  cfg.k = static_cast<int>(choose_k(train.d(), 0.5));
  cfg.max_iters = 5;
  return fit_r2tl_forecaster(train, cfg, opt);
}

}  // namespace

TEST_CASE("a two-row file parses into two samples", "[io][csv]") {
  std::string path = write_text("two_rows.csv",
                                "timestamp,value\n"
                                "2024-01-01T00:00:00Z,12.5\n"
                                "1704070800,13.25\n");
  RawSeries s = read_load_csv(path);
  REQUIRE(s.timestamps.size() == 2u);
  CHECK(s.timestamps[0] == 1704067200);
  CHECK(s.timestamps[1] == 1704070800);
  CHECK(s.values[0] == 12.5);
  CHECK(s.values[1] == 13.25);
  CHECK(s.monotone);
  CHECK(s.parsed_count == 2u);
  CHECK(s.rejected_count == 0u);
}

TEST_CASE("duplicate timestamps are rejected by name", "[io][csv][error]") {
  std::string path = write_text("dup.csv",
                                "timestamp,value\n"
                                "2024-01-01T05:00:00Z,1\n"
                                "2024-01-01T06:00:00Z,2\n"
                                "2024-01-01T05:00:00Z,3\n");
  CHECK_THROWS_MATCHES(
      read_load_csv(path), DataError,
      MessageMatches(ContainsSubstring("line 4") &&
                     ContainsSubstring(
                         "duplicate timestamp 2024-01-01T05:00:00Z")));
}

TEST_CASE("minute-level ingest survives resampling", "[io][csv]") {
  std::ostringstream csv;
  csv << "timestamp,value\n";
  for (int i = 0; i < 1440; ++i)
    csv << 1704067200 + 60 * i << "," << i << "\n";
  std::string path = write_text("minute.csv", csv.str());
  RawSeries s = read_load_csv(path);
  CHECK(s.parsed_count == 1440u);
  REQUIRE(s.timestamps.size() == 1440u);
  RawSeries hourly = resample_series(s);
  REQUIRE(hourly.timestamps.size() == 24u);
  for (Index h = 0; h < 24; ++h) {
    CHECK(hourly.timestamps[h] == 1704067200 + h * 3600);
    CHECK(hourly.values[h] ==
          Catch::Approx(60.0 * h + 29.5).epsilon(1e-14));
  }
}

TEST_CASE("joining identical ranges keeps every hour", "[io][join]") {
  RawSeries load = hourly_series(100, 48, 0.0);
  RawSeries temp = hourly_series(100, 48, 1000.0);
  RawSeries hum = hourly_series(100, 48, 2000.0);
  TimeSeriesDataset ds = join_weather(load, temp, hum, "b1");
  REQUIRE(ds.size() == 48);
  CHECK(ds.meta.building_id == "b1");
  for (Index i = 0; i < 48; ++i) {
    CHECK(ds.timestamps[i] == (100 + i) * 3600);
    CHECK(ds.load(i) == static_cast<double>(i));
    CHECK(ds.temperature(i) == 1000.0 + i);
    CHECK(ds.humidity(i) == 2000.0 + i);
  }
}

TEST_CASE("joining barely-overlapping ranges keeps the single shared hour",
          "[io][join]") {
  RawSeries load = hourly_series(0, 10, 0.0);    // hours 0..9
  RawSeries temp = hourly_series(9, 11, 100.0);  // hours 9..19
  RawSeries hum = hourly_series(5, 10, 200.0);   // hours 5..14
  TimeSeriesDataset ds = join_weather(load, temp, hum);
  REQUIRE(ds.size() == 1);
  CHECK(ds.timestamps[0] == 9 * 3600);
  CHECK(ds.load(0) == 9.0);
  CHECK(ds.temperature(0) == 100.0);
  CHECK(ds.humidity(0) == 204.0);
}

TEST_CASE("joins match the interval intersection", "[io][join][property]") {
  Rng rng(11);
  int joined = 0;
  for (int trial = 0; trial < 12; ++trial) {
    std::int64_t s0 = static_cast<std::int64_t>(rng.uniform() * 20);
    std::int64_t s1 = static_cast<std::int64_t>(rng.uniform() * 20);
    std::int64_t s2 = static_cast<std::int64_t>(rng.uniform() * 20);
    Index n0 = 5 + static_cast<Index>(rng.uniform() * 20);
    Index n1 = 5 + static_cast<Index>(rng.uniform() * 20);
    Index n2 = 5 + static_cast<Index>(rng.uniform() * 20);
    RawSeries a = hourly_series(s0, n0, 0.0);
    RawSeries b = hourly_series(s1, n1, 0.0);
    RawSeries c = hourly_series(s2, n2, 0.0);
    std::int64_t lo = std::max({s0, s1, s2});
    std::int64_t hi = std::min({s0 + n0 - 1, s1 + n1 - 1, s2 + n2 - 1});
    if (lo > hi) {
      CHECK_THROWS_AS(join_weather(a, b, c), DataError);
      continue;
    }
    ++joined;
    TimeSeriesDataset ds = join_weather(a, b, c);
    CHECK(ds.size() == static_cast<Index>(hi - lo + 1));
    CHECK(ds.timestamps.front() == lo * 3600);
    CHECK(ds.timestamps.back() == hi * 3600);
    CHECK(ds.load(0) == static_cast<double>(lo - s0));
    CHECK(ds.temperature(0) == static_cast<double>(lo - s1));
    CHECK(ds.humidity(0) == static_cast<double>(lo - s2));
  }
  CHECK(joined > 0);  // the trial mix exercises both branches
}

TEST_CASE("disjoint ranges refuse to join", "[io][join][error]") {
  CHECK_THROWS_MATCHES(
      join_weather(hourly_series(0, 5, 0.0), hourly_series(100, 5, 0.0),
                   hourly_series(0, 5, 0.0)),
      DataError,
      MessageMatches(ContainsSubstring("hourly ranges do not overlap")));
}

TEST_CASE("a saved model predicts exactly like the original", "[io][model]") {
  R2tlForecaster fc = small_fitted_forecaster(21);
  SynthSpec spec;
  spec.days = 20;
  spec.seed = 22;
  DesignOptions opt;
  opt.window_days = 2;
  DesignMatrix probe =
      build_design_matrix(generate_synthetic(spec).dataset, opt);

  std::string path = work_dir() + "/roundtrip.rtlm";
  save_model(path, fc);
  R2tlForecaster back = load_r2tl_model(path);

  Vector orig = predict(fc, probe.X);
  Vector loaded = predict(back, probe.X);
  REQUIRE(orig.size() == loaded.size());
  for (Index i = 0; i < orig.size(); ++i)
    CHECK(same_bits(orig(i), loaded(i)));

  CHECK(back.model.config.k == fc.model.config.k);
  CHECK(back.model.config.lambda == fc.model.config.lambda);
  CHECK(back.model.config.mu == fc.model.config.mu);
  CHECK(back.model.config.gamma == fc.model.config.gamma);
  CHECK(back.model.config.max_iters == fc.model.config.max_iters);
  CHECK(back.features.window_days == fc.features.window_days);
  CHECK(back.model.objective_trace == fc.model.objective_trace);
}

TEST_CASE("the recurrent-only model round-trips too", "[io][model]") {
  SynthSpec spec;
  spec.days = 30;
  spec.seed = 23;
  DesignOptions opt;
  opt.window_days = 2;
  DesignMatrix dm = build_design_matrix(generate_synthetic(spec).dataset, opt);
  auto [train, test] = split_half(dm);
  RtlConfig cfg;
  cfg.k = static_cast<int>(choose_k(train.d(), 0.5));
  cfg.max_iters = 5;
  RtlForecaster fc =
      fit_rtl_forecaster(train, cfg, opt, 1.0, 0.05, Z0Policy::carry);

  std::string path = work_dir() + "/roundtrip_rtl.rtlm";
  save_model(path, fc);
  RtlForecaster back = load_rtl_model(path);
  CHECK(back.z0_policy == Z0Policy::carry);
  CHECK(back.mu == fc.mu);
  CHECK(back.gamma == fc.gamma);
  Vector orig = predict(fc, test.X);
  Vector loaded = predict(back, test.X);
  for (Index i = 0; i < orig.size(); ++i)
    CHECK(same_bits(orig(i), loaded(i)));
}

TEST_CASE("a flipped byte is caught by the checksum", "[io][model][error]") {
  R2tlForecaster fc = small_fitted_forecaster(24);
  std::string path = work_dir() + "/corrupt.rtlm";
  save_model(path, fc);
  std::string bytes = slurp(path);
  bytes[bytes.size() / 2] ^= 0x40;
  write_text("corrupt.rtlm", bytes);
  CHECK_THROWS_MATCHES(
      load_model(path), IoError,
      MessageMatches(
          ContainsSubstring("checksum mismatch (corrupt model file)")));
}

TEST_CASE("loading the wrong model kind is refused", "[io][model][error]") {
  R2tlForecaster fc = small_fitted_forecaster(25);
  std::string path = work_dir() + "/kind.rtlm";
  save_model(path, fc);
  CHECK_THROWS_MATCHES(
      load_rtl_model(path), ModelKindError,
      MessageMatches(ContainsSubstring(
          "holds a model of kind 'r2tl', expected 'rtl'")));
  CHECK_NOTHROW(load_r2tl_model(path));
}

TEST_CASE("an unknown format version asks for a re-save",
          "[io][model][error]") {
  R2tlForecaster fc = small_fitted_forecaster(26);
  std::string path = work_dir() + "/version.rtlm";
  save_model(path, fc);
  std::string bytes = slurp(path);
  std::size_t at = bytes.find(" v1\n");
  REQUIRE(at != std::string::npos);
  bytes[at + 2] = '9';
  // keep the trailer honest so only the version differs
  std::size_t tpos = bytes.rfind("CHECKSUM ");
  char trailer[32];
  std::snprintf(trailer, sizeof trailer, "CHECKSUM %016llx\n",
                static_cast<unsigned long long>(
                    detail::fnv1a(bytes, tpos)));
  bytes = bytes.substr(0, tpos) + trailer;
  write_text("version.rtlm", bytes);
  CHECK_THROWS_MATCHES(
      load_model(path), IoError,
      MessageMatches(ContainsSubstring("unsupported model format v9") &&
                     ContainsSubstring("re-save the model")));
}

TEST_CASE("a truncated model file is reported as such", "[io][model][error]") {
  R2tlForecaster fc = small_fitted_forecaster(27);
  std::string path = work_dir() + "/trunc.rtlm";
  save_model(path, fc);
  std::string bytes = slurp(path);
  write_text("trunc.rtlm", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_MATCHES(load_model(path), IoError,
                       MessageMatches(ContainsSubstring("truncated")));
  write_text("trunc.rtlm", "");
  CHECK_THROWS_MATCHES(load_model(path), IoError,
                       MessageMatches(ContainsSubstring("truncated")));
}

TEST_CASE("model payloads survive bit-exactly", "[io][model]") {
  RtlForecaster fc;
  Matrix Tm(2, 6);
  Tm << -0.0, 5e-324, 1.7976931348623157e308, 2.2250738585072014e-308,
      -1.5e-323, 0.1,
      1.0, -2.0, 3.0, -4.0, 5.0, -6.0;
  fc.core.transform = {Tm};
  fc.core.z0 = Vector::Zero(2);
  fc.core.z_final = Vector::Zero(2);
  fc.core.input_dim = 4;
  fc.core.config.k = 2;
  fc.core.objective_trace = {1.0, 0.5, -0.0};
  fc.weights = Vector(2);
  fc.weights << 5e-324, -0.0;
  std::string path = work_dir() + "/bits.rtlm";
  save_model(path, fc);
  RtlForecaster back = load_rtl_model(path);
  REQUIRE(back.core.transform.matrix.rows() == 2);
  REQUIRE(back.core.transform.matrix.cols() == 6);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 6; ++j)
      CHECK(same_bits(back.core.transform.matrix(i, j), Tm(i, j)));
  CHECK(same_bits(back.weights(0), 5e-324));
  CHECK(same_bits(back.weights(1), -0.0));
  CHECK(std::signbit(back.weights(1)));
  REQUIRE(back.core.objective_trace.size() == 3u);
  CHECK(same_bits(back.core.objective_trace[2], -0.0));
}

TEST_CASE("series files round-trip including missing marks", "[io][csv]") {
  Rng rng(30);
  RawSeries s;
  for (Index i = 0; i < 20; ++i) {
    s.timestamps.push_back(1704067200 + i * 3600);
    s.values.push_back(i % 7 == 3 ? kNaN : rng.normal() * 1e3);
  }
  s.values[5] = -0.0;
  s.values[6] = 5e-324;
  std::string path = work_dir() + "/series_rt.csv";
  write_series_csv(path, s);
  RawSeries back = read_load_csv(path);
  REQUIRE(back.timestamps.size() == s.timestamps.size());
  for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
    CHECK(back.timestamps[i] == s.timestamps[i]);
    if (std::isnan(s.values[i])) {
      CHECK(std::isnan(back.values[i]));
    } else {
      CHECK(same_bits(back.values[i], s.values[i]));
    }
  }
}

TEST_CASE("lenient parsing itemizes every rejected row", "[io][csv]") {
  std::string path = write_text("lenient.csv",
                                "timestamp,value\n"
                                "2024-01-01T00:00:00Z,1.0\n"
                                "not-a-time,2.0\n"
                                "2024-01-01T01:00:00Z,oops\n"
                                "2024-01-01T02:00:00Z,\n"
                                "2024-01-01T03:00:00Z\n"
                                "2024-01-01T04:00:00Z,5.0\n");
  CsvReadSpec lenient;
  lenient.lenient = true;
  RawSeries s = read_load_csv(path, lenient);
  CHECK(s.parsed_count == 3u);  // the empty value cell is a missing mark
  CHECK(s.rejected_count == 3u);
  CHECK(s.parsed_count + s.rejected_count == 6u);
  REQUIRE(s.rejects.size() == 3u);
  CHECK_THAT(s.rejects[0], ContainsSubstring("line 3") &&
                               ContainsSubstring("bad timestamp 'not-a-time'"));
  CHECK_THAT(s.rejects[1], ContainsSubstring("line 4") &&
                               ContainsSubstring("bad value 'oops'"));
  CHECK_THAT(s.rejects[2], ContainsSubstring("line 6") &&
                               ContainsSubstring("too few columns"));
  CHECK(std::isnan(s.values[1]));  // the explicit missing mark parsed

  CsvReadSpec strict;
  CHECK_THROWS_MATCHES(
      read_load_csv(path, strict), DataError,
      MessageMatches(ContainsSubstring("line 3") &&
                     ContainsSubstring("bad timestamp")));
}

TEST_CASE("missing columns are reported by name", "[io][csv][error]") {
  std::string path = write_text("cols.csv", "time,load\n1,2\n");
  CHECK_THROWS_MATCHES(
      read_load_csv(path), DataError,
      MessageMatches(ContainsSubstring("no column named 'timestamp'")));
  CsvReadSpec spec;
  spec.time_column = "time";
  CHECK_THROWS_MATCHES(
      read_load_csv(path, spec), DataError,
      MessageMatches(ContainsSubstring("no column named 'value'")));
  spec.value_column = "load";
  CHECK_NOTHROW(read_load_csv(path, spec));
}
