#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "rtl/timeseries.hpp"

namespace rtl {
namespace detail {

// Howard Hinnant's civil-calendar conversions (proleptic Gregorian, UTC).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

inline bool read_uint(const char*& p, int digits, unsigned& out) {
  out = 0;
  for (int i = 0; i < digits; ++i) {
    if (*p < '0' || *p > '9') return false;
    out = out * 10 + static_cast<unsigned>(*p - '0');
    ++p;
  }
  return true;
}

// ISO-8601 "YYYY-MM-DD[T ]HH:MM[:SS][Z]" or plain epoch seconds.
inline bool parse_timestamp(const std::string& text, std::int64_t& out) {
  if (text.empty()) return false;
  if (text.find('-', 1) == std::string::npos) {
    char* end = nullptr;
    long long v = std::strtoll(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0') return false;
    out = v;
    return true;
  }
  const char* p = text.c_str();
  bool neg = *p == '-';
  if (neg) ++p;
  unsigned y4, mo, dy, hh, mi, ss = 0;
  if (!read_uint(p, 4, y4) || *p != '-') return false;
  ++p;
  if (!read_uint(p, 2, mo) || *p != '-') return false;
  ++p;
  if (!read_uint(p, 2, dy)) return false;
  if (*p != 'T' && *p != ' ') return false;
  ++p;
  if (!read_uint(p, 2, hh) || *p != ':') return false;
  ++p;
  if (!read_uint(p, 2, mi)) return false;
  if (*p == ':') {
    ++p;
    if (!read_uint(p, 2, ss)) return false;
  }
  if (*p == 'Z') ++p;
  if (*p != '\0') return false;
  int year = neg ? -static_cast<int>(y4) : static_cast<int>(y4);
  if (mo < 1 || mo > 12 || dy < 1 || dy > 31 || hh > 23 || mi > 59 || ss > 60)
    return false;
  out = days_from_civil(year, mo, dy) * kDay + hh * 3600 + mi * 60 + ss;
  return true;
}

inline std::string format_timestamp(std::int64_t t) {
  std::int64_t day = floor_div(t, kDay);
  int sec = static_cast<int>(t - day * kDay);
  int y;
  unsigned m, d;
  civil_from_days(day, y, m, d);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, d,
                sec / 3600, sec / 60 % 60, sec % 60);
  return buf;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_line(const std::string& line,
                                           char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (std::string& s : out) {
    std::size_t a = s.find_first_not_of(" \t");
    std::size_t b = s.find_last_not_of(" \t");
    s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

}  // namespace detail

// All writers are atomic: content goes to a sibling temp file first and is
// renamed over the target, so readers never observe a partial file.
inline void atomic_write_file(const std::string& path,
                              const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw IoError("cannot rename '" + tmp + "' to '" + path + "': " +
                  ec.message());
}

struct CsvReadSpec {
  std::string time_column = "timestamp";
  std::string value_column = "value";
  bool lenient = false;  // collect bad rows instead of failing
};

inline RawSeries read_load_csv(const std::string& path,
                               const CsvReadSpec& spec = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  std::vector<std::string> header = detail::split_line(line, delim);
  Index time_idx = -1, value_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == spec.time_column) time_idx = static_cast<Index>(i);
    if (header[i] == spec.value_column) value_idx = static_cast<Index>(i);
  }
  if (time_idx < 0)
    throw DataError("'" + path + "': no column named '" + spec.time_column +
                    "'");
  if (value_idx < 0)
    throw DataError("'" + path + "': no column named '" + spec.value_column +
                    "'");

  RawSeries series;
  std::unordered_set<std::int64_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = detail::split_line(line, delim);
    std::string problem;
    std::int64_t ts = 0;
    double value = 0;
    if (std::max(time_idx, value_idx) >= static_cast<Index>(cells.size())) {
      problem = "too few columns";
    } else if (!detail::parse_timestamp(cells[time_idx], ts)) {
      problem = "bad timestamp '" + cells[time_idx] + "'";
    } else if (cells[value_idx].empty()) {
      value = kNaN;  // explicit missing mark
    } else if (!detail::parse_double(cells[value_idx], value)) {
      problem = "bad value '" + cells[value_idx] + "'";
    }
    if (!problem.empty()) {
      std::string msg = "'" + path + "' line " + std::to_string(line_no) +
                        ": " + problem;
      if (!spec.lenient) throw DataError(msg);
      series.rejects.push_back(msg);
      ++series.rejected_count;
      continue;
    }
    if (!seen.insert(ts).second)
      throw DataError("'" + path + "' line " + std::to_string(line_no) +
                      ": duplicate timestamp " +
                      detail::format_timestamp(ts));
    if (!series.timestamps.empty() && ts <= series.timestamps.back())
      series.monotone = false;
    series.timestamps.push_back(ts);
    series.values.push_back(value);
    ++series.parsed_count;
  }
  if (series.timestamps.empty())
    throw DataError("'" + path + "' has no data rows");
  return series;
}

inline void write_series_csv(const std::string& path, const RawSeries& series,
                             const std::string& time_column = "timestamp",
                             const std::string& value_column = "value") {
  std::ostringstream out;
  out << time_column << "," << value_column << "\n";
  for (std::size_t i = 0; i < series.timestamps.size(); ++i) {
    out << detail::format_timestamp(series.timestamps[i]) << ",";
    if (!is_missing(series.values[i]))
      out << detail::format_double(series.values[i]);
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

// Canonical cached dataset: timestamp,load_kwh,temperature_c,humidity_pct
// with empty cells as missing marks.
inline void write_dataset_csv(const std::string& path,
                              const TimeSeriesDataset& ds) {
  std::ostringstream out;
  out << "timestamp,load_kwh,temperature_c,humidity_pct\n";
  for (Index i = 0; i < ds.size(); ++i) {
    out << detail::format_timestamp(ds.timestamps[i]) << ",";
    if (!is_missing(ds.load(i))) out << detail::format_double(ds.load(i));
    out << ",";
    if (!is_missing(ds.temperature(i)))
      out << detail::format_double(ds.temperature(i));
    out << ",";
    if (!is_missing(ds.humidity(i)))
      out << detail::format_double(ds.humidity(i));
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

inline TimeSeriesDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  std::vector<std::int64_t> ts;
  std::vector<double> load, temp, hum;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = detail::split_line(line, ',');
    std::int64_t t;
    if (cells.size() != 4 || !detail::parse_timestamp(cells[0], t))
      throw DataError("'" + path + "' line " + std::to_string(line_no) +
                      ": expected timestamp,load,temperature,humidity");
    auto cell = [&](int i) {
      if (cells[i].empty()) return kNaN;
      double v;
      if (!detail::parse_double(cells[i], v))
        throw DataError("'" + path + "' line " + std::to_string(line_no) +
                        ": bad value '" + cells[i] + "'");
      return v;
    };
    ts.push_back(t);
    load.push_back(cell(1));
    temp.push_back(cell(2));
    hum.push_back(cell(3));
  }
  if (ts.empty()) throw DataError("'" + path + "' has no data rows");
  TimeSeriesDataset ds;
  ds.timestamps = std::move(ts);
  ds.load = Eigen::Map<Vector>(load.data(), static_cast<Index>(load.size()));
  ds.temperature =
      Eigen::Map<Vector>(temp.data(), static_cast<Index>(temp.size()));
  ds.humidity = Eigen::Map<Vector>(hum.data(), static_cast<Index>(hum.size()));
  ds.meta.interval_seconds =
      ds.timestamps.size() > 1 ? ds.timestamps[1] - ds.timestamps[0]
                               : detail::kHour;
  return ds;
}

inline void write_forecast_csv(const std::string& path,
                               const std::vector<std::int64_t>& day_index,
                               const Vector& forecast) {
  require_dims(static_cast<Index>(day_index.size()) == forecast.size(),
               "forecast csv: day_index length vs forecast length disagree");
  std::ostringstream out;
  out << "day_index,forecast_kwh\n";
  for (std::size_t i = 0; i < day_index.size(); ++i)
    out << day_index[i] << ","
        << detail::format_double(forecast(static_cast<Index>(i))) << "\n";
  atomic_write_file(path, out.str());
}

struct OverlayRow {
  std::int64_t day_index = 0;
  double actual_kwh = 0;
  double forecast_kwh = 0;
  std::string model_kind;
};

inline void write_overlay_csv(const std::string& path,
                              const std::vector<OverlayRow>& rows) {
  std::ostringstream out;
  out << "day_index,actual_kwh,forecast_kwh,model_kind\n";
  for (const OverlayRow& r : rows)
    out << r.day_index << "," << detail::format_double(r.actual_kwh) << ","
        << detail::format_double(r.forecast_kwh) << "," << r.model_kind
        << "\n";
  atomic_write_file(path, out.str());
}

inline void write_trace_csv(const std::string& path,
                            const std::vector<double>& trace) {
  std::ostringstream out;
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << (i + 1) << "," << detail::format_double(trace[i]) << "\n";
  atomic_write_file(path, out.str());
}

}  // namespace rtl
