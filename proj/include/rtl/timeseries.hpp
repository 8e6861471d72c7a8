#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtl/core.hpp"

namespace rtl {

// A raw timestamped value series as ingested from disk, before resampling.
// Rows are kept in file order; `monotone` records whether timestamps were
// already strictly increasing. `rejects` itemizes rows a lenient parse
// skipped, so parsed + rejected always equals the physical row count.
struct RawSeries {
  std::vector<std::int64_t> timestamps;  // epoch seconds, UTC
  std::vector<double> values;
  bool monotone = true;
  std::vector<std::string> rejects;
  std::size_t parsed_count = 0;
  std::size_t rejected_count = 0;
};

struct DatasetMeta {
  std::string building_id;
  std::int64_t interval_seconds = 3600;
};

// Aligned hourly (after resampling) load/temperature/humidity channels.
// Missing values are explicit NaN marks, never silent zeros.
struct TimeSeriesDataset {
  std::vector<std::int64_t> timestamps;  // epoch seconds, UTC
  Vector load;                           // kWh per interval
  Vector temperature;                    // degrees C
  Vector humidity;                       // percent
  DatasetMeta meta;

  Index size() const { return static_cast<Index>(timestamps.size()); }
};

inline bool is_missing(double v) { return std::isnan(v); }

namespace detail {

constexpr std::int64_t kHour = 3600;
constexpr std::int64_t kDay = 86400;

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

inline Vector bucket_means(const std::vector<std::int64_t>& ts,
                           const std::vector<double>& vals,
                           std::int64_t first_hour, Index hours) {
  Vector sum = Vector::Zero(hours);
  Eigen::VectorXi count = Eigen::VectorXi::Zero(hours);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (is_missing(vals[i])) continue;
    Index h = static_cast<Index>(floor_div(ts[i], kHour) - first_hour);
    sum(h) += vals[i];
    count(h) += 1;
  }
  Vector out(hours);
  for (Index h = 0; h < hours; ++h)
    out(h) = count(h) > 0 ? sum(h) / count(h) : kNaN;
  return out;
}

}  // namespace detail

// Averages each channel over wall-clock hour buckets. Hours inside the span
// with no samples become explicit missing marks. Already-hourly data passes
// through unchanged (mean of a single sample is that sample).
inline TimeSeriesDataset resample_hourly(const TimeSeriesDataset& ds) {
  if (ds.size() == 0) throw DataError("resample_hourly: empty dataset");
  if (ds.meta.interval_seconds > detail::kHour)
    throw DataError("resample_hourly: native interval exceeds one hour");
  std::int64_t lo = ds.timestamps.front(), hi = ds.timestamps.front();
  for (std::int64_t t : ds.timestamps) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  std::int64_t first = detail::floor_div(lo, detail::kHour);
  Index hours = static_cast<Index>(detail::floor_div(hi, detail::kHour) -
                                   first + 1);
  auto channel = [&](const Vector& v) {
    std::vector<double> vals(v.data(), v.data() + v.size());
    return detail::bucket_means(ds.timestamps, vals, first, hours);
  };
  TimeSeriesDataset out;
  out.timestamps.resize(hours);
  for (Index h = 0; h < hours; ++h)
    out.timestamps[h] = (first + h) * detail::kHour;
  out.load = channel(ds.load);
  out.temperature = channel(ds.temperature);
  out.humidity = channel(ds.humidity);
  out.meta = ds.meta;
  out.meta.interval_seconds = detail::kHour;
  return out;
}

// Single-channel hourly resample, for ingesting separate source files.
inline RawSeries resample_series(const RawSeries& s) {
  if (s.timestamps.empty()) throw DataError("resample_series: empty series");
  std::int64_t lo = s.timestamps.front(), hi = s.timestamps.front();
  for (std::int64_t t : s.timestamps) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  std::int64_t first = detail::floor_div(lo, detail::kHour);
  Index hours = static_cast<Index>(detail::floor_div(hi, detail::kHour) -
                                   first + 1);
  Vector means = detail::bucket_means(s.timestamps, s.values, first, hours);
  RawSeries out;
  out.timestamps.resize(hours);
  out.values.resize(hours);
  for (Index h = 0; h < hours; ++h) {
    out.timestamps[h] = (first + h) * detail::kHour;
    out.values[h] = means(h);
  }
  out.parsed_count = s.parsed_count;
  out.rejected_count = s.rejected_count;
  out.rejects = s.rejects;
  return out;
}

// Intersects three hourly series to their common time range.
inline TimeSeriesDataset join_weather(const RawSeries& load,
                                      const RawSeries& temperature,
                                      const RawSeries& humidity,
                                      const std::string& building_id = "") {
  auto check_hourly = [](const RawSeries& s, const char* name) {
    if (s.timestamps.empty())
      throw DataError(std::string("join_weather: empty ") + name + " series");
    for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
      if (s.timestamps[i] % detail::kHour != 0)
        throw DataError(std::string("join_weather: ") + name +
                        " series is not hour-aligned");
      if (i > 0 && s.timestamps[i] - s.timestamps[i - 1] != detail::kHour)
        throw DataError(std::string("join_weather: ") + name +
                        " series is not contiguous hourly");
    }
  };
  check_hourly(load, "load");
  check_hourly(temperature, "temperature");
  check_hourly(humidity, "humidity");
  std::int64_t lo = std::max({load.timestamps.front(),
                              temperature.timestamps.front(),
                              humidity.timestamps.front()});
  std::int64_t hi = std::min({load.timestamps.back(),
                              temperature.timestamps.back(),
                              humidity.timestamps.back()});
  if (lo > hi) throw DataError("join_weather: hourly ranges do not overlap");
  Index n = static_cast<Index>((hi - lo) / detail::kHour) + 1;
  auto slice = [&](const RawSeries& s) {
    Index off = static_cast<Index>((lo - s.timestamps.front()) / detail::kHour);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = s.values[off + i];
    return v;
  };
  TimeSeriesDataset out;
  out.timestamps.resize(n);
  for (Index i = 0; i < n; ++i) out.timestamps[i] = lo + i * detail::kHour;
  out.load = slice(load);
  out.temperature = slice(temperature);
  out.humidity = slice(humidity);
  out.meta.building_id = building_id;
  out.meta.interval_seconds = detail::kHour;
  return out;
}

// Linearly interpolates missing runs of at most `max_gap_hours` per channel;
// longer runs and unbounded leading/trailing runs are left marked.
inline TimeSeriesDataset fill_gaps(const TimeSeriesDataset& ds,
                                   int max_gap_hours = 3) {
  TimeSeriesDataset out = ds;
  auto fill = [&](Vector& v) {
    Index n = v.size();
    Index i = 0;
    while (i < n) {
      if (!is_missing(v(i))) {
        ++i;
        continue;
      }
      Index j = i;
      while (j < n && is_missing(v(j))) ++j;
      if (i > 0 && j < n && j - i <= max_gap_hours) {
        double a = v(i - 1), b = v(j);
        Index len = j - (i - 1);
        for (Index t = i; t < j; ++t)
          v(t) = a + (b - a) * static_cast<double>(t - (i - 1)) /
                         static_cast<double>(len);
      }
      i = j;
    }
  };
  fill(out.load);
  fill(out.temperature);
  fill(out.humidity);
  return out;
}

// Splits on hours where any channel is still missing, returning maximal
// fully-observed contiguous segments. Feature windows are built per segment
// and therefore never straddle a gap.
inline std::vector<TimeSeriesDataset> segments(const TimeSeriesDataset& ds) {
  std::vector<TimeSeriesDataset> out;
  Index n = ds.size();
  Index i = 0;
  auto ok = [&](Index t) {
    return !is_missing(ds.load(t)) && !is_missing(ds.temperature(t)) &&
           !is_missing(ds.humidity(t));
  };
  while (i < n) {
    if (!ok(i)) {
      ++i;
      continue;
    }
    Index j = i;
    while (j < n && ok(j)) ++j;
    TimeSeriesDataset seg;
    seg.timestamps.assign(ds.timestamps.begin() + i, ds.timestamps.begin() + j);
    seg.load = ds.load.segment(i, j - i);
    seg.temperature = ds.temperature.segment(i, j - i);
    seg.humidity = ds.humidity.segment(i, j - i);
    seg.meta = ds.meta;
    out.push_back(std::move(seg));
    i = j;
  }
  return out;
}

}  // namespace rtl
