#pragma once

#include <utility>
#include <vector>

#include "rtl/timeseries.hpp"

namespace rtl {

enum class FeatureGranularity { hourly, daily };

struct DesignOptions {
  int window_days = 3;
  FeatureGranularity granularity = FeatureGranularity::hourly;
  int day_offset_hours = 0;  // shifts the day boundary away from midnight
};

// Column t stacks [load | temperature | humidity] over a trailing window of
// whole days, oldest hours first; the target is the total load of the day
// after the window. day_index holds that target day's absolute day number.
struct DesignMatrix {
  Matrix X;
  Vector l;
  std::vector<std::int64_t> day_index;

  Index d() const { return X.rows(); }
  Index n() const { return X.cols(); }
};

inline Index feature_dim(const DesignOptions& opt) {
  return opt.granularity == FeatureGranularity::hourly
             ? 3 * 24 * static_cast<Index>(opt.window_days)
             : 3 * static_cast<Index>(opt.window_days);
}

inline void validate(const DesignOptions& opt) {
  if (opt.window_days < 2 || opt.window_days > 7)
    throw ConfigError("window_days must be in [2,7]");
  if (opt.day_offset_hours < 0 || opt.day_offset_hours > 23)
    throw ConfigError("day_offset_hours must be in [0,23]");
}

inline DesignMatrix build_design_matrix(const TimeSeriesDataset& ds,
                                        const DesignOptions& opt) {
  validate(opt);
  if (ds.meta.interval_seconds != detail::kHour)
    throw DataError("build_design_matrix: dataset is not hourly (resample "
                    "first)");
  const Index n_hours = ds.size();
  if (n_hours == 0) throw DataError("build_design_matrix: empty dataset");
  for (Index i = 1; i < n_hours; ++i)
    if (ds.timestamps[i] - ds.timestamps[i - 1] != detail::kHour)
      throw DataError("build_design_matrix: timestamps not contiguous hourly");

  const std::int64_t off = static_cast<std::int64_t>(opt.day_offset_hours) *
                           detail::kHour;
  const std::int64_t t0 = ds.timestamps.front();
  const std::int64_t end = ds.timestamps.back() + detail::kHour;
  // first fully covered day and one past the last
  std::int64_t first_day = detail::floor_div(t0 - off + detail::kDay - 1,
                                             detail::kDay);
  std::int64_t end_day = detail::floor_div(end - off, detail::kDay);
  std::int64_t complete = end_day - first_day;
  const Index w = opt.window_days;
  if (complete < w + 1)
    throw DataError("build_design_matrix: need at least " +
                    std::to_string(w + 1) + " complete days, have " +
                    std::to_string(std::max<std::int64_t>(complete, 0)) +
                    " (days " + std::to_string(first_day) + ".." +
                    std::to_string(end_day - 1) + ")");

  auto hour_at = [&](std::int64_t day, Index h) {
    return static_cast<Index>((day * detail::kDay + off +
                               h * detail::kHour - t0) /
                              detail::kHour);
  };
  for (std::int64_t day = first_day; day < end_day; ++day)
    for (Index h = 0; h < 24; ++h) {
      Index i = hour_at(day, h);
      if (is_missing(ds.load(i)) || is_missing(ds.temperature(i)) ||
          is_missing(ds.humidity(i)))
        throw DataError("build_design_matrix: unfilled gap at day " +
                        std::to_string(day) + " hour " + std::to_string(h));
    }

  const bool hourly = opt.granularity == FeatureGranularity::hourly;
  const Index per = hourly ? 24 * w : w;
  const Index n = static_cast<Index>(complete) - w;
  DesignMatrix dm;
  dm.X.resize(3 * per, n);
  dm.l.resize(n);
  dm.day_index.resize(n);
  for (Index t = 0; t < n; ++t) {
    std::int64_t target_day = first_day + t + w;
    dm.day_index[t] = target_day;
    for (Index dwin = 0; dwin < w; ++dwin) {
      std::int64_t day = first_day + t + dwin;
      if (hourly) {
        for (Index h = 0; h < 24; ++h) {
          Index i = hour_at(day, h);
          Index col = dwin * 24 + h;
          dm.X(col, t) = ds.load(i);
          dm.X(per + col, t) = ds.temperature(i);
          dm.X(2 * per + col, t) = ds.humidity(i);
        }
      } else {
        double ls = 0, ts = 0, hs = 0;
        for (Index h = 0; h < 24; ++h) {
          Index i = hour_at(day, h);
          ls += ds.load(i);
          ts += ds.temperature(i);
          hs += ds.humidity(i);
        }
        dm.X(dwin, t) = ls;                 // daily total load
        dm.X(per + dwin, t) = ts / 24.0;    // daily mean temperature
        dm.X(2 * per + dwin, t) = hs / 24.0;
      }
    }
    double tot = 0;
    for (Index h = 0; h < 24; ++h) tot += ds.load(hour_at(target_day, h));
    dm.l(t) = tot;
  }
  return dm;
}

inline DesignMatrix take_columns(const DesignMatrix& dm, Index start,
                                 Index count) {
  DesignMatrix out;
  out.X = dm.X.middleCols(start, count);
  out.l = dm.l.segment(start, count);
  out.day_index.assign(dm.day_index.begin() + start,
                       dm.day_index.begin() + start + count);
  return out;
}

// Contiguous temporal halves, first ceil(n/2) columns training.
inline std::pair<DesignMatrix, DesignMatrix> split_half(const DesignMatrix& dm) {
  const Index n = dm.n();
  if (n < 2) throw DataError("split_half: need at least 2 columns");
  Index ntr = (n + 1) / 2;
  return {take_columns(dm, 0, ntr), take_columns(dm, ntr, n - ntr)};
}

inline DesignMatrix concat_designs(const std::vector<DesignMatrix>& parts) {
  if (parts.empty()) throw DataError("concat_designs: no parts");
  Index d = parts.front().d(), n = 0;
  for (const auto& p : parts) {
    require_dims(p.d() == d, "concat_designs: feature dimensions disagree");
    n += p.n();
  }
  DesignMatrix out;
  out.X.resize(d, n);
  out.l.resize(n);
  out.day_index.reserve(n);
  Index at = 0;
  for (const auto& p : parts) {
    out.X.middleCols(at, p.n()) = p.X;
    out.l.segment(at, p.n()) = p.l;
    out.day_index.insert(out.day_index.end(), p.day_index.begin(),
                         p.day_index.end());
    at += p.n();
  }
  return out;
}

inline std::int64_t complete_day_count(const TimeSeriesDataset& ds,
                                       const DesignOptions& opt) {
  if (ds.size() == 0) return 0;
  const std::int64_t off = static_cast<std::int64_t>(opt.day_offset_hours) *
                           detail::kHour;
  std::int64_t first_day = detail::floor_div(
      ds.timestamps.front() - off + detail::kDay - 1, detail::kDay);
  std::int64_t end_day = detail::floor_div(
      ds.timestamps.back() + detail::kHour - off, detail::kDay);
  return std::max<std::int64_t>(end_day - first_day, 0);
}

// Gap-fills, splits into fully observed segments, builds per-segment designs
// (so windows never straddle a gap) and concatenates them in time order.
inline DesignMatrix build_design_from_dataset(const TimeSeriesDataset& ds,
                                              const DesignOptions& opt,
                                              int max_gap_hours = 3) {
  validate(opt);
  TimeSeriesDataset filled = fill_gaps(ds, max_gap_hours);
  std::vector<DesignMatrix> parts;
  for (const TimeSeriesDataset& seg : segments(filled))
    if (complete_day_count(seg, opt) >= opt.window_days + 1)
      parts.push_back(build_design_matrix(seg, opt));
  if (parts.empty())
    throw DataError("build_design_from_dataset: no segment long enough for "
                    "window_days = " +
                    std::to_string(opt.window_days));
  return concat_designs(parts);
}

}  // namespace rtl
