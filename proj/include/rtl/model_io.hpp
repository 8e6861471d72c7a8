#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rtl/csv_io.hpp"
#include "rtl/pipeline.hpp"

namespace rtl {

enum class ModelKind { rtl, r2tl };

inline std::string to_string(ModelKind k) {
  return k == ModelKind::rtl ? "rtl" : "r2tl";
}

// Requested kind does not match the file; distinct type so callers can
// branch on it.
struct ModelKindError : IoError {
  using IoError::IoError;
};

namespace detail {

constexpr char kModelMagic[] = "RTLMODEL";
constexpr int kModelVersion = 1;

inline std::uint64_t fnv1a(const std::string& bytes, std::size_t len) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_double(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

// [u64 rows][u64 cols][doubles row-major little-endian]
inline void put_matrix(std::string& out, const Matrix& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_double(out, m(i, j));
}

inline void put_section(std::string& out, const std::string& name,
                        const std::string& payload) {
  put_u64(out, name.size());
  out += name;
  put_u64(out, payload.size());
  out += payload;
}

struct Cursor {
  const std::string& data;
  std::size_t at = 0;
  std::size_t end = 0;

  std::uint64_t u64() {
    if (at + 8 > end) throw IoError("model file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data[at + i]))
           << (8 * i);
    at += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    if (at + n > end) throw IoError("model file truncated");
    std::string s = data.substr(at, n);
    at += n;
    return s;
  }
};

inline Matrix get_matrix(Cursor& c) {
  Index rows = static_cast<Index>(c.u64());
  Index cols = static_cast<Index>(c.u64());
  if (rows < 0 || cols < 0 ||
      (rows > 0 && cols > static_cast<Index>(1) << 24))
    throw IoError("model file: implausible section dimensions");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = c.f64();
  return m;
}

inline std::string encode_matrix(const Matrix& m) {
  std::string s;
  put_matrix(s, m);
  return s;
}

inline std::string encode_doubles(const std::vector<double>& v) {
  std::string s;
  put_u64(s, v.size());
  for (double x : v) put_double(s, x);
  return s;
}

inline std::vector<double> decode_doubles(const std::string& payload) {
  Cursor c{payload, 0, payload.size()};
  std::size_t n = c.u64();
  if (payload.size() != 8 + 8 * n)
    throw IoError("model file: section length mismatch");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = c.f64();
  return out;
}

inline std::string encode_features(const DesignOptions& opt) {
  return encode_doubles(
      {static_cast<double>(opt.window_days),
       opt.granularity == FeatureGranularity::daily ? 1.0 : 0.0,
       static_cast<double>(opt.day_offset_hours)});
}

inline DesignOptions decode_features(const std::string& payload) {
  std::vector<double> v = decode_doubles(payload);
  if (v.size() != 3) throw IoError("model file: bad features section");
  DesignOptions opt;
  opt.window_days = static_cast<int>(v[0]);
  opt.granularity =
      v[1] != 0.0 ? FeatureGranularity::daily : FeatureGranularity::hourly;
  opt.day_offset_hours = static_cast<int>(v[2]);
  return opt;
}

inline std::string encode_norm(const Normalization& n) {
  std::string s;
  put_matrix(s, n.feature_mean);
  put_matrix(s, n.feature_std);
  put_double(s, n.target_mean);
  put_double(s, n.target_std);
  return s;
}

inline Normalization decode_norm(const std::string& payload) {
  Cursor c{payload, 0, payload.size()};
  Normalization n;
  n.feature_mean = get_matrix(c);
  n.feature_std = get_matrix(c);
  n.target_mean = c.f64();
  n.target_std = c.f64();
  return n;
}

inline void write_model_file(const std::string& path, ModelKind kind,
                             Index input_dim, Index k,
                             const std::map<std::string, std::string>& secs) {
  std::string out = std::string(kModelMagic) + " v" +
                    std::to_string(kModelVersion) + "\nkind " +
                    to_string(kind) + "\ndims " + std::to_string(input_dim) +
                    " " + std::to_string(k) + "\n---\n";
  for (const auto& [name, payload] : secs) put_section(out, name, payload);
  char trailer[32];
  std::snprintf(trailer, sizeof trailer, "CHECKSUM %016llx\n",
                static_cast<unsigned long long>(fnv1a(out, out.size())));
  out += trailer;
  atomic_write_file(path, out);
}

struct ParsedModelFile {
  ModelKind kind = ModelKind::rtl;
  Index input_dim = 0;
  Index k = 0;
  std::map<std::string, std::string> sections;

  const std::string& need(const std::string& name) const {
    auto it = sections.find(name);
    if (it == sections.end())
      throw IoError("model file: missing section '" + name + "'");
    return it->second;
  }
};

inline ParsedModelFile parse_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string data = buf.str();

  const std::string trailer_tag = "CHECKSUM ";
  if (data.size() < 26 || data.back() != '\n')
    throw IoError("'" + path + "': model file truncated");
  std::size_t tpos = data.rfind(trailer_tag);
  if (tpos == std::string::npos || data.size() - tpos != 26)
    throw IoError("'" + path + "': model file truncated (no checksum "
                  "trailer)");
  std::uint64_t stored =
      std::strtoull(data.c_str() + tpos + trailer_tag.size(), nullptr, 16);
  if (fnv1a(data, tpos) != stored)
    throw IoError("'" + path + "': checksum mismatch (corrupt model file)");

  std::istringstream header(data.substr(0, std::min<std::size_t>(tpos, 256)));
  std::string magic, version, word;
  header >> magic >> version;
  if (magic != kModelMagic)
    throw IoError("'" + path + "' is not a model file");
  if (version != "v" + std::to_string(kModelVersion))
    throw IoError("'" + path + "': unsupported model format " + version +
                  "; this build reads v" + std::to_string(kModelVersion) +
                  " — re-save the model with a matching tool version");
  ParsedModelFile parsed;
  std::string kind_word;
  header >> word >> kind_word;
  if (word != "kind" || (kind_word != "rtl" && kind_word != "r2tl"))
    throw IoError("'" + path + "': malformed kind line");
  parsed.kind = kind_word == "rtl" ? ModelKind::rtl : ModelKind::r2tl;
  long long dd = 0, kk = 0;
  header >> word >> dd >> kk;
  if (word != "dims") throw IoError("'" + path + "': malformed dims line");
  parsed.input_dim = dd;
  parsed.k = kk;

  std::size_t at = data.find("\n---\n");
  if (at == std::string::npos || at >= tpos)
    throw IoError("'" + path + "': malformed model header");
  Cursor c{data, at + 5, tpos};
  while (c.at < c.end) {
    std::size_t nlen = c.u64();
    if (nlen > 64) throw IoError("'" + path + "': malformed section name");
    std::string name = c.bytes(nlen);
    std::size_t plen = c.u64();
    parsed.sections[name] = c.bytes(plen);
  }
  return parsed;
}

}  // namespace detail

inline void save_model(const std::string& path, const R2tlForecaster& fc) {
  const R2tlModel& m = fc.model;
  std::map<std::string, std::string> secs;
  secs["transform"] = detail::encode_matrix(m.transform.matrix);
  secs["weights"] = detail::encode_matrix(m.weights);
  secs["z0"] = detail::encode_matrix(m.z0);
  secs["zfinal"] = detail::encode_matrix(m.z_final);
  secs["norm"] = detail::encode_norm(m.normalization);
  secs["config"] = detail::encode_doubles(
      {static_cast<double>(m.config.k), m.config.lambda, m.config.mu,
       m.config.gamma, m.config.epsilon,
       static_cast<double>(m.config.max_iters), m.config.rel_tol,
       m.z0_policy == Z0Policy::carry ? 1.0 : 0.0});
  secs["features"] = detail::encode_features(fc.features);
  secs["trace"] = detail::encode_doubles(m.objective_trace);
  detail::write_model_file(path, ModelKind::r2tl, m.input_dim,
                           m.transform.k(), secs);
}

inline void save_model(const std::string& path, const RtlForecaster& fc) {
  const RtlModel& m = fc.core;
  std::map<std::string, std::string> secs;
  secs["transform"] = detail::encode_matrix(m.transform.matrix);
  secs["weights"] = detail::encode_matrix(fc.weights);
  secs["z0"] = detail::encode_matrix(m.z0);
  secs["zfinal"] = detail::encode_matrix(m.z_final);
  secs["norm"] = detail::encode_norm(fc.normalization);
  secs["config"] = detail::encode_doubles(
      {static_cast<double>(m.config.k), m.config.lambda, m.config.epsilon,
       static_cast<double>(m.config.max_iters), m.config.rel_tol, fc.mu,
       fc.gamma, fc.z0_policy == Z0Policy::carry ? 1.0 : 0.0});
  secs["features"] = detail::encode_features(fc.features);
  secs["trace"] = detail::encode_doubles(m.objective_trace);
  detail::write_model_file(path, ModelKind::rtl, m.input_dim,
                           m.transform.k(), secs);
}

struct LoadedForecaster {
  ModelKind kind = ModelKind::rtl;
  RtlForecaster rtl;
  R2tlForecaster r2tl;
};

inline LoadedForecaster load_model(const std::string& path) {
  detail::ParsedModelFile f = detail::parse_model_file(path);
  LoadedForecaster out;
  out.kind = f.kind;
  auto mat = [&](const char* name) {
    detail::Cursor c{f.need(name), 0, f.need(name).size()};
    return detail::get_matrix(c);
  };
  if (f.kind == ModelKind::r2tl) {
    R2tlForecaster fc;
    R2tlModel& m = fc.model;
    m.transform = {mat("transform")};
    m.weights = mat("weights");
    m.z0 = mat("z0");
    m.z_final = mat("zfinal");
    m.normalization = detail::decode_norm(f.need("norm"));
    std::vector<double> cfg = detail::decode_doubles(f.need("config"));
    if (cfg.size() != 8) throw IoError("model file: bad config section");
    m.config.k = static_cast<int>(cfg[0]);
    m.config.lambda = cfg[1];
    m.config.mu = cfg[2];
    m.config.gamma = cfg[3];
    m.config.epsilon = cfg[4];
    m.config.max_iters = static_cast<int>(cfg[5]);
    m.config.rel_tol = cfg[6];
    m.z0_policy = cfg[7] != 0.0 ? Z0Policy::carry : Z0Policy::zero;
    m.input_dim = f.input_dim;
    m.objective_trace = detail::decode_doubles(f.need("trace"));
    fc.features = detail::decode_features(f.need("features"));
    if (m.transform.k() != f.k || m.transform.m() != f.input_dim + f.k)
      throw IoError("model file: dims line vs transform section disagree");
    out.r2tl = std::move(fc);
  } else {
    RtlForecaster fc;
    RtlModel& m = fc.core;
    m.transform = {mat("transform")};
    fc.weights = mat("weights");
    m.z0 = mat("z0");
    m.z_final = mat("zfinal");
    fc.normalization = detail::decode_norm(f.need("norm"));
    std::vector<double> cfg = detail::decode_doubles(f.need("config"));
    if (cfg.size() != 8) throw IoError("model file: bad config section");
    m.config.k = static_cast<int>(cfg[0]);
    m.config.lambda = cfg[1];
    m.config.epsilon = cfg[2];
    m.config.max_iters = static_cast<int>(cfg[3]);
    m.config.rel_tol = cfg[4];
    fc.mu = cfg[5];
    fc.gamma = cfg[6];
    fc.z0_policy = cfg[7] != 0.0 ? Z0Policy::carry : Z0Policy::zero;
    m.input_dim = f.input_dim;
    m.objective_trace = detail::decode_doubles(f.need("trace"));
    fc.features = detail::decode_features(f.need("features"));
    if (m.transform.k() != f.k || m.transform.m() != f.input_dim + f.k)
      throw IoError("model file: dims line vs transform section disagree");
    out.rtl = std::move(fc);
  }
  return out;
}

inline R2tlForecaster load_r2tl_model(const std::string& path) {
  LoadedForecaster lf = load_model(path);
  if (lf.kind != ModelKind::r2tl)
    throw ModelKindError("'" + path + "' holds a model of kind '" +
                         to_string(lf.kind) + "', expected 'r2tl'");
  return std::move(lf.r2tl);
}

inline RtlForecaster load_rtl_model(const std::string& path) {
  LoadedForecaster lf = load_model(path);
  if (lf.kind != ModelKind::rtl)
    throw ModelKindError("'" + path + "' holds a model of kind '" +
                         to_string(lf.kind) + "', expected 'rtl'");
  return std::move(lf.rtl);
}

}  // namespace rtl
