#pragma once

// Checkpoint: model weights (raw + EMA), standardization statistics, task
// metadata and training provenance. Binary format: "OFSB" magic, u32
// version, then little-endian scalars/strings and a flat tensor manifest
// (name, rows, cols) followed by f64 payloads.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "oneflow/vfnet.hpp"

namespace oneflow {

struct Standardizer {
  Vector mean;
  Vector std;  // clamped from below at 1e-8

  Vector apply(const Vector& x) const {
    require(x.size() == mean.size(), "standardizer: length mismatch");
    return (x - mean).cwiseQuotient(std);
  }
  Vector invert(const Vector& x) const {
    require(x.size() == mean.size(), "standardizer: length mismatch");
    return x.cwiseProduct(std) + mean;
  }
  Matrix apply_rows(const Matrix& x) const {
    require(x.cols() == mean.size(), "standardizer: column mismatch");
    return ((x.rowwise() - mean.transpose()).array().rowwise() /
            std.transpose().array()).matrix();
  }
  Matrix invert_rows(const Matrix& x) const {
    require(x.cols() == mean.size(), "standardizer: column mismatch");
    return ((x.array().rowwise() * std.transpose().array()).matrix().rowwise() +
            mean.transpose());
  }
};

struct Checkpoint {
  std::string task_name;
  int dtheta = 0;
  int dy = 0;
  NetConfig net;
  Standardizer standardizer;
  VfLayout layout;
  ParamSet raw;
  ParamSet ema;
  std::uint64_t config_hash = 0;
  double best_val_loss = 0.0;
  std::int64_t iterations = 0;

  VectorFieldParams raw_field() const { return VectorFieldParams{net, raw, layout}; }
  VectorFieldParams ema_field() const { return VectorFieldParams{net, ema, layout}; }
};

namespace detail {

constexpr char kMagic[4] = {'O', 'F', 'S', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

inline void write_params(std::ostream& os, const ParamSet& p) {
  write_pod<std::uint32_t>(os, std::uint32_t(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    write_string(os, p.names[i]);
    write_pod<std::int64_t>(os, p[i].rows());
    write_pod<std::int64_t>(os, p[i].cols());
    os.write(reinterpret_cast<const char*>(p[i].data()),
             std::streamsize(sizeof(double) * std::size_t(p[i].size())));
  }
}

inline ParamSet read_params(std::istream& is) {
  ParamSet p;
  const auto count = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    const auto rows = read_pod<std::int64_t>(is);
    const auto cols = read_pod<std::int64_t>(is);
    p.add(name, rows, cols);
    is.read(reinterpret_cast<char*>(p.tensors.back().data()),
            std::streamsize(sizeof(double) * std::size_t(rows * cols)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor payload");
  }
  return p;
}

inline void write_vector(std::ostream& os, const Vector& v) {
  write_pod<std::int64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           std::streamsize(sizeof(double) * std::size_t(v.size())));
}

inline Vector read_vector(std::istream& is) {
  const auto n = read_pod<std::int64_t>(is);
  Vector v(n);
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(sizeof(double) * std::size_t(n)));
  if (!is) throw std::runtime_error("checkpoint: truncated vector");
  return v;
}

}  // namespace detail

// Rebuild tensor indices from the canonical layout order.
inline VfLayout derive_layout(const NetConfig& cfg) {
  VfLayout ly;
  std::size_t idx = 0;
  ly.w_in = idx++;
  ly.b_in = idx++;
  for (int l = 0; l < cfg.blocks; ++l) {
    VfLayout::Block b;
    b.ln_gain = idx++;
    b.ln_bias = idx++;
    b.ada_w = idx++;
    b.ada_b = idx++;
    b.w1 = idx++;
    b.b1 = idx++;
    b.w2 = idx++;
    b.b2 = idx++;
    ly.blocks.push_back(b);
  }
  ly.w_out = idx++;
  ly.b_out = idx++;
  return ly;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(detail::kMagic, 4);
  detail::write_pod<std::uint32_t>(os, detail::kVersion);
  detail::write_string(os, c.task_name);
  detail::write_pod<std::int32_t>(os, c.dtheta);
  detail::write_pod<std::int32_t>(os, c.dy);
  detail::write_pod<std::int32_t>(os, c.net.d);
  detail::write_pod<std::int32_t>(os, c.net.hidden);
  detail::write_pod<std::int32_t>(os, c.net.blocks);
  detail::write_pod<std::int32_t>(os, c.net.time_embed_dim);
  detail::write_pod<std::int32_t>(os, c.net.ff_mult);
  detail::write_vector(os, c.standardizer.mean);
  detail::write_vector(os, c.standardizer.std);
  detail::write_params(os, c.raw);
  detail::write_params(os, c.ema);
  detail::write_pod<std::uint64_t>(os, c.config_hash);
  detail::write_pod<double>(os, c.best_val_loss);
  detail::write_pod<std::int64_t>(os, c.iterations);
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, detail::kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic, not an OFSB file");
  }
  const auto version = detail::read_pod<std::uint32_t>(is);
  if (version != detail::kVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  Checkpoint c;
  c.task_name = detail::read_string(is);
  c.dtheta = detail::read_pod<std::int32_t>(is);
  c.dy = detail::read_pod<std::int32_t>(is);
  c.net.d = detail::read_pod<std::int32_t>(is);
  c.net.hidden = detail::read_pod<std::int32_t>(is);
  c.net.blocks = detail::read_pod<std::int32_t>(is);
  c.net.time_embed_dim = detail::read_pod<std::int32_t>(is);
  c.net.ff_mult = detail::read_pod<std::int32_t>(is);
  c.standardizer.mean = detail::read_vector(is);
  c.standardizer.std = detail::read_vector(is);
  c.raw = detail::read_params(is);
  c.ema = detail::read_params(is);
  c.config_hash = detail::read_pod<std::uint64_t>(is);
  c.best_val_loss = detail::read_pod<double>(is);
  c.iterations = detail::read_pod<std::int64_t>(is);
  c.layout = derive_layout(c.net);
  return c;
}

}  // namespace oneflow
