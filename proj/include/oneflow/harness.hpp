#pragma once

// Shared experiment plumbing: coordinate naming, sample/dataset CSV IO,
// and a bounded worker pool (capped by ONEFLOW_THREADS).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oneflow/linalg.hpp"

namespace oneflow {

// theta_1..theta_dtheta, then y_1..y_dy
inline std::string coord_name(int index, int dtheta) {
  return index < dtheta ? "theta_" + std::to_string(index + 1)
                        : "y_" + std::to_string(index - dtheta + 1);
}

inline int coord_index(const std::string& name, int dtheta, int dy) {
  auto parse_tail = [](const std::string& s, std::size_t prefix_len) {
    const std::string tail = s.substr(prefix_len);
    if (tail.empty()) return -1;
    for (char c : tail) {
      if (c < '0' || c > '9') return -1;
    }
    return std::stoi(tail);
  };
  if (name.rfind("theta_", 0) == 0) {
    const int k = parse_tail(name, 6);
    if (k >= 1 && k <= dtheta) return k - 1;
  } else if (name.rfind("y_", 0) == 0) {
    const int k = parse_tail(name, 2);
    if (k >= 1 && k <= dy) return dtheta + k - 1;
  }
  throw std::invalid_argument("unknown coordinate name: " + name);
}

// Full-precision doubles so identical runs produce byte-identical files.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                             const Matrix& rows) {
  require(Eigen::Index(header.size()) == rows.cols(), "csv: header/column mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("csv: cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    os << (j ? "," : "") << header[j];
  }
  os << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      os << (j ? "," : "") << format_double(rows(i, j));
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("csv: write failed: " + path);
}

inline int worker_count() {
  if (const char* env = std::getenv("ONEFLOW_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

// Runs fn(i) for i in [0, n); each index must be independent. Determinism
// is the caller's job (per-index rng sub-streams).
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace oneflow
