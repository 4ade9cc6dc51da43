#pragma once

// Binary masks over the joint [theta; y] state. Convention project-wide:
// 1 = observed/clamped coordinate, 0 = generated/transported coordinate.

#include <stdexcept>
#include <string>
#include <vector>

#include "oneflow/rng.hpp"

namespace oneflow {

struct Mask {
  std::vector<int> bits;  // each entry 0 or 1
  int dtheta = 0;
  int dy = 0;

  int size() const { return int(bits.size()); }

  int complement_count() const {
    int c = 0;
    for (int b : bits) c += (b == 0);
    return c;
  }

  bool all_ones() const { return complement_count() == 0; }

  std::string to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (int b : bits) s.push_back(b ? '1' : '0');
    return s;
  }
};

inline Mask make_mask(int dtheta, int dy, const std::vector<int>& bits) {
  if (int(bits.size()) != dtheta + dy) {
    throw std::invalid_argument("mask: length must equal dtheta + dy");
  }
  for (int b : bits) {
    if (b != 0 && b != 1) throw std::invalid_argument("mask: bits must be 0/1");
  }
  return Mask{bits, dtheta, dy};
}

inline Mask mask_from_string(const std::string& s, int dtheta, int dy) {
  std::vector<int> bits;
  bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') {
      throw std::invalid_argument("mask string: characters must be 0/1");
    }
    bits.push_back(c - '0');
  }
  return make_mask(dtheta, dy, bits);
}

enum class QueryKind { Posterior, Likelihood, Joint, Mixed };

// Canonical block masks. Mixed: 0 on generate-set A, 1 on condition-set B,
// 0 on everything else (generated then discarded).
inline Mask canonical_mask(QueryKind kind, int dtheta, int dy,
                           const std::vector<int>& gen_set = {},
                           const std::vector<int>& cond_set = {}) {
  if (dtheta < 1 || dy < 1) {
    throw std::invalid_argument("canonical_mask: dims must be >= 1");
  }
  const int d = dtheta + dy;
  std::vector<int> bits(d, 0);
  switch (kind) {
    case QueryKind::Posterior:
      for (int i = dtheta; i < d; ++i) bits[i] = 1;
      break;
    case QueryKind::Likelihood:
      for (int i = 0; i < dtheta; ++i) bits[i] = 1;
      break;
    case QueryKind::Joint:
      break;
    case QueryKind::Mixed: {
      std::vector<int> tag(d, -1);
      for (int i : gen_set) {
        if (i < 0 || i >= d) throw std::invalid_argument("mixed mask: index out of range");
        tag[i] = 0;
      }
      for (int i : cond_set) {
        if (i < 0 || i >= d) throw std::invalid_argument("mixed mask: index out of range");
        if (tag[i] == 0) throw std::invalid_argument("mixed mask: A and B overlap");
        tag[i] = 1;
        bits[i] = 1;
      }
      break;
    }
  }
  return Mask{bits, dtheta, dy};
}

struct MaskMixtureConfig {
  double alpha = 0.15;       // posterior-mask weight
  double beta = 0.15;        // likelihood-mask weight
  double beta_shape_a = 0.5; // partial-branch Beta hyperprior
  double beta_shape_b = 0.5;

  void validate() const {
    if (alpha < 0.0 || beta < 0.0 || alpha + beta > 1.0) {
      throw std::invalid_argument("mask mixture: need alpha, beta >= 0 and alpha + beta <= 1");
    }
    if (beta_shape_a <= 0.0 || beta_shape_b <= 0.0) {
      throw std::invalid_argument("mask mixture: Beta shapes must be > 0");
    }
  }
};

// Training-time mask draw: posterior mask w.p. alpha, likelihood mask w.p.
// beta, otherwise hierarchical Beta-Bernoulli bits. All-ones partial draws
// are resampled so the 1/|m^c| normalizer stays defined.
inline Mask sample_mask(Rng& rng, const MaskMixtureConfig& cfg, int dtheta, int dy) {
  cfg.validate();
  const double u = rng.uniform();
  if (u < cfg.alpha) return canonical_mask(QueryKind::Posterior, dtheta, dy);
  if (u < cfg.alpha + cfg.beta) return canonical_mask(QueryKind::Likelihood, dtheta, dy);
  const int d = dtheta + dy;
  std::vector<int> bits(d);
  for (;;) {
    const double pi_theta = rng.beta(cfg.beta_shape_a, cfg.beta_shape_b);
    const double pi_y = rng.beta(cfg.beta_shape_a, cfg.beta_shape_b);
    int ones = 0;
    for (int i = 0; i < d; ++i) {
      bits[i] = rng.bernoulli(i < dtheta ? pi_theta : pi_y);
      ones += bits[i];
    }
    if (ones < d) break;
  }
  return Mask{bits, dtheta, dy};
}

}  // namespace oneflow
