#pragma once

// Time-conditioned vector field v_t(z_t, m): sinusoidal time embedding,
// AdaLN residual MLP blocks, batched forward pass and exact reverse-mode
// backward pass. Batches are row-major (rows = samples).

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "oneflow/linalg.hpp"

namespace oneflow {

struct NetConfig {
  int d = 0;               // joint dimension dtheta + dy
  int hidden = 64;         // width H
  int blocks = 2;          // depth L
  int time_embed_dim = 128;
  int ff_mult = 2;

  void validate() const {
    if (d < 1 || hidden < 1 || blocks < 1 || time_embed_dim < 1 || ff_mult < 1) {
      throw std::invalid_argument("net config: dimensions must be >= 1");
    }
    if (time_embed_dim % 2 != 0) {
      throw std::invalid_argument("net config: time_embed_dim must be even");
    }
  }
};

// Named tensors sharing one logical parameter vector. Order is fixed, so
// elementwise traversal is deterministic.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Matrix> tensors;

  void add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    names.push_back(name);
    tensors.push_back(Matrix::Zero(rows, cols));
  }

  Matrix& operator[](std::size_t i) { return tensors[i]; }
  const Matrix& operator[](std::size_t i) const { return tensors[i]; }
  std::size_t size() const { return tensors.size(); }

  Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    out.names = names;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back(Matrix::Zero(t.rows(), t.cols()));
    return out;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& t : tensors) s += t.squaredNorm();
    return s;
  }

  void scale(double c) {
    for (auto& t : tensors) t *= c;
  }

  void add_scaled(const ParamSet& other, double c) {
    require(other.size() == size(), "param set: tensor counts differ");
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i] += c * other.tensors[i];
  }
};

// Per-block tensor indices within the flat ParamSet layout.
struct VfLayout {
  // global
  std::size_t w_in, b_in, w_out, b_out;
  // per block, indexed [block][slot]
  struct Block {
    std::size_t ln_gain, ln_bias, ada_w, ada_b, w1, b1, w2, b2;
  };
  std::vector<Block> blocks;
};

struct VectorFieldParams {
  NetConfig cfg;
  ParamSet params;
  VfLayout layout;
};

// sin/cos ladder on raw t with transformer frequencies 10000^(-2k/dim).
inline Vector time_embedding(double t, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("time_embedding: dim must be even and >= 2");
  }
  Vector e(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double omega = std::pow(10000.0, -2.0 * double(k) / double(dim));
    e[2 * k] = std::sin(t * omega);
    e[2 * k + 1] = std::cos(t * omega);
  }
  return e;
}

inline Matrix time_embedding_batch(const Vector& t, int dim) {
  Matrix e(t.size(), dim);
  for (Eigen::Index i = 0; i < t.size(); ++i) e.row(i) = time_embedding(t[i], dim);
  return e;
}

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

constexpr double kLnEps = 1e-5;

}  // namespace detail

inline VectorFieldParams make_vector_field(const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  VectorFieldParams vf;
  vf.cfg = cfg;
  ParamSet& p = vf.params;
  VfLayout& ly = vf.layout;
  const int d = cfg.d, h = cfg.hidden, te = cfg.time_embed_dim;
  const int ff = cfg.ff_mult * h;

  auto add_uniform = [&](const std::string& name, int rows, int cols) {
    p.add(name, rows, cols);
    const double bound = std::sqrt(1.0 / double(rows));
    Matrix& t = p.tensors.back();
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = rng.uniform(-bound, bound);
    }
    return p.size() - 1;
  };
  auto add_zero = [&](const std::string& name, int rows, int cols) {
    p.add(name, rows, cols);
    return p.size() - 1;
  };

  ly.w_in = add_uniform("w_in", 2 * d, h);
  ly.b_in = add_zero("b_in", 1, h);
  for (int l = 0; l < cfg.blocks; ++l) {
    const std::string pre = "block" + std::to_string(l) + ".";
    VfLayout::Block b;
    b.ln_gain = add_zero(pre + "ln_gain", 1, h);
    p.tensors[b.ln_gain].setOnes();
    b.ln_bias = add_zero(pre + "ln_bias", 1, h);
    // Zero AdaLN head: forward is exactly zero at init together with w_out.
    b.ada_w = add_zero(pre + "ada_w", te, 2 * h);
    b.ada_b = add_zero(pre + "ada_b", 1, 2 * h);
    b.w1 = add_uniform(pre + "mlp_w1", h, ff);
    b.b1 = add_zero(pre + "mlp_b1", 1, ff);
    b.w2 = add_uniform(pre + "mlp_w2", ff, h);
    b.b2 = add_zero(pre + "mlp_b2", 1, h);
    ly.blocks.push_back(b);
  }
  ly.w_out = add_zero("w_out", h, d);
  ly.b_out = add_zero("b_out", 1, d);
  return vf;
}

// Intermediate activations kept for the backward pass.
struct ForwardTrace {
  Matrix x;   // [z_t ; m], B x 2d
  Matrix te;  // B x time_embed_dim
  struct BlockTrace {
    Matrix h_in;   // B x H, block input
    Matrix xhat;   // B x H, normalized
    Vector inv;    // B, 1/sqrt(var + eps)
    Matrix gamma;  // B x H
    Matrix mod;    // B x H, MLP input
    Matrix a1;     // B x FF, pre-activation
    Matrix g1;     // B x FF
  };
  std::vector<BlockTrace> blocks;
  Matrix h_last;  // B x H
};

inline Matrix vf_forward(const VectorFieldParams& vf, const Matrix& z_t, const Matrix& m,
                         const Vector& t, ForwardTrace* trace = nullptr) {
  const NetConfig& c = vf.cfg;
  const Eigen::Index batch = z_t.rows();
  require(z_t.cols() == c.d && m.rows() == batch && m.cols() == c.d && t.size() == batch,
          "vf_forward: shape mismatch");
  const ParamSet& p = vf.params;
  const VfLayout& ly = vf.layout;
  const int h = c.hidden;

  Matrix x(batch, 2 * c.d);
  x.leftCols(c.d) = z_t;
  x.rightCols(c.d) = m;
  Matrix te = time_embedding_batch(t, c.time_embed_dim);
  Matrix hcur = (x * p[ly.w_in]).rowwise() + p[ly.b_in].row(0);

  if (trace) {
    trace->x = x;
    trace->te = te;
    trace->blocks.resize(c.blocks);
  }

  for (int l = 0; l < c.blocks; ++l) {
    const auto& b = ly.blocks[l];
    // LayerNorm over the hidden axis, per row.
    const Vector mu = hcur.rowwise().mean();
    Matrix xc = hcur.colwise() - mu;
    Vector inv = (xc.array().square().rowwise().mean() + detail::kLnEps)
                     .sqrt().inverse().matrix();
    Matrix xhat = xc.array().colwise() * inv.array();
    Matrix ln = (xhat.array().rowwise() * p[b.ln_gain].row(0).array()).matrix();
    ln.rowwise() += p[b.ln_bias].row(0);

    Matrix gb = (te * p[b.ada_w]).rowwise() + p[b.ada_b].row(0);
    const auto gamma = gb.leftCols(h);
    const auto beta = gb.rightCols(h);
    Matrix mod = ((gamma.array() + 1.0) * ln.array()).matrix() + beta;

    Matrix a1 = (mod * p[b.w1]).rowwise() + p[b.b1].row(0);
    Matrix g1 = a1.unaryExpr([](double v) { return detail::gelu(v); });
    Matrix a2 = (g1 * p[b.w2]).rowwise() + p[b.b2].row(0);

    if (trace) {
      auto& bt = trace->blocks[l];
      bt.h_in = hcur;
      bt.xhat = xhat;
      bt.inv = inv;
      bt.gamma = gamma;
      bt.mod = mod;
      bt.a1 = std::move(a1);
      bt.g1 = g1;
    }
    hcur += a2;
  }
  if (trace) trace->h_last = hcur;
  return (hcur * p[ly.w_out]).rowwise() + p[ly.b_out].row(0);
}

// Exact gradients of sum_ij upstream_ij * v_ij w.r.t. every parameter.
inline ParamSet vf_backward(const VectorFieldParams& vf, const ForwardTrace& trace,
                            const Matrix& upstream) {
  const NetConfig& c = vf.cfg;
  const ParamSet& p = vf.params;
  const VfLayout& ly = vf.layout;
  const int h = c.hidden;
  require(upstream.rows() == trace.h_last.rows() && upstream.cols() == c.d,
          "vf_backward: upstream shape mismatch");

  ParamSet g = p.zeros_like();
  g[ly.w_out] = trace.h_last.transpose() * upstream;
  g[ly.b_out] = upstream.colwise().sum();
  Matrix dh = upstream * p[ly.w_out].transpose();  // B x H

  for (int l = c.blocks - 1; l >= 0; --l) {
    const auto& b = ly.blocks[l];
    const auto& bt = trace.blocks[l];

    // Residual: dh flows to both the branch output and the block input.
    Matrix da2 = dh;
    g[b.w2] += bt.g1.transpose() * da2;
    g[b.b2] += da2.colwise().sum();
    Matrix dg1 = da2 * p[b.w2].transpose();
    Matrix da1 = (dg1.array() *
                  bt.a1.unaryExpr([](double v) { return detail::gelu_grad(v); }).array())
                     .matrix();
    g[b.w1] += bt.mod.transpose() * da1;
    g[b.b1] += da1.colwise().sum();
    Matrix dmod = da1 * p[b.w1].transpose();

    // mod = (1 + gamma) .* ln + beta
    Matrix lnv = (bt.xhat.array().rowwise() * p[b.ln_gain].row(0).array()).matrix();
    lnv.rowwise() += p[b.ln_bias].row(0);
    Matrix dgamma = (dmod.array() * lnv.array()).matrix();
    Matrix dbeta = dmod;
    Matrix dln = (dmod.array() * (bt.gamma.array() + 1.0)).matrix();

    Matrix dgb(dh.rows(), 2 * h);
    dgb.leftCols(h) = dgamma;
    dgb.rightCols(h) = dbeta;
    g[b.ada_w] += trace.te.transpose() * dgb;
    g[b.ada_b] += dgb.colwise().sum();

    g[b.ln_gain] += (dln.array() * bt.xhat.array()).matrix().colwise().sum();
    g[b.ln_bias] += dln.colwise().sum();
    Matrix dxhat = (dln.array().rowwise() * p[b.ln_gain].row(0).array()).matrix();

    // LayerNorm input gradient:
    // dx = inv .* (dxhat - mean(dxhat) - xhat .* mean(dxhat .* xhat)), means over H.
    Vector mean_dxhat = dxhat.rowwise().mean();
    Vector mean_dxhat_xhat = (dxhat.array() * bt.xhat.array()).rowwise().mean();
    Matrix dx = dxhat;
    dx.colwise() -= mean_dxhat;
    dx -= (bt.xhat.array().colwise() * mean_dxhat_xhat.array()).matrix();
    dx = (dx.array().colwise() * bt.inv.array()).matrix();

    dh += dx;  // residual path plus normalized path
  }

  g[ly.w_in] = trace.x.transpose() * dh;
  g[ly.b_in] = dh.colwise().sum();
  return g;
}

}  // namespace oneflow
