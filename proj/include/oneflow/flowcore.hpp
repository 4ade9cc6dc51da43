#pragma once

// Flow-matching core: masked linear interpolant, constant target velocity,
// time sampling, and the weighted masked regression loss with exact
// gradients through the vector field.

#include <stdexcept>
#include <vector>

#include "oneflow/masking.hpp"
#include "oneflow/vfnet.hpp"

namespace oneflow {

enum class TimeSchedule { Uniform, Ushaped };

struct LossConfig {
  double lambda_theta = 1.0;  // weight on theta coordinates, default dy/dtheta
  TimeSchedule time_schedule = TimeSchedule::Uniform;

  void validate() const {
    if (!(lambda_theta > 0.0)) {
      throw std::invalid_argument("loss config: lambda_theta must be > 0");
    }
  }
};

// z_t = m .* z1 + (1 - m) .* (t z1 + (1 - t) z0)
inline Vector interpolate(const Vector& z0, const Vector& z1, const Mask& m, double t) {
  require(z0.size() == z1.size() && int(z0.size()) == m.size(),
          "interpolate: length mismatch");
  require(t >= 0.0 && t <= 1.0, "interpolate: t must be in [0, 1]");
  Vector out(z0.size());
  for (Eigen::Index i = 0; i < z0.size(); ++i) {
    out[i] = m.bits[i] ? z1[i] : t * z1[i] + (1.0 - t) * z0[i];
  }
  return out;
}

// v = (1 - m) .* (z1 - z0)
inline Vector target_velocity(const Vector& z0, const Vector& z1, const Mask& m) {
  require(z0.size() == z1.size() && int(z0.size()) == m.size(),
          "target_velocity: length mismatch");
  Vector out(z0.size());
  for (Eigen::Index i = 0; i < z0.size(); ++i) {
    out[i] = m.bits[i] ? 0.0 : z1[i] - z0[i];
  }
  return out;
}

inline double sample_time(Rng& rng, TimeSchedule schedule) {
  switch (schedule) {
    case TimeSchedule::Uniform:
      return rng.uniform();
    case TimeSchedule::Ushaped:
      return rng.beta(0.5, 0.5);  // arcsine law
  }
  throw std::invalid_argument("sample_time: unknown schedule");
}

struct PathSample {
  Vector z0;
  Vector z1;
  double t = 0.0;
  Mask m;
  Vector z_t;
  Vector v_target;
};

// Base draw: standard normal on generated coordinates, zeros on observed.
inline PathSample make_path_sample(Rng& rng, const Vector& z1, const Mask& m, double t) {
  require(int(z1.size()) == m.size(), "path sample: length mismatch");
  PathSample s;
  s.z1 = z1;
  s.m = m;
  s.t = t;
  s.z0 = Vector::Zero(z1.size());
  for (Eigen::Index i = 0; i < z1.size(); ++i) {
    if (!m.bits[i]) s.z0[i] = rng.normal();
  }
  s.z_t = interpolate(s.z0, z1, m, t);
  s.v_target = target_velocity(s.z0, z1, m);
  return s;
}

// Per-coordinate loss weights: lambda_theta on the theta block, 1 on y.
inline Vector loss_weights(int dtheta, int dy, double lambda_theta) {
  Vector w(dtheta + dy);
  for (int i = 0; i < dtheta + dy; ++i) w[i] = i < dtheta ? lambda_theta : 1.0;
  return w;
}

struct LossResult {
  double loss = 0.0;
  ParamSet grads;
};

// Mean over the batch of (1/|m^c|) sum_i w_i (m^c_i)^2 (v_i - v*_i)^2,
// with exact gradients w.r.t. every field parameter. Observed coordinates
// contribute zero loss and zero gradient.
inline LossResult loss_batch(const VectorFieldParams& field,
                             const std::vector<PathSample>& batch,
                             const LossConfig& cfg) {
  cfg.validate();
  require(!batch.empty(), "loss_batch: empty batch");
  const int d = field.cfg.d;
  const Eigen::Index n = Eigen::Index(batch.size());
  Matrix zt(n, d), mm(n, d), vt(n, d);
  Vector tvec(n), inv_mc(n);
  const Vector w = loss_weights(batch[0].m.dtheta, batch[0].m.dy, cfg.lambda_theta);
  for (Eigen::Index r = 0; r < n; ++r) {
    const PathSample& s = batch[r];
    require(int(s.z_t.size()) == d, "loss_batch: sample dimension mismatch");
    const int mc = s.m.complement_count();
    if (mc == 0) throw std::invalid_argument("loss_batch: sample with all-ones mask");
    zt.row(r) = s.z_t;
    vt.row(r) = s.v_target;
    for (int j = 0; j < d; ++j) mm(r, j) = double(s.m.bits[j]);
    tvec[r] = s.t;
    inv_mc[r] = 1.0 / double(mc);
  }

  ForwardTrace trace;
  Matrix v = vf_forward(field, zt, mm, tvec, &trace);
  Matrix mc = (1.0 - mm.array()).matrix();
  Matrix resid = ((v - vt).array() * mc.array()).matrix();
  // weighted squared residual, normalized per sample by |m^c|, mean over batch
  Matrix wsq = (resid.array().square().rowwise() * w.transpose().array()).matrix();
  const double loss = (wsq.rowwise().sum().array() * inv_mc.array()).mean();

  Matrix upstream =
      (2.0 / double(n)) *
      ((resid.array().rowwise() * w.transpose().array()).colwise() * inv_mc.array()).matrix();
  LossResult out;
  out.loss = loss;
  out.grads = vf_backward(field, trace, upstream);
  return out;
}

}  // namespace oneflow
