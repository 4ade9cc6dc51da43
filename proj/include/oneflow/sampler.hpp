#pragma once

// Mask-constrained ODE integration: dz/dt = (1 - m) .* v(z, m, t) from
// t = 0 to 1, observed coordinates clamped at every solver stage.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <string>
#include <stdexcept>
#include <vector>

#include "oneflow/checkpoint.hpp"
#include "oneflow/masking.hpp"

namespace oneflow {

enum class SolverMethod { Euler, Heun, RK4, AdaptiveRK45 };

struct SolverConfig {
  SolverMethod method = SolverMethod::Heun;
  int steps = 3;       // fixed-step methods
  double rtol = 1e-5;  // adaptive
  double atol = 1e-5;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("solver: steps must be >= 1");
    if (!(rtol > 0.0) || !(atol > 0.0)) {
      throw std::invalid_argument("solver: tolerances must be > 0");
    }
  }
};

inline SolverMethod solver_method_from_string(const std::string& s) {
  if (s == "euler") return SolverMethod::Euler;
  if (s == "heun") return SolverMethod::Heun;
  if (s == "rk4") return SolverMethod::RK4;
  if (s == "rk45") return SolverMethod::AdaptiveRK45;
  throw std::invalid_argument("unknown solver method: " + s);
}

// Batched field: rows of Z are independent states, shared mask rows M.
using FieldFn = std::function<Matrix(const Matrix& z, const Matrix& m, const Vector& t)>;

inline FieldFn field_from_params(const VectorFieldParams& params) {
  return [params](const Matrix& z, const Matrix& m, const Vector& t) {
    return vf_forward(params, z, m, t);
  };
}

// Observed coordinates copied from z_obs, generated coordinates ~ N(0, 1).
inline Vector init_state(const Vector& z_obs_std, const Mask& m, Rng& rng) {
  require(int(z_obs_std.size()) == m.size(), "init_state: length mismatch");
  Vector z = z_obs_std;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!m.bits[i]) z[i] = rng.normal();
  }
  return z;
}

namespace detail {

inline void check_finite(const Matrix& z, double t, int step_index) {
  if (!z.allFinite()) {
    throw std::runtime_error("integrate: non-finite state at t=" + std::to_string(t) +
                             ", step " + std::to_string(step_index));
  }
}

}  // namespace detail

// Integrate the gated ODE over a batch of states sharing one mask. Every
// stage evaluation is gated by (1 - m), so clamped coordinates never move.
inline Matrix integrate(const FieldFn& field, const Matrix& z0, const Mask& mask,
                        const SolverConfig& solver) {
  solver.validate();
  require(int(z0.cols()) == mask.size(), "integrate: state/mask length mismatch");
  const Eigen::Index batch = z0.rows();
  Matrix m(batch, mask.size());
  for (Eigen::Index r = 0; r < batch; ++r) {
    for (int j = 0; j < mask.size(); ++j) m(r, j) = double(mask.bits[j]);
  }
  const Matrix gate = (1.0 - m.array()).matrix();
  auto eval = [&](const Matrix& z, double t) -> Matrix {
    Vector tv = Vector::Constant(batch, t);
    return (field(z, m, tv).array() * gate.array()).matrix();
  };
  // Re-clamp after every state update so observed coordinates stay
  // bit-identical to z0 (x + 0.0 can flip the sign of a negative zero).
  auto reclamp = [&](Matrix& z) {
    for (int j = 0; j < mask.size(); ++j) {
      if (mask.bits[j]) z.col(j) = z0.col(j);
    }
  };

  Matrix z = z0;
  if (solver.method == SolverMethod::AdaptiveRK45) {
    // Dormand-Prince 5(4) with standard step-size control.
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                        e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
    double t = 0.0;
    double h = 0.1;
    int step_index = 0;
    Matrix k1 = eval(z, t);
    while (t < 1.0) {
      if (t + h > 1.0) h = 1.0 - t;
      const Matrix k2 = eval(z + h * a21 * k1, t + h / 5.0);
      const Matrix k3 = eval(z + h * (a31 * k1 + a32 * k2), t + 3.0 * h / 10.0);
      const Matrix k4 = eval(z + h * (a41 * k1 + a42 * k2 + a43 * k3), t + 4.0 * h / 5.0);
      const Matrix k5 = eval(z + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4),
                             t + 8.0 * h / 9.0);
      const Matrix k6 = eval(z + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5),
                             t + h);
      const Matrix znew = z + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Matrix k7 = eval(znew, t + h);
      const Matrix err =
          h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      // max scaled error over all states and free coordinates
      double errnorm = 0.0;
      for (Eigen::Index r = 0; r < batch; ++r) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
          const double sc = solver.atol +
                            solver.rtol * std::max(std::abs(z(r, j)), std::abs(znew(r, j)));
          errnorm = std::max(errnorm, std::abs(err(r, j)) / sc);
        }
      }
      if (errnorm <= 1.0) {
        t += h;
        z = znew;
        reclamp(z);
        k1 = k7;  // FSAL
        detail::check_finite(z, t, step_index);
      }
      const double factor = errnorm > 0.0
                                ? std::clamp(0.9 * std::pow(errnorm, -0.2), 0.2, 5.0)
                                : 5.0;
      h = std::min(h * factor, 1.0);
      if (h < 1e-12) {
        throw std::runtime_error("integrate: adaptive step underflow at t=" + std::to_string(t));
      }
      ++step_index;
      if (step_index > 100000) {
        throw std::runtime_error("integrate: adaptive solver exceeded step limit");
      }
    }
  } else {
    const double h = 1.0 / double(solver.steps);
    for (int k = 0; k < solver.steps; ++k) {
      const double t = double(k) * h;
      switch (solver.method) {
        case SolverMethod::Euler: {
          z += h * eval(z, t);
          break;
        }
        case SolverMethod::Heun: {
          const Matrix k1 = eval(z, t);
          const Matrix k2 = eval(z + h * k1, t + h);
          z += (h / 2.0) * (k1 + k2);
          break;
        }
        case SolverMethod::RK4: {
          const Matrix k1 = eval(z, t);
          const Matrix k2 = eval(z + (h / 2.0) * k1, t + h / 2.0);
          const Matrix k3 = eval(z + (h / 2.0) * k2, t + h / 2.0);
          const Matrix k4 = eval(z + h * k3, t + h);
          z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
          break;
        }
        default:
          throw std::invalid_argument("integrate: unknown method");
      }
      reclamp(z);
      detail::check_finite(z, t + h, k);
    }
  }

#ifndef NDEBUG
  for (Eigen::Index r = 0; r < batch; ++r) {
    for (int j = 0; j < mask.size(); ++j) {
      if (mask.bits[j]) assert(z(r, j) == z0(r, j));
    }
  }
#endif
  return z;
}

struct Query {
  Mask mask;
  Vector conditioning;        // raw units, length = joint dim; read where mask = 1
  std::vector<int> requested; // coordinate indices to return; empty = all zero-bits
  int n = 1;
};

// Conditional sampling: standardize conditioning, init + integrate with the
// EMA field, de-standardize, return the requested block (rows = samples).
inline Matrix sample(const Checkpoint& ckpt, const Query& query, const SolverConfig& solver,
                     Rng& rng) {
  const int d = ckpt.dtheta + ckpt.dy;
  require(query.mask.size() == d, "sample: mask length mismatch with checkpoint task");
  require(int(query.conditioning.size()) == d, "sample: conditioning length mismatch");
  require(query.n >= 1, "sample: need n >= 1");
  std::vector<int> cols = query.requested;
  if (cols.empty()) {
    for (int j = 0; j < d; ++j) {
      if (!query.mask.bits[j]) cols.push_back(j);
    }
  } else {
    for (int j : cols) {
      require(j >= 0 && j < d, "sample: requested coordinate out of range");
      require(query.mask.bits[j] == 0, "sample: requested coordinate is conditioned");
    }
  }

  const Vector z_obs_std = ckpt.standardizer.apply(query.conditioning);
  Matrix z0(query.n, d);
  for (int i = 0; i < query.n; ++i) {
    z0.row(i) = init_state(z_obs_std, query.mask, rng);
  }
  const VectorFieldParams ema = ckpt.ema_field();
  const Matrix z1 = integrate(field_from_params(ema), z0, query.mask, solver);
  const Matrix raw = ckpt.standardizer.invert_rows(z1);
  Matrix out(query.n, Eigen::Index(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(Eigen::Index(c)) = raw.col(cols[c]);
  return out;
}

}  // namespace oneflow
