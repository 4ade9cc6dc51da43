#pragma once

// Benchmark generative tasks: prior samplers, simulators, and exact or
// rejection-based reference posterior oracles.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "oneflow/linalg.hpp"

namespace oneflow {

struct TaskSpec {
  std::string name;
  int dtheta = 0;
  int dy = 0;
  std::function<Vector(Rng&)> sample_prior;
  std::function<Vector(const Vector&, Rng&)> simulate;
  bool has_reference = false;
  // n reference posterior draws for a given raw observation
  std::function<Matrix(const Vector&, int, Rng&)> reference_posterior;

  int joint_dim() const { return dtheta + dy; }
};

// --- Two Moons ------------------------------------------------------------
// prior: uniform on [-1,1]^2
// y = (r cos a + 0.25, r sin a) + (-|t1+t2|/sqrt2, (-t1+t2)/sqrt2),
// a ~ U(-pi/2, pi/2), r ~ N(0.1, 0.01^2)

inline Vector two_moons_forward(const Vector& theta, double a, double r) {
  Vector y(2);
  const double t1 = theta[0], t2 = theta[1];
  y[0] = r * std::cos(a) + 0.25 - std::abs(t1 + t2) / M_SQRT2;
  y[1] = r * std::sin(a) + (-t1 + t2) / M_SQRT2;
  return y;
}

inline Vector two_moons_simulate(const Vector& theta, Rng& rng) {
  require(theta.size() == 2, "two_moons: theta must be 2-dimensional");
  if (theta[0] < -1.0 || theta[0] > 1.0 || theta[1] < -1.0 || theta[1] > 1.0) {
    throw std::invalid_argument("two_moons: theta outside prior box [-1,1]^2");
  }
  const double a = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
  const double r = rng.normal(0.1, 0.01);
  return two_moons_forward(theta, a, r);
}

// Inversion sampler: draw the crescent point, invert the affine map in
// theta, pick the sign branch uniformly, accept inside the prior box.
inline Matrix two_moons_reference(const Vector& y_obs, int n, Rng& rng) {
  require(y_obs.size() == 2, "two_moons reference: y must be 2-dimensional");
  Matrix out(n, 2);
  int got = 0;
  long long tries = 0;
  const long long max_tries = 2000LL * n + 1000000LL;
  while (got < n) {
    if (++tries > max_tries) {
      throw std::runtime_error("two_moons reference: acceptance rate too low, observation out of range");
    }
    const double a = rng.uniform(-M_PI / 2.0, M_PI / 2.0);
    const double r = rng.normal(0.1, 0.01);
    const double p1 = r * std::cos(a) + 0.25;
    const double p2 = r * std::sin(a);
    const double u = -M_SQRT2 * (y_obs[0] - p1);
    if (u < 0.0) continue;
    const double v = M_SQRT2 * (y_obs[1] - p2);
    const double s = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double th1 = (s * u - v) / 2.0;
    const double th2 = (s * u + v) / 2.0;
    if (th1 < -1.0 || th1 > 1.0 || th2 < -1.0 || th2 > 1.0) continue;
    out(got, 0) = th1;
    out(got, 1) = th2;
    ++got;
  }
  return out;
}

// --- Gaussian Linear --------------------------------------------------------
// prior N(0, 0.1 I_10), simulator N(theta, 0.1 I_10); conjugate posterior
// N(y/2, 0.05 I).

inline Matrix gaussian_linear_reference(const Vector& y_obs, int n, Rng& rng) {
  require(y_obs.size() == 10, "gaussian_linear reference: y must be 10-dimensional");
  Matrix out(n, 10);
  const double sd = std::sqrt(0.05);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 10; ++j) out(i, j) = 0.5 * y_obs[j] + sd * rng.normal();
  }
  return out;
}

// --- Gaussian Linear Uniform -----------------------------------------------
// prior U(-1,1)^10, simulator N(theta, 0.1 I); posterior is N(y, 0.1 I)
// truncated to the box, sampled by per-dimension rejection.

inline Matrix gaussian_linear_uniform_reference(const Vector& y_obs, int n, Rng& rng) {
  require(y_obs.size() == 10, "gaussian_linear_uniform reference: y must be 10-dimensional");
  const double sd = std::sqrt(0.1);
  // Total acceptance probability is the product of per-dimension masses.
  double log_acc = 0.0;
  for (int j = 0; j < 10; ++j) {
    const double lo = (-1.0 - y_obs[j]) / sd;
    const double hi = (1.0 - y_obs[j]) / sd;
    const double mass = 0.5 * (std::erf(hi * M_SQRT1_2) - std::erf(lo * M_SQRT1_2));
    log_acc += std::log(std::max(mass, 1e-300));
  }
  if (log_acc < std::log(1e-8)) {
    throw std::runtime_error("gaussian_linear_uniform reference: observation out of range");
  }
  Matrix out(n, 10);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 10; ++j) {
      double x;
      do {
        x = y_obs[j] + sd * rng.normal();
      } while (x < -1.0 || x > 1.0);
      out(i, j) = x;
    }
  }
  return out;
}

// --- Gaussian Mixture ---------------------------------------------------------
// prior U(-10,10)^2, simulator 0.5 N(theta, I) + 0.5 N(theta, 0.01 I);
// posterior is the same mixture centered at y, truncated to the box.

inline Matrix gaussian_mixture_reference(const Vector& y_obs, int n, Rng& rng) {
  require(y_obs.size() == 2, "gaussian_mixture reference: y must be 2-dimensional");
  Matrix out(n, 2);
  int got = 0;
  long long tries = 0;
  const long long max_tries = 1000LL * n + 1000000LL;
  while (got < n) {
    if (++tries > max_tries) {
      throw std::runtime_error("gaussian_mixture reference: acceptance rate too low");
    }
    const double sd = rng.bernoulli(0.5) ? 1.0 : 0.1;
    const double x0 = y_obs[0] + sd * rng.normal();
    const double x1 = y_obs[1] + sd * rng.normal();
    if (x0 < -10.0 || x0 > 10.0 || x1 < -10.0 || x1 > 10.0) continue;
    out(got, 0) = x0;
    out(got, 1) = x1;
    ++got;
  }
  return out;
}

// Additive observation noise for the robustness ablation.
inline Vector corrupt(const Vector& y, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("corrupt: sigma must be >= 0");
  if (sigma == 0.0) return y;
  Vector out = y;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += sigma * rng.normal();
  return out;
}

inline TaskSpec make_task(const std::string& name) {
  TaskSpec t;
  t.name = name;
  if (name == "two_moons") {
    t.dtheta = 2;
    t.dy = 2;
    t.sample_prior = [](Rng& rng) {
      Vector th(2);
      th[0] = rng.uniform(-1.0, 1.0);
      th[1] = rng.uniform(-1.0, 1.0);
      return th;
    };
    t.simulate = two_moons_simulate;
    t.has_reference = true;
    t.reference_posterior = two_moons_reference;
  } else if (name == "gaussian_linear") {
    t.dtheta = 10;
    t.dy = 10;
    const double sd = std::sqrt(0.1);
    t.sample_prior = [sd](Rng& rng) {
      Vector th(10);
      for (int i = 0; i < 10; ++i) th[i] = sd * rng.normal();
      return th;
    };
    t.simulate = [sd](const Vector& th, Rng& rng) {
      require(th.size() == 10, "gaussian_linear: theta must be 10-dimensional");
      Vector y(10);
      for (int i = 0; i < 10; ++i) y[i] = th[i] + sd * rng.normal();
      return y;
    };
    t.has_reference = true;
    t.reference_posterior = gaussian_linear_reference;
  } else if (name == "gaussian_linear_uniform") {
    t.dtheta = 10;
    t.dy = 10;
    const double sd = std::sqrt(0.1);
    t.sample_prior = [](Rng& rng) {
      Vector th(10);
      for (int i = 0; i < 10; ++i) th[i] = rng.uniform(-1.0, 1.0);
      return th;
    };
    t.simulate = [sd](const Vector& th, Rng& rng) {
      require(th.size() == 10, "gaussian_linear_uniform: theta must be 10-dimensional");
      Vector y(10);
      for (int i = 0; i < 10; ++i) y[i] = th[i] + sd * rng.normal();
      return y;
    };
    t.has_reference = true;
    t.reference_posterior = gaussian_linear_uniform_reference;
  } else if (name == "gaussian_mixture") {
    t.dtheta = 2;
    t.dy = 2;
    t.sample_prior = [](Rng& rng) {
      Vector th(2);
      th[0] = rng.uniform(-10.0, 10.0);
      th[1] = rng.uniform(-10.0, 10.0);
      return th;
    };
    t.simulate = [](const Vector& th, Rng& rng) {
      require(th.size() == 2, "gaussian_mixture: theta must be 2-dimensional");
      const double sd = rng.bernoulli(0.5) ? 1.0 : 0.1;
      Vector y(2);
      y[0] = th[0] + sd * rng.normal();
      y[1] = th[1] + sd * rng.normal();
      return y;
    };
    t.has_reference = true;
    t.reference_posterior = gaussian_mixture_reference;
  } else {
    throw std::invalid_argument("unknown task: " + name);
  }
  return t;
}

}  // namespace oneflow
