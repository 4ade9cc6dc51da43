#include <catch2/catch_amalgamated.hpp>

#include "oneflow/vfnet.hpp"

using namespace oneflow;

TEST_CASE("time embedding basics") {
  const Vector e0 = time_embedding(0.0, 8);
  for (int k = 0; k < 4; ++k) {
    REQUIRE(e0[2 * k] == 0.0);
    REQUIRE(e0[2 * k + 1] == 1.0);
  }
  // ||e||^2 = dim/2 for any t
  for (double t : {0.1, 0.37, 0.99}) {
    const Vector e = time_embedding(t, 16);
    REQUIRE(e.squaredNorm() == Catch::Approx(8.0).epsilon(1e-12));
  }
  REQUIRE_THROWS_AS(time_embedding(0.5, 3), std::invalid_argument);
}

TEST_CASE("time embedding matches hand computation at t=0.25, dim=4") {
  const Vector e = time_embedding(0.25, 4);
  const double w0 = 1.0;                       // 10000^0
  const double w1 = std::pow(10000.0, -0.5);   // k=1
  REQUIRE(e[0] == Catch::Approx(std::sin(0.25 * w0)));
  REQUIRE(e[1] == Catch::Approx(std::cos(0.25 * w0)));
  REQUIRE(e[2] == Catch::Approx(std::sin(0.25 * w1)));
  REQUIRE(e[3] == Catch::Approx(std::cos(0.25 * w1)));
}

TEST_CASE("zero-initialized field outputs exactly zero") {
  NetConfig cfg;
  cfg.d = 6;
  cfg.hidden = 32;
  cfg.blocks = 3;
  Rng rng(1);
  const VectorFieldParams vf = make_vector_field(cfg, rng);
  Rng data_rng(2);
  Matrix z(5, 6), m(5, 6);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 6; ++j) {
      z(i, j) = data_rng.normal(0, 3);
      m(i, j) = data_rng.bernoulli(0.5);
    }
  }
  Vector t(5);
  for (int i = 0; i < 5; ++i) t[i] = data_rng.uniform();
  const Matrix v = vf_forward(vf, z, m, t);
  REQUIRE(v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward is pure: repeated calls bit-identical") {
  NetConfig cfg;
  cfg.d = 4;
  cfg.hidden = 16;
  cfg.blocks = 2;
  Rng rng(3);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  // make it non-trivial
  for (auto& t : vf.params.tensors) t.array() += 0.01;
  Matrix z = Matrix::Random(3, 4);
  Matrix m = Matrix::Zero(3, 4);
  Vector t = Vector::Constant(3, 0.4);
  const Matrix v1 = vf_forward(vf, z, m, t);
  const Matrix v2 = vf_forward(vf, z, m, t);
  REQUIRE((v1 - v2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-block net with hand-set weights reproduces hand computation") {
  // d=1, H=1, te=2, ff_mult=1: every tensor is a scalar or tiny vector.
  NetConfig cfg;
  cfg.d = 1;
  cfg.hidden = 1;
  cfg.blocks = 1;
  cfg.time_embed_dim = 2;
  cfg.ff_mult = 1;
  Rng rng(1);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  auto set = [&](std::size_t idx, double v) { vf.params[idx].setConstant(v); };
  const auto& ly = vf.layout;
  set(ly.w_in, 0.5);   // both entries of the 2x1 input projection
  set(ly.b_in, 0.25);
  set(ly.blocks[0].ln_gain, 2.0);
  set(ly.blocks[0].ln_bias, 0.1);
  set(ly.blocks[0].ada_w, 0.0);
  set(ly.blocks[0].ada_b, 0.3);  // gamma = beta = 0.3
  set(ly.blocks[0].w1, 1.5);
  set(ly.blocks[0].b1, -0.2);
  set(ly.blocks[0].w2, 0.7);
  set(ly.blocks[0].b2, 0.05);
  set(ly.w_out, 2.0);
  set(ly.b_out, -1.0);

  const double zt = 0.8, mask = 1.0, t = 0.33;
  Matrix z(1, 1), m(1, 1);
  z << zt;
  m << mask;
  Vector tv(1);
  tv << t;

  // hand computation
  const double h0 = 0.5 * zt + 0.5 * mask + 0.25;
  // LN of a single coordinate: xhat = 0 exactly (mean equals the value)
  const double ln = 2.0 * 0.0 + 0.1;
  const double mod = (1.0 + 0.3) * ln + 0.3;
  const double a1 = 1.5 * mod - 0.2;
  const double g1 = 0.5 * a1 * (1.0 + std::erf(a1 / std::sqrt(2.0)));
  const double h1 = h0 + 0.7 * g1 + 0.05;
  const double expected = 2.0 * h1 - 1.0;

  const Matrix v = vf_forward(vf, z, m, tv);
  REQUIRE(v(0, 0) == Catch::Approx(expected).epsilon(1e-12));
}

namespace {

// central finite differences over every parameter scalar
void check_gradients(const NetConfig& cfg, double tol) {
  Rng rng(11);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  // perturb the zero-initialized tensors so gradients flow everywhere
  Rng prng(12);
  for (auto& t : vf.params.tensors) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) += 0.05 * prng.normal();
    }
  }
  const int batch = 3;
  Matrix z(batch, cfg.d), m(batch, cfg.d), upstream(batch, cfg.d);
  Vector tv(batch);
  Rng drng(13);
  for (int i = 0; i < batch; ++i) {
    tv[i] = drng.uniform();
    for (int j = 0; j < cfg.d; ++j) {
      z(i, j) = drng.normal();
      m(i, j) = drng.bernoulli(0.5);
      upstream(i, j) = drng.normal();
    }
  }

  ForwardTrace trace;
  vf_forward(vf, z, m, tv, &trace);
  const ParamSet grads = vf_backward(vf, trace, upstream);

  const double eps = 1e-6;
  for (std::size_t k = 0; k < vf.params.size(); ++k) {
    for (Eigen::Index i = 0; i < vf.params[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < vf.params[k].cols(); ++j) {
        const double orig = vf.params[k](i, j);
        vf.params[k](i, j) = orig + eps;
        const double fp = (vf_forward(vf, z, m, tv).array() * upstream.array()).sum();
        vf.params[k](i, j) = orig - eps;
        const double fm = (vf_forward(vf, z, m, tv).array() * upstream.array()).sum();
        vf.params[k](i, j) = orig;
        const double fd = (fp - fm) / (2.0 * eps);
        const double an = grads[k](i, j);
        INFO(vf.params.names[k] << "(" << i << "," << j << "): fd=" << fd << " an=" << an);
        REQUIRE(std::abs(fd - an) <= 1e-7 + tol * std::max(std::abs(fd), std::abs(an)));
      }
    }
  }
}

}  // namespace

TEST_CASE("backward matches central finite differences on a tiny net") {
  NetConfig cfg;
  cfg.d = 4;
  cfg.hidden = 8;
  cfg.blocks = 2;
  cfg.time_embed_dim = 4;
  check_gradients(cfg, 1e-5);
}

TEST_CASE("zero upstream gradient gives all-zero parameter gradients") {
  NetConfig cfg;
  cfg.d = 3;
  cfg.hidden = 8;
  cfg.blocks = 1;
  Rng rng(5);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  Matrix z = Matrix::Random(4, 3);
  Matrix m = Matrix::Zero(4, 3);
  Vector t = Vector::Constant(4, 0.5);
  ForwardTrace trace;
  vf_forward(vf, z, m, t, &trace);
  const ParamSet g = vf_backward(vf, trace, Matrix::Zero(4, 3));
  REQUIRE(g.squared_norm() == 0.0);
}

TEST_CASE("gradient of b_out is the upstream sum over the batch") {
  NetConfig cfg;
  cfg.d = 3;
  cfg.hidden = 8;
  cfg.blocks = 1;
  Rng rng(6);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  Matrix z = Matrix::Random(5, 3);
  Matrix m = Matrix::Zero(5, 3);
  Vector t = Vector::Constant(5, 0.2);
  Matrix upstream = Matrix::Random(5, 3);
  ForwardTrace trace;
  vf_forward(vf, z, m, t, &trace);
  const ParamSet g = vf_backward(vf, trace, upstream);
  const Matrix expected = upstream.colwise().sum();
  REQUIRE((g[vf.layout.b_out] - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("layer norm produces per-row mean 0 and variance 1") {
  NetConfig cfg;
  cfg.d = 5;
  cfg.hidden = 64;
  cfg.blocks = 1;
  Rng rng(8);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  Matrix z = Matrix::Random(6, 5) * 10.0;
  Matrix m = Matrix::Zero(6, 5);
  Vector t = Vector::Constant(6, 0.7);
  ForwardTrace trace;
  vf_forward(vf, z, m, t, &trace);
  const Matrix& xhat = trace.blocks[0].xhat;
  for (int r = 0; r < 6; ++r) {
    const double mean = xhat.row(r).mean();
    const double var = xhat.row(r).array().square().mean() - mean * mean;
    REQUIRE(std::abs(mean) <= 1e-12);
    REQUIRE(std::abs(var - 1.0) <= 1e-4);  // 1e-5 LN epsilon shifts variance slightly
  }
}

TEST_CASE("no NaN/Inf for large inputs and bounded sensitivity") {
  NetConfig cfg;
  cfg.d = 4;
  cfg.hidden = 16;
  cfg.blocks = 2;
  Rng rng(9);
  VectorFieldParams vf = make_vector_field(cfg, rng);
  Rng prng(10);
  for (auto& t : vf.params.tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += 0.1 * prng.normal();
  }
  Matrix z = Matrix::Constant(2, 4, 100.0);
  Matrix m = Matrix::Zero(2, 4);
  Vector t = Vector::Constant(2, 0.5);
  const Matrix v = vf_forward(vf, z, m, t);
  REQUIRE(v.allFinite());

  // empirical Lipschitz check on a small perturbation
  Matrix z2 = z;
  z2.array() += 1e-3;
  const Matrix v2 = vf_forward(vf, z2, m, t);
  REQUIRE((v2 - v).norm() <= 1e3 * (z2 - z).norm());
}
