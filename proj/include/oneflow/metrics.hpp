#pragma once

// Two-sample evaluation: C2ST (small MLP classifier under 5-fold CV),
// unbiased MMD^2 with median-heuristic bandwidth, per-dimension KS, and
// posterior-mean MSE.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "oneflow/trainer.hpp"

namespace oneflow {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  int n_per_set = 0;
  std::uint64_t seed = 0;
  double bandwidth = 0.0;  // MMD only
  int folds = 0;           // C2ST only
};

namespace detail {

// Two-hidden-layer MLP binary classifier trained with full-batch Adam.
// Width follows the 10*d convention; early stopping on a 20% holdout.
struct C2stNet {
  Matrix w1, w2, w3;
  Vector b1, b2;
  double b3 = 0.0;
};

inline C2stNet c2st_net_init(int d, int width, Rng& rng) {
  C2stNet net;
  auto uniform_mat = [&](int rows, int cols) {
    Matrix m(rows, cols);
    const double bound = std::sqrt(1.0 / double(rows));
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    }
    return m;
  };
  net.w1 = uniform_mat(d, width);
  net.w2 = uniform_mat(width, width);
  net.w3 = uniform_mat(width, 1);
  net.b1 = Vector::Zero(width);
  net.b2 = Vector::Zero(width);
  return net;
}

struct C2stTrace {
  Matrix a1, g1, a2, g2;
  Vector logits;
};

inline Vector c2st_forward(const C2stNet& net, const Matrix& x, C2stTrace* tr = nullptr) {
  Matrix a1 = (x * net.w1).rowwise() + net.b1.transpose();
  Matrix g1 = a1.unaryExpr([](double v) { return oneflow::detail::gelu(v); });
  Matrix a2 = (g1 * net.w2).rowwise() + net.b2.transpose();
  Matrix g2 = a2.unaryExpr([](double v) { return oneflow::detail::gelu(v); });
  Vector logits = (g2 * net.w3).col(0).array() + net.b3;
  if (tr) {
    tr->a1 = std::move(a1);
    tr->g1 = std::move(g1);
    tr->a2 = std::move(a2);
    tr->g2 = std::move(g2);
    tr->logits = logits;
  }
  return logits;
}

// Returns mean BCE loss; fills gradient net (same shapes).
inline double c2st_loss_grad(const C2stNet& net, const Matrix& x, const Vector& labels,
                             C2stNet& grad) {
  C2stTrace tr;
  const Vector logits = c2st_forward(net, x, &tr);
  const Eigen::Index n = x.rows();
  Vector probs(n), dlogit(n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = logits[i];
    // numerically stable BCE-with-logits
    loss += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
    probs[i] = 1.0 / (1.0 + std::exp(-z));
    dlogit[i] = (probs[i] - labels[i]) / double(n);
  }
  loss /= double(n);

  grad.w3 = tr.g2.transpose() * dlogit;
  grad.b3 = dlogit.sum();
  Matrix dg2 = dlogit * net.w3.transpose();
  Matrix da2 = (dg2.array() *
                tr.a2.unaryExpr([](double v) { return oneflow::detail::gelu_grad(v); }).array())
                   .matrix();
  grad.w2 = tr.g1.transpose() * da2;
  grad.b2 = da2.colwise().sum();
  Matrix dg1 = da2 * net.w2.transpose();
  Matrix da1 = (dg1.array() *
                tr.a1.unaryExpr([](double v) { return oneflow::detail::gelu_grad(v); }).array())
                   .matrix();
  grad.w1 = x.transpose() * da1;
  grad.b1 = da1.colwise().sum();
  return loss;
}

inline double c2st_accuracy(const C2stNet& net, const Matrix& x, const Vector& labels) {
  const Vector logits = c2st_forward(net, x);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int pred = logits[i] > 0.0 ? 1 : 0;
    if (pred == int(labels[i])) ++correct;
  }
  return double(correct) / double(x.rows());
}

struct C2stAdam {
  C2stNet m, v;
  std::int64_t step = 0;
};

inline void c2st_adam_step(C2stNet& net, const C2stNet& g, C2stAdam& st, double lr) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(0.9, double(st.step));
  const double bc2 = 1.0 - std::pow(0.999, double(st.step));
  auto upd_m = [&](Matrix& p, const Matrix& gr, Matrix& m, Matrix& v) {
    m = 0.9 * m + 0.1 * gr;
    v = (0.999 * v.array() + 0.001 * gr.array().square()).matrix();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + 1e-8);
  };
  auto upd_v = [&](Vector& p, const Vector& gr, Vector& m, Vector& v) {
    m = 0.9 * m + 0.1 * gr;
    v = (0.999 * v.array() + 0.001 * gr.array().square()).matrix();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + 1e-8);
  };
  upd_m(net.w1, g.w1, st.m.w1, st.v.w1);
  upd_m(net.w2, g.w2, st.m.w2, st.v.w2);
  upd_m(net.w3, g.w3, st.m.w3, st.v.w3);
  upd_v(net.b1, g.b1, st.m.b1, st.v.b1);
  upd_v(net.b2, g.b2, st.m.b2, st.v.b2);
  st.m.b3 = 0.9 * st.m.b3 + 0.1 * g.b3;
  st.v.b3 = 0.999 * st.v.b3 + 0.001 * g.b3 * g.b3;
  net.b3 -= lr * (st.m.b3 / bc1) / (std::sqrt(st.v.b3 / bc2) + 1e-8);
}

}  // namespace detail

// Classifier two-sample test. Pooled data is standardized, then a 5-fold
// cross-validated MLP (two hidden layers of width 10*d, GELU, Adam,
// <= 500 epochs, early stopping on a 20% holdout) separates A from B.
// Returns the mean held-out fold accuracy.
inline double c2st(const Matrix& a, const Matrix& b, Rng& rng, int max_epochs = 500) {
  require(a.cols() == b.cols(), "c2st: dimension mismatch");
  require(a.rows() >= 100 && b.rows() >= 100, "c2st: need at least 100 points per set");
  const int d = int(a.cols());
  const Eigen::Index n = a.rows() + b.rows();

  Matrix x(n, d);
  x.topRows(a.rows()) = a;
  x.bottomRows(b.rows()) = b;
  Vector labels(n);
  labels.head(a.rows()).setZero();
  labels.tail(b.rows()).setOnes();

  // pooled standardization
  const Vector mu = x.colwise().mean();
  Vector sd = ((x.rowwise() - mu.transpose()).array().square().colwise().sum() /
               double(n - 1)).sqrt().matrix().transpose();
  for (int j = 0; j < d; ++j) sd[j] = std::max(sd[j], 1e-12);
  x = ((x.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array()).matrix();

  std::vector<Eigen::Index> perm(std::size_t(n), 0);
  std::iota(perm.begin(), perm.end(), 0);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::swap(perm[std::size_t(i)], perm[rng.below(std::uint64_t(i + 1))]);
  }

  const int folds = 5;
  const int width = 10 * d;
  double acc_sum = 0.0;
  for (int fold = 0; fold < folds; ++fold) {
    std::vector<Eigen::Index> test_idx, pool_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (int(i % folds) == fold) test_idx.push_back(perm[std::size_t(i)]);
      else pool_idx.push_back(perm[std::size_t(i)]);
    }
    // carve 20% holdout off the training pool for early stopping
    const std::size_t n_hold = pool_idx.size() / 5;
    std::vector<Eigen::Index> hold_idx(pool_idx.end() - long(n_hold), pool_idx.end());
    pool_idx.resize(pool_idx.size() - n_hold);

    auto gather = [&](const std::vector<Eigen::Index>& idx, Matrix& xs, Vector& ys) {
      xs.resize(Eigen::Index(idx.size()), d);
      ys.resize(Eigen::Index(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        xs.row(Eigen::Index(i)) = x.row(idx[i]);
        ys[Eigen::Index(i)] = labels[idx[i]];
      }
    };
    Matrix xtr, xho, xte;
    Vector ytr, yho, yte;
    gather(pool_idx, xtr, ytr);
    gather(hold_idx, xho, yho);
    gather(test_idx, xte, yte);

    detail::C2stNet net = detail::c2st_net_init(d, width, rng);
    detail::C2stAdam st;
    st.m = net;
    st.v = net;
    auto zero_net = [&](detail::C2stNet& nn) {
      nn.w1.setZero(); nn.w2.setZero(); nn.w3.setZero();
      nn.b1.setZero(); nn.b2.setZero(); nn.b3 = 0.0;
    };
    zero_net(st.m);
    zero_net(st.v);

    detail::C2stNet best = net;
    double best_hold = std::numeric_limits<double>::infinity();
    int bad = 0;
    detail::C2stNet grad = net;
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
      detail::c2st_loss_grad(net, xtr, ytr, grad);
      detail::c2st_adam_step(net, grad, st, 1e-3);
      detail::C2stTrace tr;
      const Vector logits = detail::c2st_forward(net, xho);
      double hold_loss = 0.0;
      for (Eigen::Index i = 0; i < xho.rows(); ++i) {
        const double z = logits[i];
        hold_loss += std::max(z, 0.0) - z * yho[i] + std::log1p(std::exp(-std::abs(z)));
      }
      hold_loss /= double(xho.rows());
      if (hold_loss < best_hold - 1e-5) {
        best_hold = hold_loss;
        best = net;
        bad = 0;
      } else if (++bad >= 20) {
        break;
      }
    }
    acc_sum += detail::c2st_accuracy(best, xte, yte);
  }
  return acc_sum / double(folds);
}

// Median pairwise distance over the pooled set, subsampled for O(n^2) control.
inline double median_heuristic_bandwidth(const Matrix& a, const Matrix& b,
                                         Eigen::Index max_points = 5000) {
  Matrix pooled(a.rows() + b.rows(), a.cols());
  pooled.topRows(a.rows()) = a;
  pooled.bottomRows(b.rows()) = b;
  const Eigen::Index n = std::min(pooled.rows(), max_points);
  std::vector<double> dists;
  dists.reserve(std::size_t(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dists.push_back((pooled.row(i) - pooled.row(j)).norm());
    }
  }
  std::nth_element(dists.begin(), dists.begin() + long(dists.size() / 2), dists.end());
  const double med = dists[dists.size() / 2];
  if (!(med > 0.0)) {
    throw std::runtime_error("mmd: bandwidth undefined (all points identical)");
  }
  return med;
}

// Unbiased U-statistic with Gaussian kernel exp(-||x-y||^2 / (2 h^2)).
inline double mmd2_unbiased(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "mmd: dimension mismatch");
  require(a.rows() >= 2 && b.rows() >= 2, "mmd: need at least 2 points per set");
  const double h = median_heuristic_bandwidth(a, b);
  const double gamma = 1.0 / (2.0 * h * h);
  auto kernel_mean_offdiag = [&](const Matrix& x) {
    const Eigen::Index n = x.rows();
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        s += std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
      }
    }
    return 2.0 * s / (double(n) * double(n - 1));
  };
  double cross = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      cross += std::exp(-gamma * (a.row(i) - b.row(j)).squaredNorm());
    }
  }
  cross /= double(a.rows()) * double(b.rows());
  return kernel_mean_offdiag(a) + kernel_mean_offdiag(b) - 2.0 * cross;
}

// Classical two-sample KS statistic per coordinate.
inline Vector ks_per_dim(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "ks: dimension mismatch");
  Vector out(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    std::vector<double> xa(std::size_t(a.rows())), xb(std::size_t(b.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) xa[std::size_t(i)] = a(i, j);
    for (Eigen::Index i = 0; i < b.rows(); ++i) xb[std::size_t(i)] = b(i, j);
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    double d = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < xa.size() && ib < xb.size()) {
      // advance both past ties so equal samples contribute no gap
      const double v = std::min(xa[ia], xb[ib]);
      while (ia < xa.size() && xa[ia] == v) ++ia;
      while (ib < xb.size() && xb[ib] == v) ++ib;
      d = std::max(d, std::abs(double(ia) / double(xa.size()) -
                               double(ib) / double(xb.size())));
    }
    out[j] = d;
  }
  return out;
}

// ||mean(samples) - theta_true||^2 / d
inline double posterior_mean_mse(const Matrix& samples, const Vector& theta_true) {
  require(samples.rows() >= 1, "posterior_mean_mse: empty sample");
  require(samples.cols() == theta_true.size(), "posterior_mean_mse: dimension mismatch");
  const Vector mean = samples.colwise().mean();
  return (mean - theta_true).squaredNorm() / double(theta_true.size());
}

}  // namespace oneflow
