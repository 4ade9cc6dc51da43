#pragma once

// Training loop: Adam with global-norm clipping, EMA weights, linear
// warmup + cosine decay, 90/10 split with early stopping on a frozen
// validation estimator, and per-coordinate standardization.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "oneflow/checkpoint.hpp"
#include "oneflow/flowcore.hpp"
#include "oneflow/tasks.hpp"

namespace oneflow {

struct TrainConfig {
  int budget = 10000;       // simulation count N
  int batch_size = 256;
  double peak_lr = 1e-3;
  int warmup_steps = 1000;
  int total_iters = 100000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double clip_norm = 1.0;
  double ema_decay = 0.999;
  int val_every = 500;
  int patience = 20;
  TimeSchedule time_schedule = TimeSchedule::Uniform;
  MaskMixtureConfig mask;
  std::uint64_t seed = 0;
  NetConfig net;  // net.d filled in from the task

  void validate() const {
    if (budget <= 0) throw std::invalid_argument("train config: budget must be > 0");
    if (batch_size <= 0 || val_every <= 0 || patience <= 0 || total_iters <= 0) {
      throw std::invalid_argument("train config: counts must be > 0");
    }
    if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) {
      throw std::invalid_argument("train config: peak_lr must be finite and > 0");
    }
    if (warmup_steps < 0 || warmup_steps >= total_iters) {
      throw std::invalid_argument("train config: need 0 <= warmup_steps < total_iters");
    }
    mask.validate();
  }
};

inline Standardizer fit_standardizer(const Matrix& train_rows) {
  require(train_rows.rows() >= 2, "fit_standardizer: need at least 2 rows");
  Standardizer s;
  s.mean = train_rows.colwise().mean();
  const Matrix centered = train_rows.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / double(train_rows.rows() - 1))
              .sqrt().matrix().transpose();
  for (Eigen::Index i = 0; i < s.std.size(); ++i) s.std[i] = std::max(s.std[i], 1e-8);
  return s;
}

// Linear warmup to peak_lr, then cosine decay to zero.
inline double lr_at(std::int64_t step, const TrainConfig& cfg) {
  if (step < cfg.warmup_steps) return cfg.peak_lr * double(step) / double(cfg.warmup_steps);
  const double progress =
      double(step - cfg.warmup_steps) / double(cfg.total_iters - cfg.warmup_steps);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;
};

inline AdamState make_adam_state(const ParamSet& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

inline void clip_global_norm(ParamSet& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
}

inline void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  require(params.size() == grads.size(), "adam_step: tensor counts differ");
  for (const auto& g : grads.tensors) {
    if (!g.allFinite()) throw std::runtime_error("adam_step: non-finite gradient");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = (beta2 * state.v[i].array() + (1.0 - beta2) * grads[i].array().square()).matrix();
    const auto mhat = state.m[i].array() / bc1;
    const auto vhat = state.v[i].array() / bc2;
    params[i].array() -= lr * mhat / (vhat.sqrt() + eps);
  }
}

inline void ema_update(ParamSet& ema, const ParamSet& params, double decay = 0.999) {
  require(ema.size() == params.size(), "ema_update: tensor counts differ");
  for (std::size_t i = 0; i < ema.size(); ++i) {
    ema[i] = decay * ema[i] + (1.0 - decay) * params[i];
  }
}

// Forward-only loss over standardized rows with freshly drawn masks/times/noise.
inline double loss_value(const VectorFieldParams& field, const Matrix& rows,
                         const LossConfig& lcfg, const MaskMixtureConfig& mcfg, int dtheta,
                         int dy, Rng& rng) {
  const Eigen::Index n = rows.rows();
  const int d = dtheta + dy;
  Matrix zt(n, d), mm(n, d), vt(n, d);
  Vector tvec(n), inv_mc(n);
  const Vector w = loss_weights(dtheta, dy, lcfg.lambda_theta);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Mask m = sample_mask(rng, mcfg, dtheta, dy);
    const double t = sample_time(rng, lcfg.time_schedule);
    const PathSample s = make_path_sample(rng, rows.row(r).transpose(), m, t);
    zt.row(r) = s.z_t;
    vt.row(r) = s.v_target;
    for (int j = 0; j < d; ++j) mm(r, j) = double(m.bits[j]);
    tvec[r] = t;
    inv_mc[r] = 1.0 / double(m.complement_count());
  }
  const Matrix v = vf_forward(field, zt, mm, tvec);
  const Matrix resid = ((v - vt).array() * (1.0 - mm.array())).matrix();
  const Matrix wsq = (resid.array().square().rowwise() * w.transpose().array()).matrix();
  return (wsq.rowwise().sum().array() * inv_mc.array()).mean();
}

struct TrainResult {
  Checkpoint checkpoint;
  std::int64_t steps_run = 0;
  bool early_stopped = false;
};

// Log CSV columns: step, lr, train_loss, val_loss, ema_val_loss, wallclock_ms.
// `resume` continues the step count from a previous checkpoint of the same
// configuration (weights and EMA restored; optimizer moments start fresh).
inline TrainResult train(const TaskSpec& task, const TrainConfig& cfg_in,
                         std::ostream* log = nullptr, const Checkpoint* resume = nullptr) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  cfg.net.d = task.joint_dim();
  cfg.net.validate();

  // Sub-streams: 1 = dataset, 2 = init, 3 = training draws, 4 = validation draws.
  Rng data_rng(cfg.seed, 1);
  Rng init_rng(cfg.seed, 2);
  Rng loop_rng(cfg.seed, 3);

  const int d = task.joint_dim();
  Matrix dataset(cfg.budget, d);
  for (int i = 0; i < cfg.budget; ++i) {
    const Vector theta = task.sample_prior(data_rng);
    const Vector y = task.simulate(theta, data_rng);
    dataset.row(i).head(task.dtheta) = theta;
    dataset.row(i).tail(task.dy) = y;
  }

  const int n_train = std::max(2, int(cfg.budget * 9 / 10));
  if (n_train > cfg.budget) {
    throw std::invalid_argument("train: budget too small for a 90/10 split");
  }
  const int n_val = cfg.budget - n_train;
  const Matrix train_rows_raw = dataset.topRows(n_train);
  const Standardizer standardizer = fit_standardizer(train_rows_raw);
  const Matrix train_rows = standardizer.apply_rows(train_rows_raw);
  const Matrix val_rows =
      n_val > 0 ? standardizer.apply_rows(dataset.bottomRows(n_val)) : train_rows;

  VectorFieldParams field = make_vector_field(cfg.net, init_rng);
  std::int64_t start_step = 0;
  if (resume) {
    require(resume->task_name == task.name, "train: resume checkpoint is for another task");
    require(resume->net.d == cfg.net.d && resume->net.hidden == cfg.net.hidden &&
                resume->net.blocks == cfg.net.blocks,
            "train: resume checkpoint architecture mismatch");
    field.params = resume->raw;
    start_step = resume->iterations;
    if (start_step >= cfg.total_iters) {
      throw std::invalid_argument("train: resume checkpoint already at or past total_iters");
    }
  }
  ParamSet ema = resume ? resume->ema : field.params;
  AdamState adam = make_adam_state(field.params);

  LossConfig lcfg;
  lcfg.lambda_theta = double(task.dy) / double(task.dtheta);
  lcfg.time_schedule = cfg.time_schedule;

  double best_val = std::numeric_limits<double>::infinity();
  ParamSet best_ema = ema;
  std::int64_t best_iter = 0;
  int bad_validations = 0;
  bool stopped = false;
  double last_train_loss = 0.0;
  const auto t_start = std::chrono::steady_clock::now();
  if (log) *log << "step,lr,train_loss,val_loss,ema_val_loss,wallclock_ms\n";

  std::vector<PathSample> batch;
  batch.reserve(cfg.batch_size);
  std::int64_t step = start_step;
  for (step = start_step + 1; step <= cfg.total_iters; ++step) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto row = Eigen::Index(loop_rng.below(std::uint64_t(train_rows.rows())));
      const Mask m = sample_mask(loop_rng, cfg.mask, task.dtheta, task.dy);
      const double t = sample_time(loop_rng, cfg.time_schedule);
      batch.push_back(make_path_sample(loop_rng, train_rows.row(row).transpose(), m, t));
    }
    const double lr = lr_at(step, cfg);
    LossResult res = loss_batch(field, batch, lcfg);
    last_train_loss = res.loss;
    if (!std::isfinite(res.loss)) {
      throw std::runtime_error("train: loss diverged (NaN/Inf) at step " + std::to_string(step) +
                               ", lr " + std::to_string(lr));
    }
    clip_global_norm(res.grads, cfg.clip_norm);
    adam_step(field.params, res.grads, adam, lr, cfg.beta1, cfg.beta2);
    ema_update(ema, field.params, cfg.ema_decay);

    if (step % cfg.val_every == 0) {
      // Frozen estimator: identical mask/time/noise draws every pass.
      Rng val_rng_raw(cfg.seed, 4);
      Rng val_rng_ema(cfg.seed, 4);
      const VectorFieldParams ema_field{cfg.net, ema, field.layout};
      const double val_raw = loss_value(field, val_rows, lcfg, cfg.mask, task.dtheta,
                                        task.dy, val_rng_raw);
      const double val_ema = loss_value(ema_field, val_rows, lcfg, cfg.mask, task.dtheta,
                                        task.dy, val_rng_ema);
      if (log) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t_start).count();
        *log << step << ',' << lr << ',' << last_train_loss << ',' << val_raw << ','
             << val_ema << ',' << ms << '\n';
      }
      if (val_ema < best_val) {
        best_val = val_ema;
        best_ema = ema;
        best_iter = step;
        bad_validations = 0;
      } else {
        ++bad_validations;
        if (bad_validations >= cfg.patience) {
          stopped = true;
          break;
        }
      }
    }
  }
  if (step > cfg.total_iters) step = cfg.total_iters;

  TrainResult out;
  out.steps_run = step;
  out.early_stopped = stopped;
  Checkpoint& c = out.checkpoint;
  c.task_name = task.name;
  c.dtheta = task.dtheta;
  c.dy = task.dy;
  c.net = cfg.net;
  c.standardizer = standardizer;
  c.layout = field.layout;
  c.raw = field.params;
  c.ema = std::isfinite(best_val) && best_iter > 0 ? best_ema : ema;
  c.best_val_loss = best_val;
  c.iterations = step;
  return out;
}

}  // namespace oneflow
