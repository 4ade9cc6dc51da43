// Command-line front end: simulate / train / infer / eval / ablate / report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "oneflow/config.hpp"
#include "oneflow/harness.hpp"
#include "oneflow/metrics.hpp"
#include "oneflow/sampler.hpp"
#include "oneflow/svg.hpp"
#include "oneflow/tasks.hpp"
#include "oneflow/trainer.hpp"

namespace ofs = oneflow;

namespace {

std::vector<std::string> coord_header(int dtheta, int d) {
  std::vector<std::string> names;
  names.reserve(std::size_t(d));
  for (int j = 0; j < d; ++j) names.push_back(ofs::coord_name(j, dtheta));
  return names;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& task_name, long long n, std::uint64_t seed,
                 const std::string& out) {
  if (n < 1) throw std::invalid_argument("simulate: need --n >= 1");
  const ofs::TaskSpec task = ofs::make_task(task_name);
  ofs::Rng rng(seed);
  ofs::Matrix rows(n, task.joint_dim());
  for (long long i = 0; i < n; ++i) {
    const ofs::Vector theta = task.sample_prior(rng);
    const ofs::Vector y = task.simulate(theta, rng);
    rows.row(i).head(task.dtheta) = theta;
    rows.row(i).tail(task.dy) = y;
  }
  ofs::write_matrix_csv(out, coord_header(task.dtheta, task.joint_dim()), rows);
  std::ofstream meta(out + ".meta");
  if (!meta) throw std::runtime_error("simulate: cannot write " + out + ".meta");
  meta << "[dataset]\n"
       << "task = " << task_name << '\n'
       << "seed = " << seed << '\n'
       << "n = " << n << '\n'
       << "format_version = 1\n";
  std::cout << "wrote " << n << " rows to " << out << '\n';
  return 0;
}

// ------------------------------------------------------------------- train

ofs::TimeSchedule schedule_from_string(const std::string& s) {
  if (s == "uniform") return ofs::TimeSchedule::Uniform;
  if (s == "ushaped") return ofs::TimeSchedule::Ushaped;
  throw std::runtime_error("config: time_schedule must be uniform or ushaped, got " + s);
}

int cmd_train(const std::string& config_path, const std::string& out,
              const std::string& log_path, const std::string& resume_path) {
  const ofs::ConfigFile cfg = ofs::parse_config_file(config_path);
  const std::map<std::string, std::set<std::string>> schema = {
      {"task", {"name"}},
      {"train",
       {"budget", "batch_size", "peak_lr", "warmup_steps", "total_iters", "val_every",
        "patience", "seed", "clip_norm", "ema_decay", "beta1", "beta2", "time_schedule"}},
      {"net", {"hidden", "blocks", "time_embed_dim", "ff_mult"}},
      {"mask", {"alpha", "beta", "beta_shape_a", "beta_shape_b"}},
  };
  ofs::reject_unknown_keys(cfg, schema);

  const ofs::TaskSpec task = ofs::make_task(cfg.get("task", "name"));
  ofs::TrainConfig tc;
  tc.budget = int(cfg.has("train", "budget") ? cfg.get_int("train", "budget") : tc.budget);
  tc.batch_size =
      int(cfg.has("train", "batch_size") ? cfg.get_int("train", "batch_size") : tc.batch_size);
  if (cfg.has("train", "peak_lr")) tc.peak_lr = cfg.get_double("train", "peak_lr");
  if (cfg.has("train", "warmup_steps")) tc.warmup_steps = int(cfg.get_int("train", "warmup_steps"));
  if (cfg.has("train", "total_iters")) tc.total_iters = int(cfg.get_int("train", "total_iters"));
  if (cfg.has("train", "val_every")) tc.val_every = int(cfg.get_int("train", "val_every"));
  if (cfg.has("train", "patience")) tc.patience = int(cfg.get_int("train", "patience"));
  if (cfg.has("train", "seed")) tc.seed = std::uint64_t(cfg.get_int("train", "seed"));
  if (cfg.has("train", "clip_norm")) tc.clip_norm = cfg.get_double("train", "clip_norm");
  if (cfg.has("train", "ema_decay")) tc.ema_decay = cfg.get_double("train", "ema_decay");
  if (cfg.has("train", "beta1")) tc.beta1 = cfg.get_double("train", "beta1");
  if (cfg.has("train", "beta2")) tc.beta2 = cfg.get_double("train", "beta2");
  if (cfg.has("train", "time_schedule")) {
    tc.time_schedule = schedule_from_string(cfg.get("train", "time_schedule"));
  }
  if (cfg.has("net", "hidden")) tc.net.hidden = int(cfg.get_int("net", "hidden"));
  if (cfg.has("net", "blocks")) tc.net.blocks = int(cfg.get_int("net", "blocks"));
  if (cfg.has("net", "time_embed_dim")) {
    tc.net.time_embed_dim = int(cfg.get_int("net", "time_embed_dim"));
  }
  if (cfg.has("net", "ff_mult")) tc.net.ff_mult = int(cfg.get_int("net", "ff_mult"));
  if (cfg.has("mask", "alpha")) tc.mask.alpha = cfg.get_double("mask", "alpha");
  if (cfg.has("mask", "beta")) tc.mask.beta = cfg.get_double("mask", "beta");
  if (cfg.has("mask", "beta_shape_a")) tc.mask.beta_shape_a = cfg.get_double("mask", "beta_shape_a");
  if (cfg.has("mask", "beta_shape_b")) tc.mask.beta_shape_b = cfg.get_double("mask", "beta_shape_b");
  tc.validate();

  const std::uint64_t hash = ofs::fnv1a_hash(cfg.text);
  ofs::Checkpoint resume_ckpt;
  const ofs::Checkpoint* resume = nullptr;
  if (!resume_path.empty()) {
    resume_ckpt = ofs::load_checkpoint(resume_path);
    if (resume_ckpt.config_hash != hash) {
      throw std::runtime_error("train: --resume-from checkpoint was trained with a different "
                               "configuration (hash mismatch)");
    }
    resume = &resume_ckpt;
    std::cout << "resuming from step " << resume_ckpt.iterations << '\n';
  }

  std::ofstream log(log_path.empty() ? out + ".log.csv" : log_path);
  if (!log) throw std::runtime_error("train: cannot open training log for writing");
  ofs::TrainResult res = ofs::train(task, tc, &log, resume);
  res.checkpoint.config_hash = hash;
  ofs::save_checkpoint(res.checkpoint, out);
  std::cout << "trained " << res.steps_run << " steps"
            << (res.early_stopped ? " (early stop)" : "") << ", best val loss "
            << res.checkpoint.best_val_loss << ", saved " << out << '\n';
  return 0;
}

// ------------------------------------------------------------------- infer

ofs::SolverConfig solver_from_flags(const std::string& method, int steps, double rtol,
                                    double atol) {
  ofs::SolverConfig s;
  s.method = ofs::solver_method_from_string(method);
  s.steps = steps;
  s.rtol = rtol;
  s.atol = atol;
  s.validate();
  return s;
}

// conditioning CSV: header of coordinate names, one data row, columns
// matching exactly the 1-bits of the mask
ofs::Vector load_conditioning(const std::string& path, const ofs::Mask& mask) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("infer: cannot open conditioning file " + path);
  std::string header_line, data_line;
  if (!std::getline(is, header_line) || !std::getline(is, data_line)) {
    throw std::runtime_error("infer: conditioning file needs a header and one data row");
  }
  const auto names = ofs::split_csv_line(header_line);
  const auto cells = ofs::split_csv_line(data_line);
  if (names.size() != cells.size()) {
    throw std::runtime_error("infer: conditioning header/row length mismatch");
  }
  ofs::Vector cond = ofs::Vector::Zero(mask.size());
  std::vector<bool> seen(std::size_t(mask.size()), false);
  for (std::size_t j = 0; j < names.size(); ++j) {
    const int idx = ofs::coord_index(names[j], mask.dtheta, mask.dy);
    if (!mask.bits[idx]) {
      throw std::runtime_error("infer: conditioning value given for generated coordinate " +
                               names[j]);
    }
    if (seen[std::size_t(idx)]) {
      throw std::runtime_error("infer: duplicate conditioning column " + names[j]);
    }
    seen[std::size_t(idx)] = true;
    cond[idx] = std::stod(cells[j]);
  }
  for (int j = 0; j < mask.size(); ++j) {
    if (mask.bits[j] && !seen[std::size_t(j)]) {
      throw std::runtime_error("infer: missing conditioning value for " +
                               ofs::coord_name(j, mask.dtheta));
    }
  }
  return cond;
}

int cmd_infer(const std::string& ckpt_path, const std::string& mask_string,
              const std::string& cond_path, int n, const std::string& out,
              const std::string& request, const ofs::SolverConfig& solver,
              std::uint64_t seed) {
  const ofs::Checkpoint ckpt = ofs::load_checkpoint(ckpt_path);
  ofs::Query q;
  q.mask = ofs::mask_from_string(mask_string, ckpt.dtheta, ckpt.dy);
  q.n = n;
  if (q.mask.complement_count() == 0) {
    throw std::invalid_argument("infer: all-ones mask generates nothing");
  }
  if (q.mask.complement_count() < q.mask.size()) {
    if (cond_path.empty()) {
      throw std::runtime_error("infer: mask has observed coordinates, --cond is required");
    }
    q.conditioning = load_conditioning(cond_path, q.mask);
  } else {
    q.conditioning = ofs::Vector::Zero(q.mask.size());
  }
  if (!request.empty()) {
    for (const std::string& name : ofs::split_list(request)) {
      q.requested.push_back(ofs::coord_index(name, ckpt.dtheta, ckpt.dy));
    }
  }

  ofs::Rng rng(seed);
  const ofs::Matrix samples = ofs::sample(ckpt, q, solver, rng);
  std::vector<int> cols = q.requested;
  if (cols.empty()) {
    for (int j = 0; j < q.mask.size(); ++j) {
      if (!q.mask.bits[j]) cols.push_back(j);
    }
  }
  std::vector<std::string> header;
  header.reserve(cols.size());
  for (int j : cols) header.push_back(ofs::coord_name(j, ckpt.dtheta));
  ofs::write_matrix_csv(out, header, samples);
  std::cout << "wrote " << samples.rows() << " samples to " << out << '\n';
  return 0;
}

// -------------------------------------------------------------------- eval

double metric_value(const std::string& metric, const ofs::Matrix& model,
                    const ofs::Matrix& reference, const ofs::Vector& theta_true,
                    ofs::Rng& rng) {
  if (metric == "c2st") return ofs::c2st(model, reference, rng);
  if (metric == "mmd") return ofs::mmd2_unbiased(model, reference);
  if (metric == "ks") return ofs::ks_per_dim(model, reference).maxCoeff();
  if (metric == "mse") return ofs::posterior_mean_mse(model, theta_true);
  throw std::invalid_argument("unknown metric: " + metric);
}

// Posterior samples for one held-out observation derived from (seed, obs id).
struct ObsDraw {
  ofs::Vector theta_true;
  ofs::Vector y_obs;
};

ObsDraw draw_observation(const ofs::TaskSpec& task, std::uint64_t seed, int obs_id) {
  ofs::Rng rng(seed, 100 + std::uint64_t(obs_id));
  ObsDraw d;
  d.theta_true = task.sample_prior(rng);
  d.y_obs = task.simulate(d.theta_true, rng);
  return d;
}

ofs::Matrix posterior_samples(const ofs::Checkpoint& ckpt, const ofs::Vector& y_obs, int n,
                              const ofs::SolverConfig& solver, ofs::Rng& rng) {
  ofs::Query q;
  q.mask = ofs::canonical_mask(ofs::QueryKind::Posterior, ckpt.dtheta, ckpt.dy);
  q.conditioning = ofs::Vector::Zero(ckpt.dtheta + ckpt.dy);
  q.conditioning.tail(ckpt.dy) = y_obs;
  q.n = n;
  return ofs::sample(ckpt, q, solver, rng);
}

int cmd_eval(const std::string& ckpt_path, const std::string& metric, int obs_count,
             int n_samples, long long budget, const std::string& out,
             const ofs::SolverConfig& solver, std::uint64_t seed) {
  if (obs_count < 1) throw std::invalid_argument("eval: need --obs >= 1");
  const ofs::Checkpoint ckpt = ofs::load_checkpoint(ckpt_path);
  const ofs::TaskSpec task = ofs::make_task(ckpt.task_name);
  if (!task.has_reference) {
    throw std::runtime_error("eval: task " + task.name + " has no reference oracle");
  }

  std::vector<double> values(std::size_t(obs_count), 0.0);
  ofs::parallel_for(obs_count, [&](int i) {
    const ObsDraw obs = draw_observation(task, seed, i);
    ofs::Rng model_rng(seed, 200 + std::uint64_t(i));
    const ofs::Matrix model = posterior_samples(ckpt, obs.y_obs, n_samples, solver, model_rng);
    ofs::Rng ref_rng(seed, 300 + std::uint64_t(i));
    const ofs::Matrix reference = task.reference_posterior(obs.y_obs, n_samples, ref_rng);
    ofs::Rng mrng(seed, 400 + std::uint64_t(i));
    values[std::size_t(i)] = metric_value(metric, model, reference, obs.theta_true, mrng);
  });

  std::ofstream os(out);
  if (!os) throw std::runtime_error("eval: cannot open " + out);
  os << "task,budget,seed,obs_id,metric,value\n";
  double mean = 0.0;
  for (int i = 0; i < obs_count; ++i) {
    os << task.name << ',' << budget << ',' << seed << ',' << i << ',' << metric << ','
       << ofs::format_double(values[std::size_t(i)]) << '\n';
    mean += values[std::size_t(i)];
  }
  std::cout << "mean " << metric << " over " << obs_count << " observations: "
            << mean / obs_count << '\n';
  return 0;
}

// ------------------------------------------------------------------ ablate

int cmd_ablate(const std::string& kind, const std::string& ckpt_path, const std::string& out,
               const std::string& svg_path, int obs_count, int n_samples,
               const ofs::SolverConfig& solver, std::uint64_t seed) {
  const ofs::Checkpoint ckpt = ofs::load_checkpoint(ckpt_path);
  const ofs::TaskSpec task = ofs::make_task(ckpt.task_name);
  if (!task.has_reference) {
    throw std::runtime_error("ablate: task " + task.name + " has no reference oracle");
  }

  std::vector<double> grid;
  std::string metric;
  if (kind == "noise") {
    grid = {0.0, 0.1, 0.25, 0.5, 0.75, 1.0};
    metric = "c2st";
  } else if (kind == "missing") {
    grid = {0.0, 0.3, 0.5, 0.7, 0.9};
    metric = "c2st";
  } else if (kind == "steps") {
    grid = {1, 2, 3, 4, 5};
    metric = "mse";
  } else {
    throw std::invalid_argument("ablate: kind must be noise, missing or steps");
  }

  std::ofstream os(out);
  if (!os) throw std::runtime_error("ablate: cannot open " + out);
  os << "kind,param,obs_id,metric,value\n";
  std::vector<double> means(grid.size(), 0.0);

  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double param = grid[g];
    std::vector<double> values(std::size_t(obs_count), 0.0);
    ofs::parallel_for(obs_count, [&](int i) {
      const ObsDraw obs = draw_observation(task, seed, i);
      ofs::Rng ref_rng(seed, 300 + std::uint64_t(i));
      ofs::Rng model_rng(seed, 1000 + 100 * std::uint64_t(g) + std::uint64_t(i));
      ofs::Rng mrng(seed, 5000 + 100 * std::uint64_t(g) + std::uint64_t(i));

      if (kind == "noise") {
        const ofs::Vector y_noisy = ofs::corrupt(obs.y_obs, param, model_rng);
        const ofs::Matrix model = posterior_samples(ckpt, y_noisy, n_samples, solver, model_rng);
        const ofs::Matrix reference = task.reference_posterior(obs.y_obs, n_samples, ref_rng);
        values[std::size_t(i)] = ofs::c2st(model, reference, mrng);
      } else if (kind == "missing") {
        // drop a random rho-fraction of the observed y bits: those
        // coordinates become generated-and-discarded
        ofs::Mask m = ofs::canonical_mask(ofs::QueryKind::Posterior, ckpt.dtheta, ckpt.dy);
        const int drop = int(std::lround(param * ckpt.dy));
        std::vector<int> ybits(std::size_t(ckpt.dy));
        for (int j = 0; j < ckpt.dy; ++j) ybits[std::size_t(j)] = ckpt.dtheta + j;
        for (int j = ckpt.dy - 1; j > 0; --j) {
          std::swap(ybits[std::size_t(j)],
                    ybits[std::size_t(model_rng.below(std::uint64_t(j + 1)))]);
        }
        for (int j = 0; j < drop; ++j) m.bits[std::size_t(ybits[std::size_t(j)])] = 0;
        ofs::Query q;
        q.mask = m;
        q.conditioning = ofs::Vector::Zero(ckpt.dtheta + ckpt.dy);
        q.conditioning.tail(ckpt.dy) = obs.y_obs;
        for (int j = 0; j < ckpt.dtheta; ++j) q.requested.push_back(j);
        q.n = n_samples;
        const ofs::Matrix model = ofs::sample(ckpt, q, solver, model_rng);
        const ofs::Matrix reference = task.reference_posterior(obs.y_obs, n_samples, ref_rng);
        values[std::size_t(i)] = ofs::c2st(model, reference, mrng);
      } else {  // steps
        ofs::SolverConfig fixed;
        fixed.method = ofs::SolverMethod::Euler;
        fixed.steps = int(param);
        const ofs::Matrix model = posterior_samples(ckpt, obs.y_obs, n_samples, fixed, model_rng);
        values[std::size_t(i)] = ofs::posterior_mean_mse(model, obs.theta_true);
      }
    });
    for (int i = 0; i < obs_count; ++i) {
      os << kind << ',' << ofs::format_double(param) << ',' << i << ',' << metric << ','
         << ofs::format_double(values[std::size_t(i)]) << '\n';
      means[g] += values[std::size_t(i)] / double(obs_count);
    }
  }

  if (!svg_path.empty()) {
    ofs::SvgSeries series;
    series.label = metric;
    series.x = grid;
    series.y = means;
    const std::string x_label = kind == "noise" ? "sigma" : (kind == "missing" ? "rho" : "K");
    ofs::write_line_plot_svg(svg_path, task.name + " " + kind + " ablation", x_label, metric,
                             {series});
  }
  std::cout << "wrote " << kind << " sweep to " << out << '\n';
  return 0;
}

// ------------------------------------------------------------------ report

int cmd_report(const std::string& in_dir, const std::string& out) {
  namespace fs = std::filesystem;
  // (task, budget, metric) -> values
  std::map<std::tuple<std::string, long long, std::string>, std::vector<double>> groups;
  if (fs::exists(in_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      std::ifstream is(path);
      std::string line;
      if (!std::getline(is, line)) continue;
      if (line != "task,budget,seed,obs_id,metric,value") continue;  // not an eval CSV
      while (std::getline(is, line)) {
        const auto cells = ofs::split_csv_line(line);
        if (cells.size() != 6) {
          throw std::runtime_error("report: malformed row in " + path.string() + ": " + line);
        }
        groups[{cells[0], std::stoll(cells[1]), cells[4]}].push_back(std::stod(cells[5]));
      }
    }
  }

  std::ofstream os(out);
  if (!os) throw std::runtime_error("report: cannot open " + out);
  os << "task,budget,metric,mean,std,n\n";
  for (const auto& [key, values] : groups) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / double(values.size() - 1)) : 0.0;
    os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
       << ofs::format_double(mean) << ',' << ofs::format_double(sd) << ',' << values.size()
       << '\n';
  }
  std::cout << "aggregated " << groups.size() << " groups into " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint flow model for simulation-based inference"};
  app.require_subcommand(1);

  // shared solver flags
  std::string solver_name = "heun";
  int solver_steps = 3;
  double rtol = 1e-5, atol = 1e-5;
  auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--solver", solver_name, "euler|heun|rk4|rk45")->capture_default_str();
    cmd->add_option("--steps", solver_steps, "fixed-step count")->capture_default_str();
    cmd->add_option("--rtol", rtol, "adaptive relative tolerance")->capture_default_str();
    cmd->add_option("--atol", atol, "adaptive absolute tolerance")->capture_default_str();
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a dataset of (theta, y) pairs");
  std::string sim_task, sim_out;
  long long sim_n = 0;
  std::uint64_t sim_seed = 0;
  sim->add_option("--task", sim_task)->required();
  sim->add_option("--n", sim_n)->required();
  sim->add_option("--seed", sim_seed)->capture_default_str();
  sim->add_option("--out", sim_out)->required();

  // train
  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string tr_config, tr_out, tr_log, tr_resume;
  tr->add_option("--config", tr_config)->required();
  tr->add_option("--out", tr_out)->required();
  tr->add_option("--log", tr_log, "training-log CSV (default: OUT.log.csv)");
  tr->add_option("--resume-from", tr_resume, "continue from a checkpoint of the same config");

  // infer
  auto* inf = app.add_subcommand("infer", "draw conditional samples for a mask");
  std::string inf_ckpt, inf_mask, inf_cond, inf_out, inf_request;
  int inf_n = 1000;
  std::uint64_t inf_seed = 0;
  inf->add_option("--ckpt", inf_ckpt)->required();
  inf->add_option("--mask", inf_mask, "0/1 string, 1 = conditioned coordinate")->required();
  inf->add_option("--cond", inf_cond, "CSV with values for the 1-bits");
  inf->add_option("--n", inf_n)->capture_default_str();
  inf->add_option("--request", inf_request, "comma-separated coordinate names to return");
  inf->add_option("--seed", inf_seed)->capture_default_str();
  inf->add_option("--out", inf_out)->required();
  add_solver_flags(inf);

  // eval
  auto* ev = app.add_subcommand("eval", "posterior metrics against the task oracle");
  std::string ev_ckpt, ev_metric = "c2st", ev_out;
  int ev_obs = 10, ev_n = 10000;
  long long ev_budget = 0;
  std::uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--metric", ev_metric, "c2st|mmd|ks|mse")->capture_default_str();
  ev->add_option("--obs", ev_obs, "held-out observation count")->capture_default_str();
  ev->add_option("--n-samples", ev_n)->capture_default_str();
  ev->add_option("--budget", ev_budget, "training budget label for the report");
  ev->add_option("--seed", ev_seed)->capture_default_str();
  ev->add_option("--out", ev_out)->required();
  add_solver_flags(ev);

  // ablate
  auto* ab = app.add_subcommand("ablate", "noise / missing / steps sweeps");
  std::string ab_kind, ab_ckpt, ab_out, ab_svg;
  int ab_obs = 3, ab_n = 2000;
  std::uint64_t ab_seed = 0;
  ab->add_option("--kind", ab_kind, "noise|missing|steps")->required();
  ab->add_option("--ckpt", ab_ckpt)->required();
  ab->add_option("--obs", ab_obs)->capture_default_str();
  ab->add_option("--n-samples", ab_n)->capture_default_str();
  ab->add_option("--seed", ab_seed)->capture_default_str();
  ab->add_option("--out", ab_out)->required();
  ab->add_option("--svg", ab_svg, "optional line-plot output");
  add_solver_flags(ab);

  // report
  auto* rep = app.add_subcommand("report", "aggregate eval CSVs into a summary");
  std::string rep_in, rep_out;
  rep->add_option("--in", rep_in)->required();
  rep->add_option("--out", rep_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_task, sim_n, sim_seed, sim_out);
    if (*tr) return cmd_train(tr_config, tr_out, tr_log, tr_resume);
    if (*inf) {
      return cmd_infer(inf_ckpt, inf_mask, inf_cond, inf_n, inf_out, inf_request,
                       solver_from_flags(solver_name, solver_steps, rtol, atol), inf_seed);
    }
    if (*ev) {
      return cmd_eval(ev_ckpt, ev_metric, ev_obs, ev_n, ev_budget, ev_out,
                      solver_from_flags(solver_name, solver_steps, rtol, atol), ev_seed);
    }
    if (*ab) {
      return cmd_ablate(ab_kind, ab_ckpt, ab_out, ab_svg, ab_obs, ab_n,
                        solver_from_flags(solver_name, solver_steps, rtol, atol), ab_seed);
    }
    if (*rep) return cmd_report(rep_in, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
