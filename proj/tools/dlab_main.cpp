// Command-line front end: train, sweep, fit, cost, report.
// Exit codes: 0 success, 1 user error, 2 numerical failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlab/config.hpp"
#include "dlab/cost_model.hpp"
#include "dlab/datasets.hpp"
#include "dlab/engine.hpp"
#include "dlab/model_zoo.hpp"
#include "dlab/records.hpp"
#include "dlab/report.hpp"
#include "dlab/scaling_fit.hpp"
#include "dlab/sweep.hpp"
#include "dlab/tables.hpp"

namespace {

using namespace dlab;

std::unique_ptr<Objective> make_objective(const Config& cfg) {
  std::string kind = cfg.get_str("objective.kind", "quadratic");
  if (kind == "quadratic") {
    auto dim = static_cast<std::size_t>(cfg.get_int("objective.dim", 8));
    double sigma = cfg.get_num("objective.sigma", 1.0);
    auto seed = static_cast<std::uint64_t>(cfg.get_int("objective.shape_seed", 17));
    return std::make_unique<NoisyQuadratic>(
        NoisyQuadratic::standard(dim, sigma, seed));
  }
  if (kind == "mlp") {
    auto in = static_cast<std::size_t>(cfg.get_int("objective.input_dim", 4));
    auto hid = static_cast<std::size_t>(cfg.get_int("objective.hidden", 8));
    auto cls = static_cast<std::size_t>(cfg.get_int("objective.classes", 3));
    auto seed = static_cast<std::uint64_t>(cfg.get_int("objective.mixture_seed", 29));
    return std::make_unique<TinyMLP>(in, hid, cls, seed);
  }
  throw std::invalid_argument("unknown objective kind: " + kind);
}

Hyperparams hyperparams_from(const Config& cfg) {
  Hyperparams hp;
  hp.inner_lr = cfg.get_num("hyperparams.inner_lr", hp.inner_lr);
  hp.outer_lr = cfg.get_num("hyperparams.outer_lr", hp.outer_lr);
  hp.global_batch = cfg.get_num("hyperparams.global_batch", hp.global_batch);
  hp.replicas = static_cast<int>(cfg.get_int("hyperparams.replicas", hp.replicas));
  hp.cadence = static_cast<int>(cfg.get_int("hyperparams.cadence", hp.cadence));
  hp.beta1 = cfg.get_num("hyperparams.beta1", hp.beta1);
  hp.beta2 = cfg.get_num("hyperparams.beta2", hp.beta2);
  hp.warmup_steps =
      static_cast<int>(cfg.get_int("hyperparams.warmup_steps", hp.warmup_steps));
  hp.final_lr_frac = cfg.get_num("hyperparams.final_lr_frac", hp.final_lr_frac);
  hp.clip_norm = cfg.get_num("hyperparams.clip_norm", hp.clip_norm);
  hp.weight_decay = cfg.get_num("hyperparams.weight_decay", hp.weight_decay);
  hp.outer_momentum = cfg.get_num("hyperparams.outer_momentum", hp.outer_momentum);
  return hp;
}

std::vector<double> parse_num_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(std::stod(cell));
  }
  return out;
}

void print_series(const std::vector<SeriesPoint>& pts) {
  std::cout << "schema=dlab-table-v1\nx,y,series\n";
  for (const auto& p : pts) {
    std::cout << p.x << "," << p.y << "," << p.series << "\n";
  }
}

int cmd_train(const std::string& config_path, bool force) {
  Config cfg = Config::parse_file(config_path);
  auto obj = make_objective(cfg);
  RunConfig rc;
  rc.algorithm = algorithm_from_string(cfg.get_str("run.algorithm", "data-parallel"));
  rc.n = cfg.get_num("run.n", static_cast<double>(obj->dim()));
  rc.tokens_d = cfg.get_num("run.tokens_d");
  rc.hp = hyperparams_from(cfg);
  rc.seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 0));
  rc.eval_batch = static_cast<std::size_t>(cfg.get_int("run.eval_batch", 256));
  rc.eval_every = cfg.get_int("run.eval_every", 0);
  rc.repartition_per_step = cfg.get_bool("run.repartition_per_step", false);
  rc.parallel_replicas = cfg.get_bool("run.parallel_replicas", false);
  RunRecord rec = train(*obj, rc);
  if (rec.status != "ok") {
    std::cerr << "run diverged at step " << rec.loss_curve.back().first << "\n";
    return 2;
  }
  std::string store_path = cfg.get_str("run.store", "");
  if (!store_path.empty()) {
    RunStore store{store_path};
    bool added = store.put(rec, force);
    std::cout << (added ? "stored" : "skipped (key exists; use --force)")
              << " record in " << store_path << "\n";
  }
  std::cout << "algorithm=" << rec.algorithm << " T=" << rec.t_steps
            << " final_loss=" << rec.final_loss << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, bool concurrent, bool force) {
  Config cfg = Config::parse_file(config_path);
  auto obj = make_objective(cfg);
  SweepSpec spec;
  spec.algorithms.clear();
  {
    std::stringstream ss(cfg.get_str("sweep.algorithms", "data-parallel,diloco"));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty()) spec.algorithms.push_back(algorithm_from_string(cell));
    }
  }
  spec.n_values = parse_num_list(cfg.get_str("sweep.n_values"));
  auto to_ints = [](const std::vector<double>& v) {
    std::vector<int> out;
    for (double x : v) out.push_back(static_cast<int>(x));
    return out;
  };
  spec.m_values = to_ints(parse_num_list(cfg.get_str("sweep.m_values", "1")));
  spec.h_values = to_ints(parse_num_list(cfg.get_str("sweep.h_values", "30")));
  spec.inner_lrs = parse_num_list(cfg.get_str("sweep.inner_lrs"));
  spec.batches = parse_num_list(cfg.get_str("sweep.batches"));
  spec.outer_lrs =
      parse_num_list(cfg.get_str("sweep.outer_lrs", "0.2,0.4,0.6,0.8,1.0"));
  std::vector<std::uint64_t> seeds;
  for (double s : parse_num_list(cfg.get_str("sweep.seeds", "0"))) {
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  spec.seeds = seeds;
  spec.tokens_per_n = cfg.get_num("sweep.tokens_per_n", 20.0);
  spec.warmup_steps = static_cast<int>(cfg.get_int("sweep.warmup_steps", 10));

  RunStore store{cfg.get_str("sweep.store")};
  run_sweep(spec, *obj, store, concurrent, force);
  auto best = best_per_group(store.all(), spec);
  std::cout << "schema=dlab-table-v1\nalgorithm,n,m,b,gamma,eta,loss,boundary_warning\n";
  for (const auto& [key, entry] : best) {
    const RunRecord& r = entry.record;
    std::cout << r.algorithm << "," << r.n << "," << r.m << "," << r.b << ","
              << r.gamma << "," << r.eta << "," << r.final_loss << ","
              << (entry.boundary_optimum ? "yes" : "no") << "\n";
  }
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& kind, int form,
            double holdout_n, int restarts, double delta, std::uint64_t seed) {
  auto rows = load_loss_rows(data_path);
  if (kind == "power") {
    auto fit = fit_power_law(data_parallel_observations(rows));
    std::cout << "schema=dlab-table-v1\nquantity,a,alpha,rms_log_residual\n";
    std::cout << "loss," << fit.a << "," << fit.alpha << ","
              << fit.rms_log_residual << "\n";
    return 0;
  }
  if (kind == "joint") {
    auto fit = fit_joint_power_law(diloco_observations(rows));
    std::cout << "schema=dlab-table-v1\nquantity,a,alpha,beta,rms_log_residual\n";
    std::cout << "loss," << fit.a << "," << fit.alpha << "," << *fit.beta << ","
              << fit.rms_log_residual << "\n";
    return 0;
  }
  if (kind == "loo") {
    auto loo = loo_validate(diloco_observations(rows), holdout_n, FitKind::kJoint);
    std::cout << "schema=dlab-table-v1\nm,residual\n";
    for (const auto& [m, r] : loo.residual_per_m) {
      std::cout << m << "," << r << "\n";
    }
    std::cout << "average," << loo.average << "\n";
    return 0;
  }
  if (kind == "parametric") {
    auto [train_set, hold] = split_holdout(diloco_observations(rows), holdout_n);
    std::cout << "schema=dlab-table-v1\nform,a,alpha,beta,b,c,holdout_avg_residual\n";
    auto run_form = [&](int f) {
      auto fit = fit_parametric(f, train_set, hold, restarts, delta, seed);
      std::cout << f << "," << fit.a << "," << fit.alpha << "," << fit.beta
                << "," << fit.b << "," << fit.c << ","
                << fit.heldout_avg_residual << "\n";
    };
    if (form == 0) {
      for (int f = 1; f <= 4; ++f) run_form(f);
    } else {
      run_form(form);
    }
    return 0;
  }
  std::cerr << "unknown fit kind: " << kind << "\n";
  return 1;
}

int cmd_cost(const std::string& scenario_path) {
  Config cfg = Config::parse_file(scenario_path);
  Algorithm algo = algorithm_from_string(cfg.get_str("scenario.algorithm", "diloco"));
  int m = static_cast<int>(cfg.get_int("scenario.m", 2));
  double n = cfg.get_num("scenario.n");
  double bits = cfg.get_num("scenario.bits_per_param", 16);
  double r = cfg.get_num("scenario.chips_r", 64);
  NetworkProfile within = archetype(cfg.get_str("scenario.within", "high"));
  std::string mode = cfg.get_str("scenario.mode", "bandwidth");
  std::vector<int> hs;
  for (double h : parse_num_list(cfg.get_str("scenario.h_values", "1,10,50,100,300"))) {
    hs.push_back(static_cast<int>(h));
  }
  if (mode == "bandwidth") {
    double step_time = cfg.get_num("scenario.step_time_s");
    double cross_eps = cfg.get_num("scenario.cross_latency_eps", 1e-4);
    bool snap = cfg.get_bool("scenario.snap_to_grid", false);
    auto targets = parse_num_list(
        cfg.get_str("scenario.targets", "0.5,0.8,0.9,0.95,0.99"));
    std::cout << "schema=dlab-table-v1\nmethod,h";
    for (double t : targets) std::cout << ",cu_" << t;
    std::cout << "\n";
    auto emit_row = [&](const std::string& label, Algorithm a, int hh) {
      std::cout << label << "," << hh;
      for (double t : targets) {
        auto req = required_bandwidth(t, step_time, a, m, n, bits, hh, r,
                                      within, cross_eps, snap);
        if (req.feasible) {
          std::cout << "," << req.bandwidth_w / 1e9;  // Gbit/s
        } else {
          std::cout << ",infeasible";
        }
      }
      std::cout << "\n";
    };
    emit_row("data-parallel", Algorithm::kDataParallel, 1);
    for (int h : hs) emit_row("diloco", Algorithm::kDiLoCo, h);
    return 0;
  }
  if (mode == "wallclock") {
    HardwareProfile hw;
    hw.chips_r = r;
    hw.flops_per_chip_q = cfg.get_num("scenario.flops_per_chip_q", 3e14);
    hw.bits_per_param = bits;
    NetworkProfile cross = archetype(cfg.get_str("scenario.cross", "low"));
    WallclockInput in;
    in.algorithm = algo;
    in.m = m;
    in.n = n;
    in.tokens_d = cfg.get_num("scenario.tokens_d", token_budget(n));
    in.t_steps = cfg.get_num("scenario.t_steps");
    std::cout << "schema=dlab-table-v1\nh,compute_s,comm_inner_s,comm_outer_s,total_s,utilization\n";
    for (int h : hs) {
      in.h = h;
      auto cb = wallclock(in, hw, within, cross);
      std::cout << h << "," << cb.compute_s << "," << cb.comm_inner_s << ","
                << cb.comm_outer_s << "," << cb.total_s << ","
                << cb.utilization << "\n";
    }
    return 0;
  }
  std::cerr << "unknown cost mode: " << mode << "\n";
  return 1;
}

int cmd_report(const std::string& figure, const std::string& data_path,
               const std::string& store_path) {
  if (figure == "pct-diff") {
    if (data_path.empty()) {
      std::cerr << "pct-diff requires --data\n";
      return 1;
    }
    auto rows = load_loss_rows(data_path);
    auto series = pct_diff_series(rows);
    if (series.empty()) std::cerr << "warning: no data; empty report\n";
    print_series(series);
    return 0;
  }
  if (figure == "best-olr") {
    if (store_path.empty()) {
      std::cerr << "best-olr requires --store\n";
      return 1;
    }
    RunStore store{store_path};
    auto series = best_outer_lr_series(store.all());
    if (series.empty()) std::cerr << "warning: no data; empty report\n";
    print_series(series);
    return 0;
  }
  std::cerr << "unknown figure: " << figure << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale lab for low-communication distributed training"};
  app.require_subcommand(1);

  std::string config_path, data_path, store_path, fit_kind = "power",
                                                  figure = "pct-diff";
  std::string scenario_path;
  bool force = false, concurrent = false;
  int form = 0, restarts = 256;
  double holdout_n = 2.4e9, delta = 1e-3;
  std::uint64_t seed = 7;

  auto* train_cmd = app.add_subcommand("train", "run one training experiment");
  train_cmd->add_option("--config", config_path, "run config file")->required();
  train_cmd->add_flag("--force", force, "overwrite an existing store entry");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a hyperparameter sweep");
  sweep_cmd->add_option("--config", config_path, "sweep config file")->required();
  sweep_cmd->add_flag("--concurrent", concurrent, "run grid points concurrently");
  sweep_cmd->add_flag("--force", force, "rerun completed grid points");

  auto* fit_cmd = app.add_subcommand("fit", "fit scaling laws to loss data");
  fit_cmd->add_option("--data", data_path, "loss table (csv)")->required();
  fit_cmd->add_option("--kind", fit_kind, "power | joint | loo | parametric");
  fit_cmd->add_option("--form", form, "parametric form 1..4 (0 = all)");
  fit_cmd->add_option("--holdout-n", holdout_n, "held-out model size");
  fit_cmd->add_option("--restarts", restarts, "random restarts");
  fit_cmd->add_option("--delta", delta, "Huber delta");
  fit_cmd->add_option("--seed", seed, "master seed for restarts");

  auto* cost_cmd = app.add_subcommand("cost", "wall-clock / bandwidth model");
  cost_cmd->add_option("--scenario", scenario_path, "scenario file")->required();

  auto* report_cmd = app.add_subcommand("report", "emit plot-data series");
  report_cmd->add_option("--figure", figure, "pct-diff | best-olr");
  report_cmd->add_option("--data", data_path, "bundled loss table");
  report_cmd->add_option("--store", store_path, "run-record store");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, force);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, concurrent, force);
    if (fit_cmd->parsed()) {
      return cmd_fit(data_path, fit_kind, form, holdout_n, restarts, delta, seed);
    }
    if (cost_cmd->parsed()) return cmd_cost(scenario_path);
    if (report_cmd->parsed()) return cmd_report(figure, data_path, store_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
