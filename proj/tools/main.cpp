// Experiment driver for the discrete flow matching toolkit.
//
// Subcommands:
//   verify        run the full lemma/property suite for one configured
//                 instance; JSON report; exit 1 on any violation
//   kernels-check run the transition-kernel suite alone
//   sample        Monte Carlo DMPM paths; final_states.csv (+ events.csv)
//   sweep         exact KL/TV metrics over (h, eta, gamma) lists
//   train         full-batch tabular score training; table + history CSV
//
// Exit codes: 0 success, 1 check failure, 2 usage or config error.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "dfm/checks.hpp"
#include "dfm/io.hpp"
#include "dfm/losses.hpp"
#include "dfm/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;  // 0 = all hardware threads
};

int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path path(dir);
  if (!fs::exists(path)) fs::create_directories(path);
  return path;
}

json report_to_json(const std::vector<dfm::CheckResult>& results, std::uint64_t master_seed) {
  json checks = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    checks.push_back({{"name", r.name},
                      {"measured", r.measured},
                      {"bound", r.bound},
                      {"pass", r.pass}});
    all_pass = all_pass && r.pass;
  }
  return {{"master_seed", master_seed}, {"all_pass", all_pass}, {"checks", checks}};
}

int emit_report(const std::vector<dfm::CheckResult>& results, std::uint64_t seed,
                const fs::path& out_file) {
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name
              << "  measured=" << dfm::format_double(r.measured)
              << " bound=" << dfm::format_double(r.bound) << "\n";
    all_pass = all_pass && r.pass;
  }
  std::ofstream out(out_file);
  out << report_to_json(results, seed).dump(2) << "\n";
  std::cout << (all_pass ? "all checks passed" : "CHECK FAILURES PRESENT") << " -> "
            << out_file.string() << "\n";
  return all_pass ? kExitSuccess : kExitCheckFailure;
}

int cmd_verify(const CommonArgs& args) {
  const auto cfg = dfm::ExperimentConfig::load(args.config_path);
  const auto results = dfm::run_verify_suite(cfg, effective_threads(args.threads));
  return emit_report(results, cfg.seed, prepare_out_dir(args.out_dir) / "verify_report.json");
}

int cmd_kernels_check(const CommonArgs& args) {
  const auto cfg = dfm::ExperimentConfig::load(args.config_path);
  const auto results = dfm::run_kernel_suite(cfg.make_dynamics(), cfg.seed);
  return emit_report(results, cfg.seed, prepare_out_dir(args.out_dir) / "kernels_report.json");
}

int cmd_sample(const CommonArgs& args) {
  const auto cfg = dfm::ExperimentConfig::load(args.config_path);
  const auto inst = dfm::build_instance(cfg);
  const auto& mu0 = inst.engine->coupling().coupling().mu0();
  const auto paths = dfm::sample_paths(*inst.model, inst.grid, inst.dyn, mu0, cfg.paths, cfg.seed,
                                       effective_threads(args.threads));
  const fs::path out = prepare_out_dir(args.out_dir);

  dfm::CsvWriter finals("path_id,final_index", cfg.seed);
  for (const auto& p : paths) {
    finals.add_row({std::to_string(p.path_id), std::to_string(p.final_state)});
  }
  finals.write((out / "final_states.csv").string());

  if (cfg.dump_events) {
    dfm::CsvWriter events("path_id,time,from_index,jump_family,jump_axis,jump_param,to_index",
                          cfg.seed);
    const auto& ops = inst.engine->jumps().ops();
    const char* family =
        cfg.dynamics == dfm::DynamicsKind::kNearestNeighbor ? "nnrw" : "urw";
    for (const auto& p : paths) {
      for (const auto& e : p.events) {
        const dfm::JumpOp& op = ops[e.op_id];
        events.add_row({std::to_string(p.path_id), dfm::format_double(e.time),
                        std::to_string(e.from), family, std::to_string(op.axis + 1),
                        std::to_string(op.param), std::to_string(e.to)});
      }
    }
    events.write((out / "events.csv").string());
  }
  std::cout << "wrote " << paths.size() << " paths -> " << (out / "final_states.csv").string()
            << "\n";
  return kExitSuccess;
}

int cmd_sweep(const CommonArgs& args) {
  const auto cfg = dfm::ExperimentConfig::load(args.config_path);
  if (!cfg.sweep.has_value()) {
    throw dfm::InputError("sweep: config has no sweep lists");
  }
  const dfm::SweepLists& lists = *cfg.sweep;
  const dfm::Dynamics dyn = cfg.make_dynamics();
  auto engine = std::make_shared<dfm::ScoreEngine>(dfm::reweight(cfg.make_coupling(), dyn));
  const auto& mu0 = engine->coupling().coupling().mu0();
  const dfm::MarginalDist mu_target = engine->marginal(1.0);

  dfm::CsvWriter csv("h,eta,gamma,eps_tilde,K,kl,tv_early,tv_target,runtime_ms", cfg.seed);
  for (const double h : lists.h) {
    for (const double eta : lists.eta) {
      for (const double gamma : lists.gamma) {
        const auto started = std::chrono::steady_clock::now();
        try {
          const dfm::TimeGrid grid = dfm::build_grid(h, eta);
          const dfm::PerturbedScoreModel model(engine, grid, gamma, cfg.seed);
          const double eps = dfm::epsilon_tilde(dfm::make_score_fn(model), *engine, grid);
          const dfm::MarginalDist law = dfm::algorithm_law(model, grid, dyn, mu0);
          const dfm::MarginalDist mu_early = engine->marginal(1.0 - eta);
          const double kl = dfm::kl_divergence(mu_early, law);
          const double tv_early = dfm::tv_distance(law, mu_early);
          const double tv_target = dfm::tv_distance(law, mu_target);
          if (!std::isinf(kl) && tv_early > std::sqrt(0.5 * kl) + 1e-12) {
            throw dfm::NumericError("sweep: Pinsker cross-check failed");
          }
          const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::steady_clock::now() - started);
          csv.add_row({dfm::format_double(h), dfm::format_double(eta), dfm::format_double(gamma),
                       dfm::format_double(eps), std::to_string(grid.interval_count),
                       dfm::format_double(kl), dfm::format_double(tv_early),
                       dfm::format_double(tv_target),
                       std::to_string(static_cast<long long>(elapsed.count()))});
        } catch (const dfm::CapacityError&) {
          csv.add_row({dfm::format_double(h), dfm::format_double(eta), dfm::format_double(gamma),
                       "skipped", "skipped", "skipped", "skipped", "skipped", "skipped"});
        }
      }
    }
  }
  const fs::path out_file = prepare_out_dir(args.out_dir) / "sweep.csv";
  csv.write(out_file.string());
  std::cout << "wrote sweep -> " << out_file.string() << "\n";
  return kExitSuccess;
}

int cmd_train(const CommonArgs& args, double lr, int steps) {
  const auto cfg = dfm::ExperimentConfig::load(args.config_path);
  const dfm::Dynamics dyn = cfg.make_dynamics();
  auto engine = std::make_shared<dfm::ScoreEngine>(dfm::reweight(cfg.make_coupling(), dyn));
  const dfm::TimeGrid grid = dfm::build_grid(cfg.h, cfg.eta);

  dfm::TabularScore init =
      cfg.score == dfm::ScoreVariant::kTabular
          ? dfm::TabularScore::load(cfg.tabular_path, cfg.lattice(), cfg.dynamics)
          : dfm::TabularScore::snapshot(*engine, grid, cfg.gamma, cfg.seed);

  const auto result = dfm::train_tabular(*engine, grid, std::move(init), lr, steps);

  const fs::path out = prepare_out_dir(args.out_dir);
  result.theta.save((out / "theta.json").string());
  dfm::CsvWriter history("step,l_entropy,l_two,l_total", cfg.seed);
  for (const auto& rec : result.history) {
    history.add_row({std::to_string(rec.step), dfm::format_double(rec.l_entropy),
                     dfm::format_double(rec.l_two), dfm::format_double(rec.l_total)});
  }
  history.write((out / "train_history.csv").string());
  std::cout << "final loss " << dfm::format_double(result.history.back().l_total) << " after "
            << result.history.back().step << " steps -> " << (out / "theta.json").string()
            << "\n";
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete flow matching on Z_m^d: exact kernels, scores, DMPM sampling"};
  app.require_subcommand(1);

  CommonArgs args;
  double train_lr = 5.0;
  int train_steps = 500;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
    cmd->add_option("--out", args.out_dir, "output directory (default: .)");
    cmd->add_option("--threads", args.threads, "worker threads (default: all)");
  };

  CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
  add_common(verify);
  CLI::App* kernels = app.add_subcommand("kernels-check", "run the kernel suite alone");
  add_common(kernels);
  CLI::App* sample = app.add_subcommand("sample", "simulate DMPM paths");
  add_common(sample);
  CLI::App* sweep = app.add_subcommand("sweep", "exact metrics over (h, eta, gamma) lists");
  add_common(sweep);
  CLI::App* train = app.add_subcommand("train", "train a tabular score");
  add_common(train);
  train->add_option("--lr", train_lr, "learning rate (default 5)");
  train->add_option("--steps", train_steps, "gradient steps (default 500)");

  try {
    app.parse(argc, argv);
    if (verify->parsed()) return cmd_verify(args);
    if (kernels->parsed()) return cmd_kernels_check(args);
    if (sample->parsed()) return cmd_sample(args);
    if (sweep->parsed()) return cmd_sweep(args);
    if (train->parsed()) {
      if (train_lr <= 0.0) {
        std::cerr << "error: --lr must be positive\n";
        return kExitUsage;
      }
      if (train_steps < 1) {
        std::cerr << "error: --steps must be >= 1\n";
        return kExitUsage;
      }
      return cmd_train(args, train_lr, train_steps);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitSuccess : kExitUsage;
  } catch (const dfm::InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dfm::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
  return kExitUsage;
}
