// Command-line front end.
//
//   deadrelu schedule --kappa 0.5 --p 0.5 --widths 1,2,3
//   deadrelu mc-prob --arch [1,1,1,1] --c 2 --samples 100000
//   deadrelu classify --arch [1,2,2,1] --theta [...]
//   deadrelu gradcheck --arch [2,3,1] --seed 7
//   deadrelu train --config train.json
//   deadrelu reproduce --out out/ [--config experiment.json]
//   deadrelu verify-bounds
//
// DEADRELU_SEED overrides the master seed, DEADRELU_THREADS the worker count.
// Exit code is 1 when a pass/fail check fails, 2 on usage or input errors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deadrelu/deadrelu.hpp"
#include "deadrelu/verify.hpp"

namespace {

using nlohmann::json;
using namespace deadrelu;

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return json::parse(is);
}

Architecture parse_arch(const std::string& text) { return architecture_from_json(json::parse(text)); }

ParamVector load_theta(const Architecture& arch, const std::string& inline_json,
                       const std::string& file) {
  if (!file.empty()) {
    if (std::filesystem::path(file).extension() == ".bin") {
      std::ifstream is(file, std::ios::binary);
      if (!is) throw std::runtime_error("cannot open " + file);
      return ParamVector(arch, read_binary(is));
    }
    return param_vector_from_json(arch, read_json_file(file));
  }
  if (inline_json.empty()) throw std::invalid_argument("give --theta or --theta-file");
  return param_vector_from_json(arch, json::parse(inline_json));
}

int cmd_schedule(double kappa, double p, const std::vector<std::size_t>& widths) {
  std::cout << "W,D,N,certified,bound_value\n";
  for (const auto& e : make_schedule(widths, kappa, p)) {
    std::cout << e.W << ',';
    if (e.feasible) {
      std::cout << e.D;
    } else {
      std::cout << "inf";
    }
    std::cout << ',' << e.N << ',' << (e.certified ? "true" : "false") << ','
              << format_double(e.bound_value) << '\n';
  }
  return 0;
}

int cmd_mc_prob(const std::string& arch_text, double c, const std::string& init_file,
                std::size_t samples, std::uint64_t seed, std::size_t audit) {
  const Architecture arch = parse_arch(arch_text);
  const InitSpec init = init_file.empty() ? InitSpec::uniform(c) : init_from_json(read_json_file(init_file));
  McAuditOptions opts;
  opts.trajectories = audit;
  const McInactivity res = mc_inactivity(arch, init, samples, seed_from_env(seed), opts);
  json out = to_json(res);
  out["arch"] = to_json(arch);
  std::cout << out.dump(2) << '\n';
  return res.within_4_sigma && res.persistence_ok ? 0 : 1;
}

int cmd_classify(const std::string& arch_text, const std::string& theta_json,
                 const std::string& theta_file) {
  const Architecture arch = parse_arch(arch_text);
  const ParamVector theta = load_theta(arch, theta_json, theta_file);
  json out = to_json(classify(theta));
  out["arch"] = to_json(arch);
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_gradcheck(const std::string& arch_text, std::uint64_t seed, std::size_t batch_size,
                  const std::string& readout, double h, double scale) {
  const Architecture arch = parse_arch(arch_text);
  const ReadOut ro = readout_from_json(json(readout));
  Rng rng(seed_from_env(seed));
  ParamVector theta(arch);
  for (double& v : theta.values()) v = rng.uniform(-scale, scale);
  const DataModel data = make_data_model({"coordinate-mean", arch.input_dim()});
  const Batch batch = data.sample_batch(batch_size, rng);
  const GradReport g = risk_gradient(theta, batch, ro);
  const auto fd = finite_diff_gradient(arch, theta.values(), batch, ro, h);
  const double err = max_norm_relative_error(g.gradient, fd);
  json out{{"arch", to_json(arch)},
           {"theta", to_json(theta)},
           {"report", to_json(g)},
           {"finite_difference", fd},
           {"h", h},
           {"max_norm_relative_error", err},
           {"kinks", g.any_kink()}};
  const bool ok = g.any_kink() || err < 1e-6;
  out["pass"] = ok;
  std::cout << out.dump(2) << '\n';
  return ok ? 0 : 1;
}

int cmd_train(const std::string& config_file, const std::string& data_name, std::size_t dim,
              const std::string& save_stem, std::size_t validation_size) {
  TrainConfig cfg = config_file.empty() ? TrainConfig{} : train_config_from_json(read_json_file(config_file));
  cfg.seed = seed_from_env(cfg.seed);
  const DataModel data = make_data_model({data_name, dim});
  const TrajectorySet ts = run_all(cfg, data, 0, thread_count_from_env(1));
  Rng vrng = make_rng(SeedPath{cfg.seed, 0, 0, 0}, StreamRole::validation);
  const Batch validation = data.sample_batch(validation_size == 0 ? cfg.M : validation_size, vrng);
  const Selection sel = select_best(ts, validation, cfg.cube_c, cfg.readout);
  Rng rrng = make_rng(SeedPath{cfg.seed, 0, 0, 0}, StreamRole::true_risk);
  const TrueRisk tr = estimate_true_risk(cfg.arch, sel.theta.values(), data, cfg.readout, 10000, rrng);

  json per_traj = json::array();
  for (std::size_t n = 1; n <= ts.N(); ++n) {
    const auto& traj = ts.iterates[n - 1];
    per_traj.push_back({{"n", n},
                        {"initial_validation_risk", empirical_risk(traj.front(), validation, cfg.readout)},
                        {"final_validation_risk", empirical_risk(traj.back(), validation, cfg.readout)},
                        {"initially_inactive", classify(traj.front()).inactive}});
  }
  json out{{"config", to_json(cfg)},
           {"selection",
            {{"n", sel.n},
             {"t", sel.t},
             {"validation_risk", sel.risk},
             {"fallback", sel.fallback},
             {"inactive", classify(sel.theta).inactive},
             {"theta", to_json(sel.theta)}}},
           {"true_risk", {{"value", tr.value}, {"exact", tr.exact}, {"half_width", tr.half_width}}},
           {"trajectories", per_traj},
           {"persistence_audit", persistence_audit(ts)},
           {"recursion_audit", recursion_audit(ts, cfg, data)}};
  if (!save_stem.empty()) {
    save_trajectories(ts, save_stem);
    out["saved"] = save_stem;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_reproduce(const std::string& config_file, const std::string& out_dir, std::uint64_t seed,
                  std::size_t threads, std::size_t replicates) {
  ExperimentConfig cfg =
      config_file.empty() ? default_experiment() : experiment_config_from_json(read_json_file(config_file));
  if (seed != 0) cfg.train.seed = seed;
  cfg.train.seed = seed_from_env(cfg.train.seed);
  cfg.threads = threads != 0 ? threads : thread_count_from_env(1);
  if (replicates != 0) cfg.replicates = replicates;

  std::filesystem::create_directories(out_dir);
  const auto partial = std::filesystem::path(out_dir) / "partial.csv";
  std::ofstream progress(partial);
  progress << kReplicateCsvHeader << '\n';
  const ExperimentReport rep = run_experiment(cfg, [&](const ReplicateRecord& r) {
    progress << r.replicate << ',' << r.n << ',' << r.t << ',' << (r.in_inactive_region ? 1 : 0)
             << ',' << format_double(r.risk) << ',' << format_double(r.capped_risk) << '\n'
             << std::flush;
  });
  progress.close();
  std::filesystem::remove(partial);

  const ReportPaths paths = emit_report(rep, out_dir);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "V_hat = " << rep.v_hat << "  (se " << rep.v_se << ", R = " << rep.records.size() << ")\n"
            << "kappa bound kappa*min(C,1)   = " << rep.kappa_bound
            << (rep.kappa_applicable ? (rep.kappa_pass ? "  PASS" : "  FAIL") : "  (not asserted)") << '\n'
            << "exact-probability bound      = " << rep.exact_bound << (rep.exact_bound_pass ? "  PASS" : "  FAIL") << '\n'
            << "all-inits-inactive frequency = " << rep.all_inactive_freq << " vs " << rep.prob_all_exact
            << (rep.frequency_pass ? "  PASS" : "  FAIL") << '\n'
            << "consistency (inactive risk >= floor) " << (rep.consistency_pass ? "PASS" : "FAIL") << '\n'
            << "wrote " << paths.replicates_csv.string() << ", " << paths.summary_json.string() << ", "
            << paths.curves_csv.string() << '\n';
  return rep.passed() ? 0 : 1;
}

int cmd_verify_bounds(std::uint64_t seed, std::size_t trials) {
  const json rep = verify_bounds(seed_from_env(seed), trials);
  std::cout << rep.dump(2) << '\n';
  return rep.at("passed").get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inactive-region analysis and SGD non-convergence experiments for ReLU networks"};
  app.require_subcommand(1);

  double kappa = 0.5, p = 0.5;
  std::vector<std::size_t> widths{1, 2, 3};
  auto* schedule = app.add_subcommand("schedule", "Emit (W, D, N) schedule entries as CSV");
  schedule->add_option("--kappa", kappa, "Target probability level in (0,1)");
  schedule->add_option("--p", p, "Lower bound on P(coordinate < 0)");
  schedule->add_option("--widths", widths, "Hidden widths")->delimiter(',');

  std::string arch = "[1,1,1,1,1,1,1,1,1]";
  double c = 2.0;
  std::string init_file;
  std::size_t samples = 100000, audit = 0;
  std::uint64_t seed = 1;
  auto* mc = app.add_subcommand("mc-prob", "Monte Carlo estimate of P(init in I_a)");
  mc->add_option("--arch", arch, "Architecture as a JSON array");
  mc->add_option("--c", c, "Uniform init half-width");
  mc->add_option("--init", init_file, "Init spec JSON file (overrides --c)");
  mc->add_option("--samples", samples);
  mc->add_option("--seed", seed);
  mc->add_option("--audit", audit, "Train from up to this many inactive draws and re-audit");

  std::string theta_json, theta_file;
  auto* cls = app.add_subcommand("classify", "Report which layers of theta are inactive");
  cls->add_option("--arch", arch)->required();
  cls->add_option("--theta", theta_json, "Parameters as a JSON array");
  cls->add_option("--theta-file", theta_file, "JSON array file or .bin blob");

  std::size_t batch_size = 8;
  std::string readout = "clip";
  double h = 1e-5, scale = 1.0;
  auto* gc = app.add_subcommand("gradcheck", "Compare backprop with central differences");
  gc->add_option("--arch", arch);
  gc->add_option("--seed", seed);
  gc->add_option("--batch", batch_size);
  gc->add_option("--readout", readout)->check(CLI::IsMember({"clip", "identity"}));
  gc->add_option("--step", h, "Finite-difference step");
  gc->add_option("--scale", scale, "theta ~ U[-scale, scale]");

  std::string config_file, data_name = "linear-1d", save_stem;
  std::size_t dim = 1, validation_size = 0;
  auto* train = app.add_subcommand("train", "Run N SGD trajectories and select the best iterate");
  train->add_option("--config", config_file, "Training config JSON");
  train->add_option("--data", data_name)->check(CLI::IsMember({"linear-1d", "coordinate-mean", "bernoulli-linear"}));
  train->add_option("--dim", dim);
  train->add_option("--save", save_stem, "Persist trajectories to <stem>.bin/.json");
  train->add_option("--validation-size", validation_size);

  std::string out_dir = "reproduce_out";
  std::uint64_t repro_seed = 0;
  std::size_t threads = 0, replicates = 0;
  auto* repro = app.add_subcommand("reproduce", "Replicate the desk-scale non-convergence experiment");
  repro->add_option("--config", config_file, "Experiment config JSON (default experiment if omitted)");
  repro->add_option("--out", out_dir);
  repro->add_option("--seed", repro_seed, "Master seed (0 keeps the config's)");
  repro->add_option("--threads", threads);
  repro->add_option("--replicates", replicates);

  std::size_t trials = 1000;
  auto* vb = app.add_subcommand("verify-bounds", "Property-check the closed-form bounds");
  vb->add_option("--seed", seed);
  vb->add_option("--trials", trials);

  CLI11_PARSE(app, argc, argv);

  try {
    if (schedule->parsed()) return cmd_schedule(kappa, p, widths);
    if (mc->parsed()) return cmd_mc_prob(arch, c, init_file, samples, seed, audit);
    if (cls->parsed()) return cmd_classify(arch, theta_json, theta_file);
    if (gc->parsed()) return cmd_gradcheck(arch, seed, batch_size, readout, h, scale);
    if (train->parsed()) return cmd_train(config_file, data_name, dim, save_stem, validation_size);
    if (repro->parsed()) return cmd_reproduce(config_file, out_dir, repro_seed, threads, replicates);
    if (vb->parsed()) return cmd_verify_bounds(seed, trials);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
