// rlap: instance generation, training, decoding and benchmarks from one binary.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rlap/bench.hpp"
#include "rlap/selfcheck.hpp"

using namespace rlap;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::size_t parse_count(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw UsageError("expected a non-negative integer, got '" + text + "'");
  }
  if (pos != text.size() || text.front() == '-') throw UsageError("expected a non-negative integer, got '" + text + "'");
  return static_cast<std::size_t>(v);
}

// "1..10", "3", or "1,4,7".
std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const auto lo = parse_count(text.substr(0, dots));
    const auto hi = parse_count(text.substr(dots + 2));
    if (hi < lo) throw UsageError("empty k range '" + text + "'");
    for (auto k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
  }
  for (const auto& part : split(text, ',')) ks.push_back(parse_count(part));
  if (ks.empty()) throw UsageError("empty k list");
  return ks;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

nlohmann::json solution_json(const Solution& s) {
  nlohmann::json j = {{"assignment", s.assignment},
                      {"total_cost", s.total_cost},
                      {"objective", s.objective},
                      {"workers_used", s.workers_used},
                      {"optimal", s.optimal}};
  if (!s.routes.empty()) j["routes"] = s.routes;
  return j;
}

struct TrainArgs {
  std::string kind, config, out, log;
  std::size_t n = 0, episodes = 0, update_interval = 0;
  RngSeed seed = 0;
  bool clear_buffer = false;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (sub.count("--kind")) rc.kind = parse_kind(a.kind);
  if (sub.count("--n")) rc.n = a.n;
  if (sub.count("--episodes")) rc.train.episodes = a.episodes;
  if (sub.count("--seed")) rc.train.master_seed = a.seed;
  if (sub.count("--clear-buffer")) rc.train.clear_buffer = a.clear_buffer;
  if (sub.count("--update-interval")) rc.train.update_interval = a.update_interval;
  if (!rc.kind) throw UsageError("train: --kind is required (flag or run-config)");
  if (!rc.n) throw UsageError("train: --n is required (flag or run-config)");
  rc.train.validate();

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw UsageError("cannot write '" + a.log + "'");
  }
  auto on_record = [&](const TrainRecord& r) {
    if (!log) return;
    nlohmann::json j = {{"episode", r.episode},       {"mean_reward", r.mean_reward}, {"actor_loss", r.actor_loss},
                        {"critic_loss", r.critic_loss}, {"clip_fraction", r.clip_fraction}};
    j["eval_objective"] = r.eval_objective ? nlohmann::json(*r.eval_objective) : nlohmann::json(nullptr);
    j["eval_gap"] = r.eval_gap ? nlohmann::json(*r.eval_gap) : nlohmann::json(nullptr);
    log << j.dump() << '\n';
  };
  const auto run = train_policy(*rc.kind, *rc.n, rc, on_record);
  save_checkpoint(a.out, run.checkpoint);
  std::cerr << "trained " << to_string(*rc.kind) << *rc.n << " for " << rc.train.episodes << " episodes in " << run.seconds
            << " s; best eval objective "
            << (run.checkpoint.best_eval ? std::to_string(*run.checkpoint.best_eval) : std::string("n/a")) << " at episode "
            << (run.checkpoint.best_episode ? std::to_string(*run.checkpoint.best_episode) : std::string("n/a"))
            << "; params " << hex64(parameter_hash(run.checkpoint.params)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked actor-critic PPO for capacitated assignment, bin packing and routing"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a random instance");
  std::string gen_kind, gen_cfg, gen_out;
  std::size_t gen_n = 0;
  RngSeed gen_seed = 0;
  gen->add_option("--kind", gen_kind, "ap | bin | vrp")->required();
  gen->add_option("--n", gen_n, "tasks / items / customers")->required();
  gen->add_option("--seed", gen_seed, "instance seed")->required();
  gen->add_option("--cfg", gen_cfg, "run-config file (its gen section is used)");
  gen->add_option("--out", gen_out, "output path, - for stdout")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a policy on one instance family");
  TrainArgs targs;
  tr->add_option("--kind", targs.kind, "ap | bin | vrp");
  tr->add_option("--n", targs.n, "entity count");
  tr->add_option("--episodes", targs.episodes, "training episodes");
  tr->add_option("--seed", targs.seed, "master seed (also fixes the family's base instance)");
  tr->add_option("--config", targs.config, "run-config file; flags given here take precedence");
  tr->add_option("--out", targs.out, "checkpoint path")->required();
  tr->add_option("--log", targs.log, "training log, one JSON record per episode");
  tr->add_flag("--clear-buffer", targs.clear_buffer, "empty the experience buffer after each update");
  tr->add_option("--update-interval", targs.update_interval, "episodes collected between updates");

  // solve
  auto* sv = app.add_subcommand("solve", "Decode one instance with a trained policy");
  std::string sv_policy, sv_instance, sv_report;
  bool sv_greedy = false, sv_sample = false;
  RngSeed sv_seed = 0;
  sv->add_option("--policy", sv_policy)->required();
  sv->add_option("--instance", sv_instance)->required();
  auto* g_flag = sv->add_flag("--greedy", sv_greedy, "argmax decoding (default)");
  sv->add_flag("--sample", sv_sample, "sample from the policy")->excludes(g_flag);
  sv->add_option("--seed", sv_seed, "sampling seed");
  sv->add_option("--report", sv_report, "output path, - for stdout")->default_val("-");

  // bench
  auto* bn = app.add_subcommand("bench", "Size sweep over rl / exact / greedy");
  std::string bn_kind = "ap", bn_sizes, bn_methods = "rl,exact,greedy", bn_policies, bn_format = "markdown", bn_out, bn_cfg;
  std::size_t bn_seeds = 5;
  bn->add_option("--kind", bn_kind)->default_val("ap");
  bn->add_option("--sizes", bn_sizes, "comma-separated sizes")->required();
  bn->add_option("--seeds", bn_seeds, "instances per size")->default_val(5);
  bn->add_option("--methods", bn_methods)->default_val("rl,exact,greedy");
  bn->add_option("--policies", bn_policies, "directory of checkpoints (required for rl)");
  bn->add_option("--format", bn_format, "csv | markdown | json-lines")->default_val("markdown");
  bn->add_option("--cfg", bn_cfg, "run-config file (gen section) for sizes without a policy");
  bn->add_option("--out", bn_out, "output path, - for stdout")->default_val("-");

  // perturb-eval
  auto* pe = app.add_subcommand("perturb-eval", "Re-decode cumulative +delta perturbations without retraining");
  std::string pe_policy, pe_instance, pe_k = "1..10", pe_format = "markdown", pe_out;
  TimeUnits pe_delta = 5;
  bool pe_oracle = false;
  std::optional<RngSeed> pe_select;
  pe->add_option("--policy", pe_policy)->required();
  pe->add_option("--instance", pe_instance)->required();
  pe->add_option("--k", pe_k, "range lo..hi or list")->default_val("1..10");
  pe->add_option("--delta", pe_delta)->default_val(5);
  pe->add_flag("--oracle", pe_oracle, "also run exact and greedy on every perturbation");
  pe->add_option("--select-seed", pe_select, "seeded entity selection instead of 0..k-1");
  pe->add_option("--format", pe_format)->default_val("markdown");
  pe->add_option("--out", pe_out)->default_val("-");

  // gradcheck / selftest
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  std::size_t gc_pairs = 100;
  RngSeed gc_seed = 1;
  gc->add_option("--pairs", gc_pairs)->default_val(100);
  gc->add_option("--seed", gc_seed)->default_val(1);
  app.add_subcommand("selftest", "Run the invariant suites at reduced size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*gen) {
      GenConfig cfg = gen_cfg.empty() ? GenConfig{} : load_run_config(gen_cfg).gen;
      const auto inst = generate_instance(parse_kind(gen_kind), gen_n, gen_seed, cfg);
      write_or_print(gen_out, serialize_instance(inst));
      return 0;
    }
    if (*tr) return cmd_train(targs, *tr);
    if (*sv) {
      const Checkpoint ckpt = load_checkpoint(sv_policy);
      const AnyInstance inst = parse_instance(read_text_file(sv_instance));
      if (kind_of(inst) != ckpt.kind) throw UsageError("instance kind does not match the checkpoint");
      Solution sol;
      double seconds = 0.0;
      if (sv_sample) {
        Rng rng(sv_seed);
        const auto t0 = std::chrono::steady_clock::now();
        const auto ep = collect_episode(ckpt.params, inst, ckpt.reward, rng, ActMode::kSample);
        seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sol = solution_from_state(inst, ep.final_state, ckpt.reward);
        validate_solution(inst, sol, ckpt.reward);
      } else {
        const auto ts = evaluate_pretrained(ckpt.params, inst, ckpt.reward);
        if (!ts.feasible) throw DeadEndError(ts.note);
        sol = ts.solution;
        seconds = ts.seconds;
      }
      auto j = solution_json(sol);
      j["mode"] = sv_sample ? "sample" : "greedy";
      j["solve_time_seconds"] = seconds;
      j["policy_hash"] = hex64(parameter_hash(ckpt.params));
      write_or_print(sv_report, j.dump(2) + "\n");
      return 0;
    }
    if (*bn) {
      BenchConfig cfg;
      cfg.kind = parse_kind(bn_kind);
      for (const auto& s : split(bn_sizes, ',')) cfg.sizes.push_back(parse_count(s));
      cfg.seeds = bn_seeds;
      cfg.methods.clear();
      for (const auto& m : split(bn_methods, ',')) cfg.methods.push_back(parse_method(m));
      if (!bn_cfg.empty()) cfg.gen = load_run_config(bn_cfg).gen;
      if (!bn_policies.empty()) cfg.policies = load_policies(bn_policies, cfg.kind);
      const auto format = parse_format(bn_format);
      write_or_print(bn_out, emit_report(run_benchmark(cfg), format));
      return 0;
    }
    if (*pe) {
      const Checkpoint ckpt = load_checkpoint(pe_policy);
      const AnyInstance inst = parse_instance(read_text_file(pe_instance));
      const auto format = parse_format(pe_format);
      std::cerr << "policy " << hex64(parameter_hash(ckpt.params)) << " (same weights for every k)\n";
      const auto report = perturb_eval(ckpt, inst, parse_k_list(pe_k), pe_delta, pe_oracle, pe_select);
      write_or_print(pe_out, emit_report(report, format));
      for (const auto& r : report.rows)
        if (r.method == Method::kRl && !r.feasible) return static_cast<int>(ExitCode::kInfeasible);
      return 0;
    }
    if (*gc) {
      const auto r = run_gradcheck_suite(gc_pairs, gc_seed);
      std::cout << (r.passed() ? "PASS" : "FAIL") << " gradcheck: " << r.pairs << " pairs, <= " << r.max_parameters
                << " params, max relative error " << r.max_relative_error << ", refined steps " << r.refined_steps
                << ", unresolved kinks " << r.unresolved_kinks << ", " << r.seconds << " s\n";
      return r.passed() ? 0 : static_cast<int>(ExitCode::kInvariant);
    }
    if (app.got_subcommand("selftest")) return run_selftest(std::cout) ? 0 : static_cast<int>(ExitCode::kInvariant);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kInfeasible);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kInvariant);
  }
  return static_cast<int>(ExitCode::kUsage);
}
