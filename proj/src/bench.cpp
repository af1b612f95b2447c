#include "rlap/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace rlap {

std::string to_string(Method m) {
  switch (m) {
    case Method::kRl: return "rl";
    case Method::kExact: return "exact";
    case Method::kGreedy: return "greedy";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  if (text == "rl") return Method::kRl;
  if (text == "exact") return Method::kExact;
  if (text == "greedy") return Method::kGreedy;
  throw UsageError("unknown method '" + text + "' (expected rl, exact or greedy)");
}

void PerturbSpec::validate(std::size_t entity_count) const {
  if (k > entity_count) throw UsageError("perturbation k exceeds the entity count");
  if (delta < 0) throw UsageError("perturbation delta must be >= 0");
  if (clamp && *clamp < 1) throw UsageError("perturbation clamp must be >= 1");
}

AnyInstance perturb(const AnyInstance& inst, const PerturbSpec& spec) {
  const std::size_t n = entity_count(inst);
  spec.validate(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (spec.selection_seed) {
    Rng rng(*spec.selection_seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
  }
  const TimeUnits cap = spec.clamp.value_or(max_capacity(inst));
  auto bump = [&](TimeUnits v) { return std::min<TimeUnits>(v + spec.delta, std::max(cap, v)); };

  AnyInstance out = inst;
  for (std::size_t s = 0; s < spec.k; ++s) {
    const std::size_t i = order[s];
    std::visit(
        [&](auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, ApInstance>) x.tasks[i].effort = bump(x.tasks[i].effort);
          if constexpr (std::is_same_v<T, BinInstance>) x.items[i].weight = bump(x.items[i].weight);
          if constexpr (std::is_same_v<T, VrpInstance>) x.customers[i].demand = bump(x.customers[i].demand);
        },
        out);
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Solution solve_exact(const AnyInstance& inst, const RewardConfig& rcfg) {
  if (const auto* ap = std::get_if<ApInstance>(&inst))
    return solve_by_cluster(*ap, rcfg.worker_penalty, [](const ApInstance& c, double l) { return exact_ap(c, l); });
  if (const auto* bin = std::get_if<BinInstance>(&inst)) return exact_bin(*bin);
  return exact_vrp(std::get<VrpInstance>(inst), rcfg.worker_penalty, rcfg.depot_return);
}

Solution solve_greedy(const AnyInstance& inst, const RewardConfig& rcfg) {
  if (const auto* ap = std::get_if<ApInstance>(&inst)) return greedy_ap(*ap, rcfg.worker_penalty);
  if (const auto* bin = std::get_if<BinInstance>(&inst)) return greedy_bin(*bin);
  return greedy_vrp(std::get<VrpInstance>(inst), rcfg.worker_penalty, rcfg.depot_return);
}

bool exact_in_range(const AnyInstance& inst) {
  if (const auto* ap = std::get_if<ApInstance>(&inst)) {
    for (const auto& c : eligibility_clusters(*ap))
      if (c.task_ids.size() > kExactApMaxTasks) return false;
    return true;
  }
  if (std::holds_alternative<BinInstance>(inst)) return entity_count(inst) <= kExactBinMaxItems;
  return entity_count(inst) <= kExactVrpMaxCustomers;
}

BenchRow make_row(const AnyInstance& inst, const std::string& id, Method method, const TimedSolution& ts) {
  BenchRow row;
  row.instance_id = id;
  row.kind = kind_of(inst);
  row.size = entity_count(inst);
  row.seed = std::visit([](const auto& i) { return i.seed; }, inst);
  row.method = method;
  row.solve_time_seconds = ts.seconds;
  row.feasible = ts.feasible;
  row.note = ts.note;
  if (ts.feasible) {
    row.cost = ts.solution.total_cost;
    row.objective = ts.solution.objective;
    row.workers_used = ts.solution.workers_used;
  }
  return row;
}

// Fills gap_vs_exact on a group of rows describing the same instance.
void attach_gaps(std::vector<BenchRow>& group, const std::vector<TimedSolution>& sols) {
  std::optional<std::size_t> exact;
  for (std::size_t r = 0; r < group.size(); ++r)
    if (group[r].method == Method::kExact && group[r].feasible) exact = r;
  if (!exact) return;
  for (std::size_t r = 0; r < group.size(); ++r)
    if (group[r].feasible) group[r].gap_vs_exact = relative_gap(group[r].kind, sols[r].solution, sols[*exact].solution);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

TimedSolution evaluate_pretrained(const nn::PolicyParams& params, const AnyInstance& inst, const RewardConfig& rcfg) {
  if (params.action_count() != action_count(inst) ||
      params.actor.shape().seq_len != entity_count(inst) + action_count(inst))
    throw UsageError("policy shape does not match the instance (n, m)");
  TimedSolution out;
  Rng unused(0);
  const auto t0 = Clock::now();
  Episode ep;
  try {
    ep = collect_episode(params, inst, rcfg, unused, ActMode::kGreedy);
  } catch (const DeadEndError& e) {
    out.seconds = seconds_since(t0);
    out.note = std::string("dead end: ") + e.what();
    return out;
  }
  out.seconds = seconds_since(t0);
  out.solution = solution_from_state(inst, ep.final_state, rcfg);
  validate_solution(inst, out.solution, rcfg);
  out.feasible = true;
  return out;
}

TimedSolution run_method(Method method, const AnyInstance& inst, const RewardConfig& rcfg, const nn::PolicyParams* params) {
  if (method == Method::kRl) {
    if (!params) throw UsageError("method rl requires a policy checkpoint");
    return evaluate_pretrained(*params, inst, rcfg);
  }
  TimedSolution out;
  if (method == Method::kExact && !exact_in_range(inst)) {
    out.note = "exact skipped: instance exceeds the tractability bound";
    return out;
  }
  const auto t0 = Clock::now();
  try {
    out.solution = method == Method::kExact ? solve_exact(inst, rcfg) : solve_greedy(inst, rcfg);
    out.seconds = seconds_since(t0);
    validate_solution(inst, out.solution, rcfg);
    out.feasible = true;
  } catch (const InfeasibleError& e) {
    out.seconds = seconds_since(t0);
    out.note = std::string("infeasible: ") + e.what();
  }
  return out;
}

double relative_gap(ProblemKind kind, const Solution& candidate, const Solution& exact) {
  if (kind == ProblemKind::kBin) {
    const double best = exact.total_cost;
    return best == 0.0 ? 0.0 : (best - candidate.total_cost) / best;
  }
  const double best = exact.objective;
  if (best == 0.0) return candidate.objective == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return (candidate.objective - best) / std::abs(best);
}

BenchReport run_benchmark(const BenchConfig& cfg) {
  const bool want_rl = std::find(cfg.methods.begin(), cfg.methods.end(), Method::kRl) != cfg.methods.end();
  BenchReport report;
  for (auto size : cfg.sizes) {
    const Checkpoint* ckpt = nullptr;
    if (auto it = cfg.policies.find(size); it != cfg.policies.end()) ckpt = &it->second;
    if (want_rl && !ckpt) throw UsageError("no policy checkpoint for size " + std::to_string(size));
    if (ckpt && ckpt->kind != cfg.kind) throw UsageError("checkpoint kind does not match the benchmark kind");
    for (std::size_t s = 1; s <= cfg.seeds; ++s) {
      const AnyInstance inst = ckpt ? resample_dynamic(ckpt->base, s, ckpt->gen) : generate_instance(cfg.kind, size, s, cfg.gen);
      const RewardConfig rcfg = ckpt ? ckpt->reward : default_reward_config(inst);
      const std::string id = to_string(cfg.kind) + std::to_string(size) + "-s" + std::to_string(s);
      std::vector<BenchRow> group;
      std::vector<TimedSolution> sols;
      for (auto m : cfg.methods) {
        sols.push_back(run_method(m, inst, rcfg, ckpt ? &ckpt->params : nullptr));
        group.push_back(make_row(inst, id, m, sols.back()));
      }
      attach_gaps(group, sols);
      report.rows.insert(report.rows.end(), group.begin(), group.end());
    }
  }
  return report;
}

BenchReport perturb_eval(const Checkpoint& ckpt, const AnyInstance& inst, const std::vector<std::size_t>& ks, TimeUnits delta,
                         bool oracle, std::optional<RngSeed> selection_seed) {
  if (kind_of(inst) != ckpt.kind) throw UsageError("instance kind does not match the checkpoint");
  const std::vector<Method> methods = oracle ? std::vector<Method>{Method::kRl, Method::kExact, Method::kGreedy}
                                             : std::vector<Method>{Method::kRl};
  BenchReport report;
  for (auto k : ks) {
    PerturbSpec spec;
    spec.k = k;
    spec.delta = delta;
    spec.selection_seed = selection_seed;
    const AnyInstance changed = perturb(inst, spec);
    const std::string id = to_string(ckpt.kind) + std::to_string(entity_count(inst)) + "-k" + std::to_string(k);
    std::vector<BenchRow> group;
    std::vector<TimedSolution> sols;
    for (auto m : methods) {
      sols.push_back(run_method(m, changed, ckpt.reward, &ckpt.params));
      group.push_back(make_row(changed, id, m, sols.back()));
      group.back().perturbed = k;
    }
    attach_gaps(group, sols);
    report.rows.insert(report.rows.end(), group.begin(), group.end());
  }
  return report;
}

ReportFormat parse_format(const std::string& text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "markdown" || text == "md") return ReportFormat::kMarkdown;
  if (text == "json-lines" || text == "jsonl") return ReportFormat::kJsonLines;
  throw UsageError("unknown report format '" + text + "' (expected csv, markdown or json-lines)");
}

std::string emit_report(const BenchReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kCsv:
      out << "instance_id,kind,size,seed,k,method,time_s,cost,objective,workers_used,feasible,gap_vs_exact,note\n";
      for (const auto& r : report.rows)
        out << csv_escape(r.instance_id) << ',' << to_string(r.kind) << ',' << r.size << ',' << r.seed << ','
            << (r.perturbed ? std::to_string(*r.perturbed) : "") << ',' << to_string(r.method) << ','
            << format_double(r.solve_time_seconds) << ',' << opt(r.cost) << ',' << opt(r.objective) << ','
            << r.workers_used << ',' << (r.feasible ? "true" : "false") << ',' << opt(r.gap_vs_exact) << ','
            << csv_escape(r.note) << '\n';
      break;
    case ReportFormat::kMarkdown:
      out << "| instance | size | k | method | time (s) | cost | objective | workers | feasible | gap vs exact | note |\n"
          << "|---|---:|---:|---|---:|---:|---:|---:|---|---:|---|\n";
      for (const auto& r : report.rows) {
        char time_buf[32];
        std::snprintf(time_buf, sizeof time_buf, "%.6f", r.solve_time_seconds);
        std::string gap;
        if (r.gap_vs_exact) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *r.gap_vs_exact);
          gap = buf;
        }
        out << "| " << r.instance_id << " | " << r.size << " | " << (r.perturbed ? std::to_string(*r.perturbed) : "")
            << " | " << to_string(r.method) << " | " << time_buf << " | " << opt(r.cost) << " | " << opt(r.objective)
            << " | " << r.workers_used << " | " << (r.feasible ? "yes" : "no") << " | " << gap << " | " << r.note
            << " |\n";
      }
      break;
    case ReportFormat::kJsonLines:
      for (const auto& r : report.rows) {
        nlohmann::json j = {{"instance_id", r.instance_id}, {"kind", to_string(r.kind)},  {"size", r.size},
                            {"seed", r.seed},               {"method", to_string(r.method)}, {"time_s", r.solve_time_seconds},
                            {"workers_used", r.workers_used}, {"feasible", r.feasible},   {"note", r.note}};
        j["k"] = r.perturbed ? nlohmann::json(*r.perturbed) : nlohmann::json(nullptr);
        j["cost"] = r.cost ? nlohmann::json(*r.cost) : nlohmann::json(nullptr);
        j["objective"] = r.objective ? nlohmann::json(*r.objective) : nlohmann::json(nullptr);
        j["gap_vs_exact"] = r.gap_vs_exact ? nlohmann::json(*r.gap_vs_exact) : nlohmann::json(nullptr);
        out << j.dump() << '\n';
      }
      break;
  }
  return out.str();
}

std::vector<RngSeed> default_eval_seeds() {
  std::vector<RngSeed> seeds;
  for (RngSeed s = 1001; s <= 1010; ++s) seeds.push_back(s);
  return seeds;
}

AnyInstance family_instance(const Checkpoint& ckpt, RngSeed seed) { return resample_dynamic(ckpt.base, seed, ckpt.gen); }

double reference_objective(const AnyInstance& inst, const RewardConfig& rcfg) {
  const auto method = exact_in_range(inst) ? Method::kExact : Method::kGreedy;
  const auto ts = run_method(method, inst, rcfg, nullptr);
  if (!ts.feasible) return std::numeric_limits<double>::quiet_NaN();
  // Bin objectives compare on value with the bin penalty, like the reward.
  if (kind_of(inst) == ProblemKind::kBin)
    return -ts.solution.total_cost + rcfg.worker_penalty * static_cast<double>(ts.solution.workers_used);
  return ts.solution.objective;
}

TrainRun train_policy(ProblemKind kind, std::size_t n, const RunConfig& cfg,
                      const std::function<void(const TrainRecord&)>& on_record) {
  const auto t0 = Clock::now();
  TrainConfig tc = cfg.train;
  if (tc.eval_seeds.empty()) tc.eval_seeds = default_eval_seeds();
  const AnyInstance base = generate_instance(kind, n, tc.master_seed, cfg.gen);
  const GenConfig gen = cfg.gen;
  const InstanceSource source = [&base, &gen](RngSeed seed) { return resample_dynamic(base, seed, gen); };

  TrainHooks hooks;
  RewardConfig rcfg = default_reward_config(base);
  if (tc.worker_penalty) rcfg.worker_penalty = *tc.worker_penalty;
  rcfg.depot_return = tc.depot_return;
  hooks.reference = [rcfg](const AnyInstance& inst) { return reference_objective(inst, rcfg); };
  hooks.on_record = on_record;

  TrainedPolicy trained = train(source, tc, hooks);

  TrainRun run;
  Checkpoint& c = run.checkpoint;
  c.kind = kind;
  c.n = n;
  c.m = action_count(base);
  c.base = base;
  c.reward = trained.reward;
  c.train = tc;
  c.gen = gen;
  c.reward_scale = trained.reward_scale;
  c.best_episode = trained.best_episode;
  c.best_eval = trained.best_eval;
  c.params = std::move(trained.params);
  run.log = std::move(trained.log);
  run.seconds = seconds_since(t0);
  return run;
}

std::map<std::size_t, Checkpoint> load_policies(const std::string& dir, ProblemKind kind) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw UsageError("policy directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::map<std::size_t, Checkpoint> out;
  for (const auto& path : files) {
    Checkpoint c;
    try {
      c = load_checkpoint(path.string());
    } catch (const UsageError&) {
      continue;  // not a checkpoint
    }
    if (c.kind == kind) out.insert_or_assign(c.n, std::move(c));
  }
  return out;
}

}  // namespace rlap
