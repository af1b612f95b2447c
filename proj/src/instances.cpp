#include "rlap/instances.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json_lines.hpp"
#include "json.hpp"

namespace rlap {

namespace {

using nlohmann::json;

// Per-purpose random streams so that resampling one element family leaves
// the others untouched.
enum Stream : std::uint64_t { kEfforts = 1, kEligibility = 2, kCosts = 3, kCoords = 4 };

double round_micro(double v) { return std::round(v * 1e6) / 1e6; }

std::vector<TimeUnits> draw_efforts(std::size_t n, RngSeed seed, const GenConfig& cfg) {
  Rng rng(derive_seed(seed, kEfforts));
  std::vector<TimeUnits> out(n);
  for (auto& e : out) e = static_cast<TimeUnits>(rng.uniform_int(1, cfg.effort_cap));
  return out;
}

std::string class_name(std::size_t k) { return "c" + std::to_string(k); }

}  // namespace

double distance(const Point& a, const Point& b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kAp:
      return "ap";
    case ProblemKind::kBin:
      return "bin";
    case ProblemKind::kVrp:
      return "vrp";
  }
  return "?";
}

ProblemKind parse_kind(const std::string& text) {
  if (text == "ap") return ProblemKind::kAp;
  if (text == "bin") return ProblemKind::kBin;
  if (text == "vrp") return ProblemKind::kVrp;
  throw UsageError("unknown problem kind '" + text + "' (expected ap, bin or vrp)");
}

ProblemKind kind_of(const AnyInstance& inst) noexcept { return static_cast<ProblemKind>(inst.index()); }

std::size_t entity_count(const AnyInstance& inst) noexcept {
  return std::visit(
      [](const auto& i) -> std::size_t {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, ApInstance>) return i.tasks.size();
        if constexpr (std::is_same_v<T, BinInstance>) return i.items.size();
        if constexpr (std::is_same_v<T, VrpInstance>) return i.customers.size();
      },
      inst);
}

std::size_t action_count(const AnyInstance& inst) noexcept {
  return std::visit(
      [](const auto& i) -> std::size_t {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, ApInstance>) return i.workers.size();
        if constexpr (std::is_same_v<T, BinInstance>) return i.bins.size();
        if constexpr (std::is_same_v<T, VrpInstance>) return i.vehicles.size();
      },
      inst);
}

TimeUnits max_capacity(const AnyInstance& inst) noexcept {
  TimeUnits best = 0;
  std::visit(
      [&](const auto& i) {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, ApInstance>) {
          for (const auto& w : i.workers) best = std::max(best, w.capacity);
        } else if constexpr (std::is_same_v<T, BinInstance>) {
          for (auto c : i.bins) best = std::max(best, c);
        } else {
          for (auto c : i.vehicles) best = std::max(best, c);
        }
      },
      inst);
  return best;
}

void GenConfig::validate() const {
  if (capacity_default < 1) throw ConfigError("capacity_default must be >= 1");
  if (effort_cap < 1) throw ConfigError("effort_cap must be >= 1");
  if (effort_cap > capacity_default) throw ConfigError("effort_cap must not exceed capacity_default");
  if (cost_range[0] < 0 || cost_range[0] > cost_range[1]) throw ConfigError("cost_range must satisfy 0 <= lo <= hi");
  if (!std::isfinite(coord_range[0]) || !std::isfinite(coord_range[1]) || coord_range[0] > coord_range[1])
    throw ConfigError("coord_range must be finite with lo <= hi");
  if (class_count < 1) throw ConfigError("class_count must be >= 1");
}

ApInstance generate_ap_instance(std::size_t n, RngSeed seed, const GenConfig& cfg) {
  cfg.validate();
  ApInstance inst;
  inst.seed = seed;
  const std::size_t m = n + cfg.worker_surplus;

  const auto efforts = draw_efforts(n, seed, cfg);
  Rng classes(derive_seed(seed, kEligibility));
  inst.tasks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst.tasks[i].effort = efforts[i];
    const auto k = cfg.class_count == 1 ? 0 : classes.uniform_int(0, static_cast<std::int64_t>(cfg.class_count) - 1);
    inst.tasks[i].eligibility = {class_name(static_cast<std::size_t>(k))};
  }
  inst.workers.resize(m);
  for (std::size_t j = 0; j < m; ++j) inst.workers[j] = {cfg.capacity_default, class_name(j % cfg.class_count)};

  Rng costs(derive_seed(seed, kCosts));
  inst.cost.assign(n, std::vector<CostValue>(m));
  for (auto& row : inst.cost)
    for (auto& c : row) c = costs.uniform_int(cfg.cost_range[0], cfg.cost_range[1]);
  return inst;
}

BinInstance generate_bin_instance(std::size_t n, RngSeed seed, const GenConfig& cfg) {
  cfg.validate();
  BinInstance inst;
  inst.seed = seed;
  const auto weights = draw_efforts(n, seed, cfg);
  Rng values(derive_seed(seed, kCosts));
  inst.items.resize(n);
  for (std::size_t i = 0; i < n; ++i) inst.items[i] = {weights[i], values.uniform_int(cfg.cost_range[0], cfg.cost_range[1])};
  inst.bins.assign(n + cfg.worker_surplus, cfg.capacity_default);
  return inst;
}

VrpInstance generate_vrp_instance(std::size_t n, RngSeed seed, const GenConfig& cfg) {
  cfg.validate();
  VrpInstance inst;
  inst.seed = seed;
  const double lo = cfg.coord_range[0];
  const double hi = cfg.coord_range[1];
  inst.depot = {round_micro((lo + hi) / 2), round_micro((lo + hi) / 2)};
  const auto demands = draw_efforts(n, seed, cfg);
  Rng coords(derive_seed(seed, kCoords));
  inst.customers.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = round_micro(coords.uniform(lo, hi));
    const double y = round_micro(coords.uniform(lo, hi));
    inst.customers[i] = {{x, y}, demands[i]};
  }
  inst.vehicles.assign(n + cfg.worker_surplus, cfg.capacity_default);
  return inst;
}

AnyInstance generate_instance(ProblemKind kind, std::size_t n, RngSeed seed, const GenConfig& cfg) {
  switch (kind) {
    case ProblemKind::kAp:
      return generate_ap_instance(n, seed, cfg);
    case ProblemKind::kBin:
      return generate_bin_instance(n, seed, cfg);
    case ProblemKind::kVrp:
      return generate_vrp_instance(n, seed, cfg);
  }
  throw UsageError("unknown problem kind");
}

AnyInstance resample_dynamic(const AnyInstance& base, RngSeed seed, const GenConfig& cfg) {
  cfg.validate();
  AnyInstance out = base;
  const auto efforts = draw_efforts(entity_count(base), seed, cfg);
  std::visit(
      [&](auto& i) {
        using T = std::decay_t<decltype(i)>;
        i.seed = seed;
        for (std::size_t k = 0; k < efforts.size(); ++k) {
          if constexpr (std::is_same_v<T, ApInstance>) i.tasks[k].effort = efforts[k];
          if constexpr (std::is_same_v<T, BinInstance>) i.items[k].weight = efforts[k];
          if constexpr (std::is_same_v<T, VrpInstance>) i.customers[k].demand = efforts[k];
        }
      },
      out);
  return out;
}

void validate(const ApInstance& inst) {
  TimeUnits cap = 0;
  std::set<WorkerClass> classes;
  for (const auto& w : inst.workers) {
    if (w.capacity < 0) throw InvariantError("worker capacity is negative");
    cap = std::max(cap, w.capacity);
    classes.insert(w.worker_class);
  }
  for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
    const auto& t = inst.tasks[i];
    if (t.effort < 1 || t.effort > cap)
      throw InvariantError("task " + std::to_string(i) + " effort outside [1, max capacity]");
    if (t.eligibility.empty()) throw InvariantError("task " + std::to_string(i) + " has empty eligibility");
    for (const auto& c : t.eligibility)
      if (!classes.contains(c)) throw InvariantError("task " + std::to_string(i) + " references absent class " + c);
  }
  if (inst.cost.size() != inst.tasks.size()) throw InvariantError("cost matrix row count != task count");
  for (const auto& row : inst.cost) {
    if (row.size() != inst.workers.size()) throw InvariantError("cost matrix column count != worker count");
    for (auto c : row)
      if (c < 0) throw InvariantError("negative cost entry");
  }
}

void validate(const BinInstance& inst) {
  for (const auto& it : inst.items)
    if (it.weight < 1 || it.value < 0) throw InvariantError("item weight must be >= 1 and value >= 0");
  for (auto c : inst.bins)
    if (c < 0) throw InvariantError("bin capacity is negative");
}

void validate(const VrpInstance& inst) {
  auto finite = [](const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); };
  if (!finite(inst.depot)) throw InvariantError("depot coordinate not finite");
  for (const auto& c : inst.customers) {
    if (c.demand < 1) throw InvariantError("customer demand must be >= 1");
    if (!finite(c.location)) throw InvariantError("customer coordinate not finite");
  }
  for (auto c : inst.vehicles)
    if (c < 0) throw InvariantError("vehicle capacity is negative");
}

void validate(const AnyInstance& inst) {
  std::visit([](const auto& i) { validate(i); }, inst);
}

std::vector<ApCluster> eligibility_clusters(const ApInstance& inst) {
  std::vector<ApCluster> clusters;
  std::map<std::vector<WorkerClass>, std::size_t> index;
  for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
    auto key = inst.tasks[i].eligibility;
    std::sort(key.begin(), key.end());
    auto [it, fresh] = index.emplace(key, clusters.size());
    if (fresh) {
      ApCluster c;
      for (std::size_t j = 0; j < inst.workers.size(); ++j)
        if (std::binary_search(key.begin(), key.end(), inst.workers[j].worker_class)) c.worker_ids.push_back(j);
      if (c.worker_ids.empty())
        throw InfeasibleError("task " + std::to_string(i) + " has no eligible worker among the instance's classes");
      clusters.push_back(std::move(c));
    }
    clusters[it->second].task_ids.push_back(i);
  }
  for (auto& c : clusters) {
    c.instance.seed = inst.seed;
    for (auto j : c.worker_ids) c.instance.workers.push_back(inst.workers[j]);
    for (auto i : c.task_ids) {
      c.instance.tasks.push_back(inst.tasks[i]);
      std::vector<CostValue> row;
      row.reserve(c.worker_ids.size());
      for (auto j : c.worker_ids) row.push_back(inst.cost[i][j]);
      c.instance.cost.push_back(std::move(row));
    }
  }
  return clusters;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

std::string dump_lines(const std::vector<json>& rows, const char* indent) {
  std::string out = "[";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out += k == 0 ? "\n" : ",\n";
    out += indent;
    out += rows[k].dump();
  }
  if (!rows.empty()) out += "\n  ";
  out += "]";
  return out;
}

json point_json(const Point& p) { return json::array({p.x, p.y}); }

class Reader {
 public:
  explicit Reader(const std::string& text) : lines_(index_json_lines(text)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw ParseError(line_of(path), path.empty() ? "/" : path, what);
  }

  int line_of(const std::string& path) const {
    // Fall back to the nearest enclosing value that has a recorded line.
    std::string p = path;
    while (true) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      if (p.empty()) return 1;
      p.erase(p.rfind('/'));
    }
  }

  const json& field(const json& obj, const std::string& path, const std::string& key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path + "/" + key, "missing required field");
    return *it;
  }

  void only_fields(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!ok) fail(path + "/" + key, "unknown field");
    }
  }

  const json& array(const json& v, const std::string& path) const {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }

  std::int64_t integer(const json& v, const std::string& path, std::int64_t lo, std::int64_t hi) const {
    if (!v.is_number_integer()) fail(path, "expected a decimal integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      fail(path, "integer out of range");
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi) fail(path, "integer out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  RngSeed seed(const json& v, const std::string& path) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(path, "expected a non-negative integer seed");
    return v.get<std::uint64_t>();
  }

  double coordinate(const json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "coordinate must be finite");
    if (round_micro(x) != x) fail(path, "coordinate has more than 6 fractional digits");
    return x;
  }

  Point point(const json& v, const std::string& path) const {
    array(v, path);
    if (v.size() != 2) fail(path, "expected [x, y]");
    return {coordinate(v[0], path + "/0"), coordinate(v[1], path + "/1")};
  }

 private:
  std::map<std::string, int> lines_;
};

constexpr std::int64_t kMaxUnits = 1'000'000'000;

ApInstance read_ap(const json& root, const Reader& r) {
  r.only_fields(root, "", {"kind", "seed", "tasks", "workers", "cost"});
  ApInstance inst;
  inst.seed = r.seed(r.field(root, "", "seed"), "/seed");
  const auto& tasks = r.array(r.field(root, "", "tasks"), "/tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string p = "/tasks/" + std::to_string(i);
    r.only_fields(tasks[i], p, {"effort", "eligibility"});
    TaskSpec t;
    t.effort = static_cast<TimeUnits>(r.integer(r.field(tasks[i], p, "effort"), p + "/effort", 1, kMaxUnits));
    const auto& el = r.array(r.field(tasks[i], p, "eligibility"), p + "/eligibility");
    for (std::size_t k = 0; k < el.size(); ++k) {
      if (!el[k].is_string()) r.fail(p + "/eligibility/" + std::to_string(k), "expected a class name string");
      t.eligibility.push_back(el[k].get<std::string>());
    }
    std::sort(t.eligibility.begin(), t.eligibility.end());
    t.eligibility.erase(std::unique(t.eligibility.begin(), t.eligibility.end()), t.eligibility.end());
    inst.tasks.push_back(std::move(t));
  }
  const auto& workers = r.array(r.field(root, "", "workers"), "/workers");
  for (std::size_t j = 0; j < workers.size(); ++j) {
    const std::string p = "/workers/" + std::to_string(j);
    r.only_fields(workers[j], p, {"capacity", "class"});
    WorkerSpec w;
    w.capacity = static_cast<TimeUnits>(r.integer(r.field(workers[j], p, "capacity"), p + "/capacity", 0, kMaxUnits));
    const auto& c = r.field(workers[j], p, "class");
    if (!c.is_string()) r.fail(p + "/class", "expected a class name string");
    w.worker_class = c.get<std::string>();
    inst.workers.push_back(std::move(w));
  }
  const auto& cost = r.array(r.field(root, "", "cost"), "/cost");
  if (cost.size() != inst.tasks.size()) r.fail("/cost", "expected one row per task");
  for (std::size_t i = 0; i < cost.size(); ++i) {
    const std::string p = "/cost/" + std::to_string(i);
    const auto& row = r.array(cost[i], p);
    if (row.size() != inst.workers.size()) r.fail(p, "expected one entry per worker");
    std::vector<CostValue> out;
    for (std::size_t j = 0; j < row.size(); ++j) out.push_back(r.integer(row[j], p + "/" + std::to_string(j), 0, INT64_MAX));
    inst.cost.push_back(std::move(out));
  }
  return inst;
}

BinInstance read_bin(const json& root, const Reader& r) {
  r.only_fields(root, "", {"kind", "seed", "items", "bins"});
  BinInstance inst;
  inst.seed = r.seed(r.field(root, "", "seed"), "/seed");
  const auto& items = r.array(r.field(root, "", "items"), "/items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string p = "/items/" + std::to_string(i);
    r.only_fields(items[i], p, {"weight", "value"});
    BinItem it;
    it.weight = static_cast<TimeUnits>(r.integer(r.field(items[i], p, "weight"), p + "/weight", 1, kMaxUnits));
    it.value = r.integer(r.field(items[i], p, "value"), p + "/value", 0, INT64_MAX);
    inst.items.push_back(it);
  }
  const auto& bins = r.array(r.field(root, "", "bins"), "/bins");
  for (std::size_t j = 0; j < bins.size(); ++j)
    inst.bins.push_back(static_cast<TimeUnits>(r.integer(bins[j], "/bins/" + std::to_string(j), 0, kMaxUnits)));
  return inst;
}

VrpInstance read_vrp(const json& root, const Reader& r) {
  r.only_fields(root, "", {"kind", "seed", "depot", "customers", "vehicles"});
  VrpInstance inst;
  inst.seed = r.seed(r.field(root, "", "seed"), "/seed");
  inst.depot = r.point(r.field(root, "", "depot"), "/depot");
  const auto& customers = r.array(r.field(root, "", "customers"), "/customers");
  for (std::size_t i = 0; i < customers.size(); ++i) {
    const std::string p = "/customers/" + std::to_string(i);
    r.only_fields(customers[i], p, {"location", "demand"});
    Customer c;
    c.location = r.point(r.field(customers[i], p, "location"), p + "/location");
    c.demand = static_cast<TimeUnits>(r.integer(r.field(customers[i], p, "demand"), p + "/demand", 1, kMaxUnits));
    inst.customers.push_back(c);
  }
  const auto& vehicles = r.array(r.field(root, "", "vehicles"), "/vehicles");
  for (std::size_t j = 0; j < vehicles.size(); ++j)
    inst.vehicles.push_back(static_cast<TimeUnits>(r.integer(vehicles[j], "/vehicles/" + std::to_string(j), 0, kMaxUnits)));
  return inst;
}

}  // namespace

std::string serialize_instance(const AnyInstance& any) {
  std::ostringstream os;
  os << "{\n  \"kind\": \"" << to_string(kind_of(any)) << "\",\n";
  std::visit(
      [&](const auto& inst) {
        using T = std::decay_t<decltype(inst)>;
        os << "  \"seed\": " << inst.seed << ",\n";
        if constexpr (std::is_same_v<T, ApInstance>) {
          std::vector<json> tasks, workers, cost;
          for (const auto& t : inst.tasks) tasks.push_back({{"effort", t.effort}, {"eligibility", t.eligibility}});
          for (const auto& w : inst.workers) workers.push_back({{"capacity", w.capacity}, {"class", w.worker_class}});
          for (const auto& row : inst.cost) cost.push_back(row);
          os << "  \"tasks\": " << dump_lines(tasks, "    ") << ",\n";
          os << "  \"workers\": " << dump_lines(workers, "    ") << ",\n";
          os << "  \"cost\": " << dump_lines(cost, "    ") << "\n";
        } else if constexpr (std::is_same_v<T, BinInstance>) {
          std::vector<json> items;
          for (const auto& it : inst.items) items.push_back({{"weight", it.weight}, {"value", it.value}});
          os << "  \"items\": " << dump_lines(items, "    ") << ",\n";
          os << "  \"bins\": " << json(inst.bins).dump() << "\n";
        } else {
          std::vector<json> customers;
          for (const auto& c : inst.customers) customers.push_back({{"location", point_json(c.location)}, {"demand", c.demand}});
          os << "  \"depot\": " << point_json(inst.depot).dump() << ",\n";
          os << "  \"customers\": " << dump_lines(customers, "    ") << ",\n";
          os << "  \"vehicles\": " << json(inst.vehicles).dump() << "\n";
        }
      },
      any);
  os << "}\n";
  return os.str();
}

AnyInstance parse_instance(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_at_offset(text, e.byte), "/", e.what());
  }
  Reader r(text);
  if (!root.is_object()) r.fail("", "expected a top-level object");
  const auto& kind = r.field(root, "", "kind");
  if (!kind.is_string()) r.fail("/kind", "expected a string");
  const auto k = kind.get<std::string>();
  if (k == "ap") return read_ap(root, r);
  if (k == "bin") return read_bin(root, r);
  if (k == "vrp") return read_vrp(root, r);
  r.fail("/kind", "expected one of ap, bin, vrp");
}

}  // namespace rlap
