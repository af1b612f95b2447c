#include "rlap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace rlap {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError(section + ": unknown key '" + key + "'");
}

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    const auto& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
          throw ConfigError("expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("expected a number");
    }
    out = v.get<T>();
  } catch (const ConfigError& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const GenConfig& c) {
  return {{"worker_surplus", c.worker_surplus},
          {"capacity_default", c.capacity_default},
          {"effort_cap", c.effort_cap},
          {"cost_range", c.cost_range},
          {"coord_range", c.coord_range},
          {"class_count", c.class_count}};
}

json to_json(const RewardConfig& c) { return {{"worker_penalty", c.worker_penalty}, {"depot_return", c.depot_return}}; }

json to_json(const TrainConfig& c) {
  json j = {{"gamma", c.gamma},
            {"epsilon", c.epsilon},
            {"lr", c.lr},
            {"lr_decay", c.lr_decay},
            {"decay_clock", to_string(c.decay_clock)},
            {"epochs_per_episode", c.epochs_per_episode},
            {"batch_size", c.batch_size},
            {"buffer_capacity", c.buffer_capacity},
            {"episodes", c.episodes},
            {"eval_seeds", c.eval_seeds},
            {"master_seed", c.master_seed},
            {"normalize_advantages", c.normalize_advantages},
            {"clear_buffer", c.clear_buffer},
            {"update_interval", c.update_interval},
            {"entropy_coef", c.entropy_coef},
            {"reward_scale", c.reward_scale},
            {"eval_interval", c.eval_interval},
            {"filters", c.filters},
            {"hidden", c.hidden}};
  return j;
}

json to_json(const RunConfig& c) {
  json reward = {{"depot_return", c.train.depot_return}};
  reward["worker_penalty"] = c.train.worker_penalty ? json(*c.train.worker_penalty) : json(nullptr);
  json train = to_json(c.train);
  json j = {{"train", train}, {"reward", reward}, {"gen", to_json(c.gen)}};
  if (c.kind) j["kind"] = to_string(*c.kind);
  if (c.n) j["n"] = *c.n;
  return j;
}

GenConfig gen_config_from_json(const json& j, GenConfig c) {
  reject_unknown(j, {"worker_surplus", "capacity_default", "effort_cap", "cost_range", "coord_range", "class_count"}, "gen");
  read_key(j, "worker_surplus", c.worker_surplus, "gen");
  read_key(j, "capacity_default", c.capacity_default, "gen");
  read_key(j, "effort_cap", c.effort_cap, "gen");
  read_key(j, "class_count", c.class_count, "gen");
  try {
    if (j.contains("cost_range")) c.cost_range = j.at("cost_range").get<std::array<CostValue, 2>>();
    if (j.contains("coord_range")) c.coord_range = j.at("coord_range").get<std::array<double, 2>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("gen: range must be a two-element array: ") + e.what());
  }
  c.validate();
  return c;
}

RewardConfig reward_config_from_json(const json& j, RewardConfig c) {
  reject_unknown(j, {"worker_penalty", "depot_return"}, "reward");
  if (j.contains("worker_penalty") && !j.at("worker_penalty").is_null()) read_key(j, "worker_penalty", c.worker_penalty, "reward");
  read_key(j, "depot_return", c.depot_return, "reward");
  c.validate();
  return c;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j,
                 {"gamma", "epsilon", "lr", "lr_decay", "decay_clock", "epochs_per_episode", "batch_size", "buffer_capacity", "episodes",
                  "eval_seeds", "master_seed", "normalize_advantages", "clear_buffer", "update_interval", "entropy_coef",
                  "reward_scale", "eval_interval", "filters", "hidden"},
                 "train");
  read_key(j, "gamma", c.gamma, "train");
  read_key(j, "epsilon", c.epsilon, "train");
  read_key(j, "lr", c.lr, "train");
  read_key(j, "lr_decay", c.lr_decay, "train");
  if (j.contains("decay_clock")) {
    if (!j.at("decay_clock").is_string()) throw ConfigError("train.decay_clock: expected a string");
    c.decay_clock = parse_decay_clock(j.at("decay_clock").get<std::string>());
  }
  read_key(j, "epochs_per_episode", c.epochs_per_episode, "train");
  read_key(j, "batch_size", c.batch_size, "train");
  read_key(j, "buffer_capacity", c.buffer_capacity, "train");
  read_key(j, "episodes", c.episodes, "train");
  read_key(j, "master_seed", c.master_seed, "train");
  read_key(j, "normalize_advantages", c.normalize_advantages, "train");
  read_key(j, "clear_buffer", c.clear_buffer, "train");
  read_key(j, "update_interval", c.update_interval, "train");
  read_key(j, "entropy_coef", c.entropy_coef, "train");
  read_key(j, "reward_scale", c.reward_scale, "train");
  read_key(j, "eval_interval", c.eval_interval, "train");
  read_key(j, "filters", c.filters, "train");
  read_key(j, "hidden", c.hidden, "train");
  if (j.contains("eval_seeds")) {
    const auto& s = j.at("eval_seeds");
    if (!s.is_array()) throw ConfigError("train.eval_seeds: expected an array of seeds");
    c.eval_seeds.clear();
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) throw ConfigError("train.eval_seeds: seeds are non-negative integers");
      c.eval_seeds.push_back(v.get<RngSeed>());
    }
  }
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"kind", "n", "train", "reward", "gen"}, "run-config");
  RunConfig rc;
  if (j.contains("kind")) {
    if (!j.at("kind").is_string()) throw ConfigError("run-config.kind: expected a string");
    rc.kind = parse_kind(j.at("kind").get<std::string>());
  }
  if (j.contains("n")) {
    std::size_t n = 0;
    read_key(j, "n", n, "run-config");
    rc.n = n;
  }
  if (j.contains("train")) rc.train = train_config_from_json(j.at("train"));
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    reward_config_from_json(r);  // validates keys and values
    if (r.contains("worker_penalty") && !r.at("worker_penalty").is_null())
      rc.train.worker_penalty = r.at("worker_penalty").get<double>();
    if (r.contains("depot_return")) rc.train.depot_return = r.at("depot_return").get<bool>();
  }
  if (j.contains("gen")) rc.gen = gen_config_from_json(j.at("gen"));
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
  if (!out) throw UsageError("write to '" + path + "' failed");
}

}  // namespace rlap
