#include "rlap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <cstdio>

#include "rlap/config.hpp"

namespace rlap {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'L', 'A', 'P', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFU));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFU));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return read_le(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read_le(4)); }
  std::string take(std::size_t count) {
    need(count);
    std::string s = bytes_.substr(pos_, count);
    pos_ += count;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw UsageError("checkpoint truncated");
  }
  std::uint64_t read_le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * b);
    return v;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_stack(std::string& out, const nn::LayerStack& stack) {
  put_u64(out, stack.size());
  for (double v : stack.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void get_stack(Reader& in, nn::LayerStack& stack, const char* name) {
  const auto count = in.u64();
  if (count != stack.size())
    throw UsageError(std::string("checkpoint ") + name + " has " + std::to_string(count) + " parameters, header implies " +
                     std::to_string(stack.size()));
  for (auto& v : stack.values()) v = std::bit_cast<double>(in.u64());
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  json header = {{"kind", to_string(c.kind)},
                 {"n", c.n},
                 {"m", c.m},
                 {"seeds", {{"master", c.train.master_seed}, {"base_instance", std::visit([](const auto& i) { return i.seed; }, c.base)}}},
                 {"reward", to_json(c.reward)},
                 {"train", to_json(c.train)},
                 {"gen", to_json(c.gen)},
                 {"reward_scale_bits", std::bit_cast<std::uint64_t>(c.reward_scale)},
                 {"filters", c.params.actor.shape().filters},
                 {"hidden", c.params.actor.shape().hidden},
                 {"base", json::parse(serialize_instance(c.base))}};
  header["train"]["worker_penalty"] = c.train.worker_penalty ? json(*c.train.worker_penalty) : json(nullptr);
  header["train"]["depot_return"] = c.train.depot_return;
  header["best_episode"] = c.best_episode ? json(*c.best_episode) : json(nullptr);
  header["best_eval_bits"] = c.best_eval ? json(std::bit_cast<std::uint64_t>(*c.best_eval)) : json(nullptr);

  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put_stack(out, c.params.actor);
  put_stack(out, c.params.critic);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw UsageError("not a policy checkpoint");
  const auto version = in.u32();
  if (version != kCheckpointVersion) throw UsageError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = in.u32();
  json h;
  try {
    h = json::parse(in.take(header_len));
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint c;
  try {
    c.kind = parse_kind(h.at("kind").get<std::string>());
    c.n = h.at("n").get<std::size_t>();
    c.m = h.at("m").get<std::size_t>();
    c.reward = reward_config_from_json(h.at("reward"));
    json train = h.at("train");
    const json penalty = train["worker_penalty"];
    const bool depot = train["depot_return"].get<bool>();
    train.erase("worker_penalty");
    train.erase("depot_return");
    c.train = train_config_from_json(train);
    if (!penalty.is_null()) c.train.worker_penalty = penalty.get<double>();
    c.train.depot_return = depot;
    c.gen = gen_config_from_json(h.at("gen"));
    c.reward_scale = std::bit_cast<double>(h.at("reward_scale_bits").get<std::uint64_t>());
    if (!h.at("best_episode").is_null()) c.best_episode = h.at("best_episode").get<std::size_t>();
    if (!h.at("best_eval_bits").is_null()) c.best_eval = std::bit_cast<double>(h.at("best_eval_bits").get<std::uint64_t>());
    c.base = parse_instance(h.at("base").dump());
    c.params = nn::PolicyParams(c.n + c.m, c.m, h.at("filters").get<std::size_t>(), h.at("hidden").get<std::size_t>());
  } catch (const json::exception& e) {
    throw UsageError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (kind_of(c.base) != c.kind || entity_count(c.base) != c.n || action_count(c.base) != c.m)
    throw UsageError("checkpoint base instance disagrees with its header");
  get_stack(in, c.params.actor, "actor");
  get_stack(in, c.params.critic, "critic");
  if (!in.at_end()) throw UsageError("trailing bytes after checkpoint parameters");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_text_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_text_file(path)); }

std::uint64_t parameter_hash(const nn::PolicyParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::span<const double> values) {
    for (double v : values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFFU;
        h *= 0x100000001b3ULL;
      }
    }
  };
  mix(params.actor.values());
  mix(params.critic.values());
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace rlap
