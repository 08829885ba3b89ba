#ifndef CTXSUM_CHECKPOINT_HPP
#define CTXSUM_CHECKPOINT_HPP

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "models.hpp"

namespace ctxsum {

struct TrainMeta {
  int epoch = 0;             // 1-based epoch the weights come from
  double val_acc = 0.0;
  std::vector<double> epoch_seconds;  // wall clock per completed epoch
};

struct Checkpoint {
  ModelConfig config;
  TrainMeta meta;
  std::map<std::string, Tensorf> tensors;

  Model<float> to_model() const {
    Model<float> m;
    m.cfg = config;
    for (auto& [name, t] : tensors) m.store.add(name, t);
    return m;
  }

  static Checkpoint from_model(const Model<float>& m, TrainMeta meta) {
    Checkpoint ck;
    ck.config = m.cfg;
    ck.meta = std::move(meta);
    for (auto& [name, t] : m.store.params) ck.tensors[name] = t;
    return ck;
  }
};

inline nlohmann::json hp_to_json(const HyperParams& hp) {
  return nlohmann::json{{"e", hp.embed_dim},
                        {"v", hp.vocab_cap},
                        {"w", hp.words_per_sub},
                        {"s", hp.subs_per_file},
                        {"f", hp.files_per_project},
                        {"rnn", "gru"},
                        {"decode_max_len", hp.decode_max_len},
                        {"batch_size", hp.batch_size},
                        {"select_seed", hp.select_seed},
                        {"init_seed", hp.init_seed},
                        {"lr", (double)hp.lr}};
}

inline HyperParams hp_from_json(const nlohmann::json& j) {
  HyperParams hp;
  hp.embed_dim = j.at("e").get<int>();
  hp.vocab_cap = j.at("v").get<int>();
  hp.words_per_sub = j.at("w").get<int>();
  hp.subs_per_file = j.at("s").get<int>();
  hp.files_per_project = j.at("f").get<int>();
  check(j.at("rnn").get<std::string>() == "gru", "checkpoint: unsupported rnn kind");
  hp.decode_max_len = j.at("decode_max_len").get<int>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.select_seed = j.at("select_seed").get<uint64_t>();
  hp.init_seed = j.at("init_seed").get<uint64_t>();
  hp.lr = (float)j.at("lr").get<double>();
  return hp;
}

inline std::string hash_hex(uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline uint64_t hash_from_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

// Layout: magic "CTXSUM1", u64 LE manifest byte length, JSON manifest
// (config, training metadata, tensor names/shapes/offsets), then the
// concatenated little-endian float32 payload. Floats are copied raw, so a
// save/load round trip is bit-exact.
inline constexpr char kCheckpointMagic[] = "CTXSUM1";

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  nlohmann::json manifest;
  manifest["config"] = {{"variant", variant_name(ck.config.variant)},
                        {"vocab_size", ck.config.vocab_size},
                        {"vocab_hash", hash_hex(ck.config.vocab_hash)},
                        {"hp", hp_to_json(ck.config.hp)}};
  manifest["meta"] = {{"epoch", ck.meta.epoch},
                      {"val_acc", ck.meta.val_acc},
                      {"epoch_seconds", ck.meta.epoch_seconds}};
  nlohmann::json tensors = nlohmann::json::array();
  uint64_t offset = 0;
  for (auto& [name, t] : ck.tensors) {  // std::map: name order, stable
    tensors.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    offset += (uint64_t)t.numel() * sizeof(float);
  }
  manifest["tensors"] = std::move(tensors);
  std::string mjson = manifest.dump();

  std::string out;
  out.append(kCheckpointMagic, 7);
  uint64_t mlen = mjson.size();
  char lenbuf[8];
  std::memcpy(lenbuf, &mlen, 8);
  out.append(lenbuf, 8);
  out += mjson;
  for (auto& [name, t] : ck.tensors)
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  check(bytes.size() >= 15 && std::memcmp(bytes.data(), kCheckpointMagic, 7) == 0,
        "checkpoint: bad magic (not a CTXSUM1 file)");
  uint64_t mlen = 0;
  std::memcpy(&mlen, bytes.data() + 7, 8);
  check(bytes.size() >= 15 + mlen, "checkpoint: truncated manifest");
  nlohmann::json manifest = nlohmann::json::parse(bytes.substr(15, mlen));
  Checkpoint ck;
  const auto& cj = manifest.at("config");
  ck.config.variant = parse_variant(cj.at("variant").get<std::string>());
  ck.config.vocab_size = cj.at("vocab_size").get<int>();
  ck.config.vocab_hash = hash_from_hex(cj.at("vocab_hash").get<std::string>());
  ck.config.hp = hp_from_json(cj.at("hp"));
  const auto& mj = manifest.at("meta");
  ck.meta.epoch = mj.at("epoch").get<int>();
  ck.meta.val_acc = mj.at("val_acc").get<double>();
  ck.meta.epoch_seconds = mj.at("epoch_seconds").get<std::vector<double>>();
  size_t data_start = 15 + mlen;
  for (const auto& tj : manifest.at("tensors")) {
    std::string name = tj.at("name").get<std::string>();
    std::vector<int> shape = tj.at("shape").get<std::vector<int>>();
    uint64_t offset = tj.at("offset").get<uint64_t>();
    Tensorf t = Tensorf::zeros(shape);
    size_t nbytes = (size_t)t.numel() * sizeof(float);
    check(data_start + offset + nbytes <= bytes.size(), "checkpoint: truncated tensor " + name);
    std::memcpy(t.data.data(), bytes.data() + data_start + offset, nbytes);
    ck.tensors[name] = std::move(t);
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.good(), "checkpoint: cannot write " + path);
  std::string bytes = serialize_checkpoint(ck);
  out.write(bytes.data(), (std::streamsize)bytes.size());
  check(out.good(), "checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace ctxsum

#endif
