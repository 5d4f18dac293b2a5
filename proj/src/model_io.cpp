#include "hybridet/model_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "hybridet/error.hpp"

namespace hybridet {

using nlohmann::json;

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
    i += 3;
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.append("==");
  } else if (rem == 2) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string base64_decode(const std::string& text) {
  std::string out;
  int buffer = 0, bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = b64_value(c);
    if (v < 0) throw ConfigError("invalid base64 in checkpoint");
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

std::string doubles_to_le_bytes(const std::vector<double>& values) {
  std::string bytes;
  bytes.reserve(values.size() * 8);
  for (double d : values) {
    const auto u = std::bit_cast<std::uint64_t>(d);
    for (int s = 0; s < 64; s += 8) bytes.push_back(static_cast<char>((u >> s) & 0xff));
  }
  return bytes;
}

std::vector<double> le_bytes_to_doubles(const std::string& bytes) {
  if (bytes.size() % 8 != 0) throw ConfigError("checkpoint block has a partial value");
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t u = 0;
    for (int s = 7; s >= 0; --s)
      u = (u << 8) | static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(s)]);
    values[i] = std::bit_cast<double>(u);
  }
  return values;
}

json encode_block(const std::vector<double>& values) {
  return base64_encode(doubles_to_le_bytes(values));
}

std::vector<double> decode_block(const json& j, std::size_t expected) {
  auto values = le_bytes_to_doubles(base64_decode(j.get<std::string>()));
  if (values.size() != expected)
    throw ConfigError("checkpoint block has wrong element count");
  return values;
}

json layer_to_json(const LinearLayer& l) {
  json j;
  j["out"] = l.out_dim();
  j["in"] = l.in_dim();
  j["w"] = encode_block(l.w.v);
  j["b"] = encode_block(l.b);
  return j;
}

LinearLayer layer_from_json(const json& j) {
  LinearLayer l(j.at("out").get<int>(), j.at("in").get<int>());
  l.w.v = decode_block(j.at("w"), l.w.size());
  l.b = decode_block(j.at("b"), l.b.size());
  return l;
}

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ") + what + " " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::filesystem::path& path, const json& j, const char* what) {
  std::ofstream out(path);
  if (!out) throw Error(std::string("cannot write ") + what + ": " + path.string());
  out << j.dump(2) << "\n";
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr_head"] = cfg.lr_head;
  j["lr_adapter"] = cfg.lr_adapter;
  j["h1"] = cfg.h1;
  j["h2"] = cfg.h2;
  j["seed"] = cfg.seed;
  j["weight_decay"] = cfg.weight_decay;
  j["momentum"] = cfg.momentum;
  j["val_fraction"] = cfg.val_fraction;
  j["score_threshold"] = cfg.score_threshold;
  j["with_adapter"] = cfg.with_adapter;
  j["keep_last"] = cfg.keep_last;
  return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     std::uint64_t taxonomy_hash, const TrainConfig& cfg) {
  json j;
  j["version"] = "MLP1";
  j["dims"] = {{"d", params.in_dim()},
               {"h1", params.l1.out_dim()},
               {"h2", params.l2.out_dim()},
               {"k", params.k()}};
  j["taxonomy_hash"] = taxonomy_hash;
  j["config"] = train_config_to_json(cfg);
  if (params.adapter) j["adapter"] = layer_to_json(*params.adapter);
  j["l1"] = layer_to_json(params.l1);
  j["l2"] = layer_to_json(params.l2);
  j["l3"] = layer_to_json(params.l3);
  write_json_file(path, j, "checkpoint");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = read_json_file(path, "checkpoint");
  if (j.value("version", "") != "MLP1")
    throw ConfigError("unsupported checkpoint version in " + path.string());
  Checkpoint ck;
  ck.taxonomy_hash = j.at("taxonomy_hash").get<std::uint64_t>();
  ck.config = j.value("config", json::object());
  if (j.contains("adapter")) ck.params.adapter = layer_from_json(j["adapter"]);
  ck.params.l1 = layer_from_json(j.at("l1"));
  ck.params.l2 = layer_from_json(j.at("l2"));
  ck.params.l3 = layer_from_json(j.at("l3"));
  const auto& dims = j.at("dims");
  if (ck.params.in_dim() != dims.at("d").get<int>() ||
      ck.params.k() != dims.at("k").get<int>())
    throw ConfigError("checkpoint dims do not match parameter blocks");
  return ck;
}

void save_svm(const std::filesystem::path& path, const SvmModel& model) {
  json j;
  j["version"] = "SVM1";
  j["dim"] = model.weight.size();
  j["weight"] = encode_block(model.weight);
  j["bias"] = encode_block({model.bias});
  j["scale"] = encode_block({model.scale});
  write_json_file(path, j, "svm checkpoint");
}

SvmModel load_svm(const std::filesystem::path& path) {
  const json j = read_json_file(path, "svm checkpoint");
  if (j.value("version", "") != "SVM1")
    throw ConfigError("unsupported svm checkpoint version in " + path.string());
  SvmModel m;
  m.weight = decode_block(j.at("weight"), j.at("dim").get<std::size_t>());
  m.bias = decode_block(j.at("bias"), 1)[0];
  m.scale = decode_block(j.at("scale"), 1)[0];
  if (!(m.scale > 0.0)) throw ConfigError("svm checkpoint scale must be positive");
  return m;
}

std::string checkpoint_version(const std::filesystem::path& path) {
  return read_json_file(path, "checkpoint").value("version", "");
}

nlohmann::json history_to_json(const TrainHistory& history) {
  json j;
  j["best_epoch"] = history.best_epoch;
  j["epochs"] = json::array();
  for (const auto& e : history.epochs) {
    json ej;
    ej["mean_loss"] = e.mean_loss;
    ej["val_hybrid_auc"] = std::isnan(e.val_hybrid_auc) ? json() : json(e.val_hybrid_auc);
    ej["val_accuracy"] = e.val_accuracy;
    j["epochs"].push_back(ej);
  }
  return j;
}

}  // namespace hybridet
