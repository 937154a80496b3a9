#include "sdfa/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace sdfa {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': '" + value + "' is not an integer");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': '" + value + "' is not an unsigned integer");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + value + "' is not a number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("key '" + key + "': '" + value + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value,
                                std::size_t expected) {
  auto items = split_list(value);
  if (items.size() != expected) {
    throw ConfigError("key '" + key + "': expected " + std::to_string(expected) +
                      " comma-separated integers");
  }
  std::vector<int> out;
  for (const auto& item : items) out.push_back(parse_int(key, item));
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    kv[key] = value;
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_key_values(buffer.str());
}

std::string config_digest(const KeyValues& kv) {
  std::uint64_t hash = 0xcbf29ce484222325ull;  // FNV-1a 64
  auto feed = [&hash](const std::string& s) {
    for (unsigned char ch : s) {
      hash ^= ch;
      hash *= 0x100000001b3ull;
    }
  };
  for (const auto& [key, value] : kv) {  // map iteration is sorted
    feed(key);
    feed("=");
    feed(value);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

PipelineConfig apply_key_values(const KeyValues& kv, PipelineConfig base) {
  PipelineConfig cfg = std::move(base);
  for (const auto& [key, value] : kv) {
    if (key == "in_channels") cfg.model.in_channels = parse_int(key, value);
    else if (key == "channels") {
      auto c = parse_int_list(key, value, 3);
      cfg.model.channels = {c[0], c[1], c[2]};
    } else if (key == "tcn_kernels") {
      auto k = parse_int_list(key, value, 2);
      cfg.model.tcn_kernels = {k[0], k[1]};
    } else if (key == "tcn_strides") {
      auto s = parse_int_list(key, value, 2);
      cfg.model.tcn_strides = {s[0], s[1]};
    } else if (key == "num_classes") cfg.model.num_classes = parse_int(key, value);
    else if (key == "p_joint") cfg.model.p_joint = parse_double(key, value);
    else if (key == "p_frame") cfg.model.p_frame = parse_double(key, value);
    else if (key == "learnable_adjacency") cfg.model.learnable_adjacency = parse_bool(key, value);
    else if (key == "scalar_adjacency_gate") cfg.model.scalar_adjacency_gate = parse_bool(key, value);
    else if (key == "block_masking") cfg.model.block_masking = parse_bool(key, value);
    else if (key == "fusion") cfg.model.fusion = fusion_from_string(value);
    else if (key == "adjacency_norm") cfg.model.adjacency_norm = adjacency_norm_from_string(value);
    else if (key == "lr0") cfg.train.lr0 = parse_double(key, value);
    else if (key == "momentum") cfg.train.momentum = parse_double(key, value);
    else if (key == "epochs") cfg.train.epochs = parse_int(key, value);
    else if (key == "decay_factor") cfg.train.decay_factor = parse_double(key, value);
    else if (key == "decay_every") cfg.train.decay_every = parse_int(key, value);
    else if (key == "batch_size") cfg.train.batch_size = parse_int(key, value);
    else if (key == "seed") cfg.train.seed = parse_u64(key, value);
    else if (key == "target") cfg.target_length = parse_int(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.model.validate();
  cfg.train.validate();
  if (cfg.target_length < 0) throw ConfigError("target must be >= 0");
  return cfg;
}

KeyValues to_key_values(const PipelineConfig& cfg) {
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  KeyValues kv;
  kv["in_channels"] = std::to_string(cfg.model.in_channels);
  kv["channels"] = std::to_string(cfg.model.channels[0]) + "," +
                   std::to_string(cfg.model.channels[1]) + "," +
                   std::to_string(cfg.model.channels[2]);
  kv["tcn_kernels"] = std::to_string(cfg.model.tcn_kernels[0]) + "," +
                      std::to_string(cfg.model.tcn_kernels[1]);
  kv["tcn_strides"] = std::to_string(cfg.model.tcn_strides[0]) + "," +
                      std::to_string(cfg.model.tcn_strides[1]);
  kv["num_classes"] = std::to_string(cfg.model.num_classes);
  kv["p_joint"] = fmt(cfg.model.p_joint);
  kv["p_frame"] = fmt(cfg.model.p_frame);
  kv["learnable_adjacency"] = cfg.model.learnable_adjacency ? "true" : "false";
  kv["scalar_adjacency_gate"] = cfg.model.scalar_adjacency_gate ? "true" : "false";
  kv["block_masking"] = cfg.model.block_masking ? "true" : "false";
  kv["fusion"] = to_string(cfg.model.fusion);
  kv["adjacency_norm"] = to_string(cfg.model.adjacency_norm);
  kv["lr0"] = fmt(cfg.train.lr0);
  kv["momentum"] = fmt(cfg.train.momentum);
  kv["epochs"] = std::to_string(cfg.train.epochs);
  kv["decay_factor"] = fmt(cfg.train.decay_factor);
  kv["decay_every"] = std::to_string(cfg.train.decay_every);
  kv["batch_size"] = std::to_string(cfg.train.batch_size);
  kv["seed"] = std::to_string(cfg.train.seed);
  kv["target"] = std::to_string(cfg.target_length);
  return kv;
}

std::string pipeline_digest(const PipelineConfig& cfg) {
  return config_digest(to_key_values(cfg));
}

SynthSpec synth_spec_from_key_values(const KeyValues& kv, SynthSpec base) {
  SynthSpec spec = std::move(base);
  for (const auto& [key, value] : kv) {
    if (key == "n_per_class") spec.n_per_class = parse_int(key, value);
    else if (key == "frames") spec.frames = parse_int(key, value);
    else if (key == "fps") spec.fps = parse_double(key, value);
    else if (key == "seed") spec.seed = parse_u64(key, value);
    else if (key == "noise_std") spec.noise_std = parse_double(key, value);
    else if (key == "fall_duration_frames") spec.fall_duration_frames = parse_int(key, value);
    else if (key == "adl_kinds") spec.adl_kinds = split_list(value);
    else throw ConfigError("unknown synth key '" + key + "'");
  }
  spec.validate();
  return spec;
}

}  // namespace sdfa
