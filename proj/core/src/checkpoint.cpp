#include "sdfa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sdfa {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'D', 'F', 'A', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"in_channels", c.in_channels},
              {"channels", {c.channels[0], c.channels[1], c.channels[2]}},
              {"tcn_kernels", {c.tcn_kernels[0], c.tcn_kernels[1]}},
              {"tcn_strides", {c.tcn_strides[0], c.tcn_strides[1]}},
              {"num_classes", c.num_classes},
              {"p_joint", c.p_joint},
              {"p_frame", c.p_frame},
              {"learnable_adjacency", c.learnable_adjacency},
              {"scalar_adjacency_gate", c.scalar_adjacency_gate},
              {"block_masking", c.block_masking},
              {"fusion", to_string(c.fusion)},
              {"adjacency_norm", to_string(c.adjacency_norm)},
              {"graph", "body25"}};
}

ModelConfig config_from_json(const json& j) {
  if (j.value("graph", "body25") != std::string("body25")) {
    throw DataError("checkpoint: only body25-graph models are checkpointable");
  }
  ModelConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  const auto& ch = j.at("channels");
  c.channels = {ch[0].get<int>(), ch[1].get<int>(), ch[2].get<int>()};
  const auto& ks = j.at("tcn_kernels");
  c.tcn_kernels = {ks[0].get<int>(), ks[1].get<int>()};
  const auto& st = j.at("tcn_strides");
  c.tcn_strides = {st[0].get<int>(), st[1].get<int>()};
  c.num_classes = j.at("num_classes").get<int>();
  c.p_joint = j.at("p_joint").get<double>();
  c.p_frame = j.at("p_frame").get<double>();
  c.learnable_adjacency = j.at("learnable_adjacency").get<bool>();
  c.scalar_adjacency_gate = j.value("scalar_adjacency_gate", false);
  c.block_masking = j.value("block_masking", false);
  c.fusion = fusion_from_string(j.at("fusion").get<std::string>());
  c.adjacency_norm = adjacency_norm_from_string(j.at("adjacency_norm").get<std::string>());
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, SdfaModel& model) {
  auto tensors = model.state();

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = config_to_json(model.config);
  json tensor_list = json::array();
  std::uint64_t offset = 0;
  for (const auto& ref : tensors) {
    const std::uint64_t bytes = ref.data->size() * sizeof(float);
    tensor_list.push_back(json{
        {"name", ref.name},
        {"shape", {ref.shape.n, ref.shape.c, ref.shape.t, ref.shape.v}},
        {"offset", offset},
        {"size", ref.data->size()}});
    offset += bytes;
  }
  manifest["tensors"] = std::move(tensor_list);
  const std::string mtext = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t msize = mtext.size();
  out.write(reinterpret_cast<const char*>(&msize), sizeof(msize));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& ref : tensors) {
    out.write(reinterpret_cast<const char*>(ref.data->data()),
              static_cast<std::streamsize>(ref.data->size() * sizeof(float)));
  }
  if (!out) throw DataError("short write to " + path.string());
}

SdfaModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError(path.string() + ": not a checkpoint file");
  }
  std::uint64_t msize = 0;
  if (!in.read(reinterpret_cast<char*>(&msize), sizeof(msize))) {
    throw ParseError(path.string() + ": truncated manifest header");
  }
  std::string mtext(msize, '\0');
  if (!in.read(mtext.data(), static_cast<std::streamsize>(msize))) {
    throw ParseError(path.string() + ": truncated manifest");
  }
  json manifest;
  try {
    manifest = json::parse(mtext);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad manifest: " + e.what());
  }
  if (manifest.value("format_version", -1) != kFormatVersion) {
    throw DataError(path.string() + ": unsupported checkpoint format version");
  }

  SdfaModel model = build_model<float>(config_from_json(manifest.at("config")), 0);
  auto tensors = model.state();
  const json& listed = manifest.at("tensors");
  if (listed.size() != tensors.size()) {
    throw DataError(path.string() + ": checkpoint lists " +
                    std::to_string(listed.size()) + " tensors, model has " +
                    std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const json& entry = listed[i];
    auto& ref = tensors[i];
    if (entry.at("name").get<std::string>() != ref.name) {
      throw DataError(path.string() + ": tensor " + std::to_string(i) + " is '" +
                      entry.at("name").get<std::string>() + "', expected '" +
                      ref.name + "'");
    }
    const auto& sh = entry.at("shape");
    Shape4 shape{sh[0].get<int>(), sh[1].get<int>(), sh[2].get<int>(), sh[3].get<int>()};
    if (!(shape == ref.shape) || entry.at("size").get<std::size_t>() != ref.data->size()) {
      throw DataError(path.string() + ": shape mismatch on tensor '" + ref.name + "'");
    }
    if (!in.read(reinterpret_cast<char*>(ref.data->data()),
                 static_cast<std::streamsize>(ref.data->size() * sizeof(float)))) {
      throw ParseError(path.string() + ": truncated payload at tensor '" + ref.name + "'");
    }
  }
  return model;
}

}  // namespace sdfa
