#include "drht/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace drht {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kind_name(LayerKind k) { return k == LayerKind::Conv ? "conv" : "deconv"; }

LayerKind kind_from(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "deconv") return LayerKind::Deconv;
  throw CheckpointError("unknown layer kind '" + s + "'");
}

json layer_json(const LayerSpec& l) {
  return json{{"kind", kind_name(l.kind)}, {"in_channels", l.in_channels}, {"out_channels", l.out_channels},
              {"kernel", l.kernel},        {"stride", l.stride},           {"has_bn", l.has_bn},
              {"has_act", l.has_act}};
}

LayerSpec layer_from(const json& j) {
  LayerSpec l;
  l.kind = kind_from(j.at("kind").get<std::string>());
  l.in_channels = j.at("in_channels").get<std::size_t>();
  l.out_channels = j.at("out_channels").get<std::size_t>();
  l.kernel = j.at("kernel").get<std::size_t>();
  l.stride = j.at("stride").get<std::size_t>();
  l.has_bn = j.at("has_bn").get<bool>();
  l.has_act = j.at("has_act").get<bool>();
  return l;
}

void put_le32(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

float get_le32(const unsigned char* p) {
  const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                             (std::uint32_t{p[3]} << 24);
  return std::bit_cast<float>(bits);
}

std::uint32_t crc_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
  const std::string p = prefix + ".";
  for (const auto& t : tensors) {
    if (t.name.compare(0, p.size(), p) == 0) return true;
  }
  return false;
}

json to_json(const NetworkSpec& spec) {
  json enc = json::array(), dec = json::array(), skips = json::array();
  for (const auto& l : spec.encoder) enc.push_back(layer_json(l));
  for (const auto& l : spec.decoder) dec.push_back(layer_json(l));
  for (const auto& p : spec.skip_pairs) skips.push_back(json{{"encoder", p.encoder}, {"decoder", p.decoder}});
  return json{{"encoder", enc}, {"decoder", dec}, {"skip_pairs", skips}, {"residual_io", spec.residual_io}};
}

NetworkSpec network_spec_from_json(const json& j) {
  try {
    NetworkSpec s;
    for (const auto& l : j.at("encoder")) s.encoder.push_back(layer_from(l));
    for (const auto& l : j.at("decoder")) s.decoder.push_back(layer_from(l));
    for (const auto& p : j.at("skip_pairs")) {
      s.skip_pairs.push_back({p.at("encoder").get<std::size_t>(), p.at("decoder").get<std::size_t>()});
    }
    s.residual_io = j.at("residual_io").get<bool>();
    return s;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed network spec: ") + e.what());
  }
}

void append_params(Checkpoint& ckpt, const std::string& prefix, const ModelParams<float>& params) {
  for (const auto& l : params.layers) {
    const std::string base = prefix + "." + l.name + ".";
    ckpt.tensors.push_back({base + "weight", l.weight});
    ckpt.tensors.push_back({base + "bias", l.bias});
    if (l.has_bn()) {
      ckpt.tensors.push_back({base + "bn_gamma", l.bn_gamma});
      ckpt.tensors.push_back({base + "bn_beta", l.bn_beta});
      ckpt.tensors.push_back({base + "bn_mean", l.bn.running_mean});
      ckpt.tensors.push_back({base + "bn_var", l.bn.running_var});
    }
  }
}

ModelParams<float> extract_params(const Checkpoint& ckpt, const std::string& prefix) {
  // Shapes come from a freshly built network so any disagreement is caught per layer.
  ModelParams<float> params = build_network<float>(ckpt.spec, 0, 0.0);
  for (auto& l : params.layers) {
    auto take = [&](const char* field, Tensor<float>& dst) {
      const std::string name = prefix + "." + l.name + "." + field;
      const Tensor<float>* src = ckpt.find(name);
      if (!src) throw CheckpointError("checkpoint is missing " + name + " (layer " + l.name + ")");
      if (src->shape() != dst.shape()) {
        throw CheckpointError("layer " + l.name + ": " + name + " has shape " + to_string(src->shape()) +
                              " but the network expects " + to_string(dst.shape()));
      }
      dst = *src;
    };
    take("weight", l.weight);
    take("bias", l.bias);
    if (l.has_bn()) {
      take("bn_gamma", l.bn_gamma);
      take("bn_beta", l.bn_beta);
      take("bn_mean", l.bn.running_mean);
      take("bn_var", l.bn.running_var);
    }
  }
  return params;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  std::string blob;
  json entries = json::array();
  for (const auto& t : ckpt.tensors) {
    const std::size_t offset = blob.size();
    for (float v : t.value.values()) put_le32(blob, v);
    entries.push_back(json{{"name", t.name},
                           {"shape", t.value.shape()},
                           {"byte_offset", offset},
                           {"byte_len", blob.size() - offset}});
  }
  json manifest{{"format", "drht-checkpoint"},
                {"model_version", kCheckpointVersion},
                {"network_spec", to_json(ckpt.spec)},
                {"tensors", entries},
                {"params_bytes", blob.size()},
                {"params_crc32", crc_of(blob)},
                {"meta", ckpt.meta}};

  {
    std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
    bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!bin) throw IoError("cannot write " + (dir / "params.bin").string());
  }
  std::ofstream man(dir / "manifest.json", std::ios::trunc);
  man << manifest.dump(2) << '\n';
  if (!man) throw IoError("cannot write " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path man_path = dir / "manifest.json";
  const fs::path bin_path = dir / "params.bin";
  std::ifstream man(man_path);
  if (!man) throw CheckpointError("checkpoint manifest not found: " + man_path.string());
  json manifest;
  try {
    manifest = json::parse(man);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw CheckpointError("checkpoint payload not found: " + bin_path.string());
  const std::string blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  try {
    if (manifest.at("format") != "drht-checkpoint") throw CheckpointError("not a drht checkpoint");
    if (manifest.at("model_version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + manifest.at("model_version").dump());
    }
    if (manifest.at("params_bytes").get<std::size_t>() != blob.size()) {
      throw CheckpointError("integrity check failed: params.bin holds " + std::to_string(blob.size()) +
                            " bytes, manifest expects " + manifest.at("params_bytes").dump());
    }
    if (manifest.at("params_crc32").get<std::uint32_t>() != crc_of(blob)) {
      throw CheckpointError("integrity check failed: params.bin CRC-32 does not match the manifest");
    }
    ckpt.spec = network_spec_from_json(manifest.at("network_spec"));
    ckpt.meta = manifest.value("meta", json::object());
    std::size_t expected_offset = 0;
    for (const auto& e : manifest.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<Shape>();
      const auto offset = e.at("byte_offset").get<std::size_t>();
      const auto len = e.at("byte_len").get<std::size_t>();
      if (offset != expected_offset || len != 4 * element_count(shape) || offset + len > blob.size()) {
        throw CheckpointError("integrity check failed: bad extent for tensor " + name);
      }
      expected_offset += len;
      std::vector<float> data(len / 4);
      const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
      for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = get_le32(p + 4 * i);
        if (!std::isfinite(data[i])) throw CheckpointError("integrity check failed: non-finite value in " + name);
      }
      ckpt.tensors.push_back({name, Tensor<float>(shape, std::move(data))});
    }
    if (expected_offset != blob.size()) throw CheckpointError("integrity check failed: trailing bytes in params.bin");
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  } catch (const ShapeError& e) {
    throw CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace drht
