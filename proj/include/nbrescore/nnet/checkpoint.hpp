#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "nbrescore/common.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/nnet/scoring.hpp"

namespace nbrescore::nnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'N', 'B', 'R', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Variant variant = Variant::Baseline;
  ScorerModel model;
};

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header
/// (variant, architecture, model config, tensor names and shapes), then
/// every tensor's values as little-endian doubles in header order.
inline void save_checkpoint(const ScorerModel& model, Variant variant, const std::string& path) {
  if (architecture_for(variant) != model.architecture()) {
    throw std::invalid_argument("variant does not match model architecture");
  }
  const auto& cfg = model.config();
  const auto& params = model.parameters();
  nlohmann::ordered_json header;
  header["variant"] = std::string(to_string(variant));
  header["architecture"] = std::string(to_string(model.architecture()));
  header["config"] = {{"hidden_size", cfg.hidden_size},
                      {"num_layers", cfg.num_layers},
                      {"num_heads", cfg.num_heads},
                      {"intermediate_size", cfg.intermediate_size},
                      {"dropout", cfg.dropout},
                      {"vocab_size", cfg.vocab_size},
                      {"max_positions", cfg.max_positions}};
  auto tensors = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params.value(ParamId{i});
    tensors.push_back({{"name", params.name(ParamId{i})}, {"rows", v.rows()}, {"cols", v.cols()}});
  }
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params.value(ParamId{i});
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

// Throws ValidationError when `expected_vocab_size` is non-zero and differs
// from the stored config, and FormatError on any structural mismatch.
inline Checkpoint load_checkpoint(const std::string& path, std::size_t expected_vocab_size = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError(path + ": not a checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  if (length > (1u << 26)) throw FormatError(path + ": corrupt header");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw FormatError(path + ": truncated header");

  nlohmann::json header;
  ModelConfig cfg;
  Variant variant;
  Architecture arch;
  try {
    header = nlohmann::json::parse(text);
    const auto& c = header.at("config");
    cfg.hidden_size = c.at("hidden_size").get<std::size_t>();
    cfg.num_layers = c.at("num_layers").get<std::size_t>();
    cfg.num_heads = c.at("num_heads").get<std::size_t>();
    cfg.intermediate_size = c.at("intermediate_size").get<std::size_t>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.vocab_size = c.at("vocab_size").get<std::size_t>();
    cfg.max_positions = c.at("max_positions").get<std::size_t>();
    variant = parse_variant(header.at("variant").get<std::string>());
    arch = parse_architecture(header.at("architecture").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  }
  if (architecture_for(variant) != arch) throw FormatError(path + ": variant/architecture mismatch");
  if (expected_vocab_size != 0 && cfg.vocab_size != expected_vocab_size) {
    throw ValidationError(path + ": config mismatch: checkpoint vocab_size " +
                          std::to_string(cfg.vocab_size) + " but vocabulary has " +
                          std::to_string(expected_vocab_size) + " entries");
  }

  Checkpoint ck{variant, ScorerModel(arch, cfg, 0)};
  auto& params = ck.model.parameters();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) throw FormatError(path + ": tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamId id{i};
    auto& v = params.value(id);
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params.name(id) ||
        t.at("rows").get<Eigen::Index>() != v.rows() || t.at("cols").get<Eigen::Index>() != v.cols()) {
      throw FormatError(path + ": tensor " + params.name(id) + " does not match config");
    }
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw FormatError(path + ": truncated tensor data");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
  return ck;
}

}  // namespace nbrescore::nnet
