#pragma once

// Checkpoint container. Binary layout, little-endian:
//   magic "DDCK" | version u16 | elem width u16
//   | config JSON (u64 length + bytes)      -- includes vocab + finding names
//   | epoch u32 | optimizer step u64
//   | param count u64
//   | per param: name (u64 length + bytes), tensor, adamw m tensor, adamw v tensor
// Loading rebuilds the model from the config snapshot and restores every
// value bit-exactly at matching precision.

#include <fstream>
#include <string>

#include <json.hpp>

#include "ddatr/config.hpp"
#include "ddatr/model.hpp"
#include "ddatr/optimizer.hpp"
#include "ddatr/tensor_io.hpp"

namespace ddatr {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointInfo {
  Precision precision = Precision::kF32;
  RunConfig config;
  std::vector<std::string> vocab_tokens;
  std::vector<std::string> finding_names;
  std::uint32_t epoch = 0;
  nlohmann::json metric_history;
};

namespace detail {

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint64_t>(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_le<std::uint64_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  return s;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model, const AdamW<T>& opt,
                     std::uint32_t epoch, const nlohmann::json& metric_history) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw TensorIoError("cannot open checkpoint " + path + " for writing");
  os.write("DDCK", 4);
  detail::write_le<std::uint16_t>(os, kCheckpointVersion);
  detail::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(sizeof(T)));

  nlohmann::json header;
  header["config"] = config_to_json(model.cfg);
  header["vocab"] = nlohmann::json::array();
  for (std::size_t i = 0; i < model.vocab.size(); ++i) header["vocab"].push_back(model.vocab.token(i));
  header["findings"] = nlohmann::json::array();
  for (const auto& f : SyntheticOntology::standard().findings) header["findings"].push_back(f.name);
  header["metric_history"] = metric_history;
  detail::write_string(os, header.dump());

  detail::write_le<std::uint32_t>(os, epoch);
  detail::write_le<std::uint64_t>(os, opt.step_count());
  detail::write_le<std::uint64_t>(os, model.params.count());
  for (std::size_t i = 0; i < model.params.count(); ++i) {
    const auto& entry = model.params.entries()[i];
    detail::write_string(os, entry.name);
    write_tensor(os, entry.tensor);
    const auto& mom = opt.moments()[i];
    write_tensor(os, Tensor<T>::from_data(entry.tensor.shape(), mom.m));
    write_tensor(os, Tensor<T>::from_data(entry.tensor.shape(), mom.v));
  }
  if (!os) throw TensorIoError("checkpoint write failed: " + path);
}

inline CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorIoError("cannot open checkpoint " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DDCK", 4) != 0) throw TensorIoError("bad checkpoint magic");
  const auto version = detail::read_le<std::uint16_t>(is);
  if (version != kCheckpointVersion) throw TensorIoError("unsupported checkpoint version");
  const auto width = detail::read_le<std::uint16_t>(is);

  CheckpointInfo info;
  info.precision = width == 4 ? Precision::kF32 : Precision::kF64;
  nlohmann::json header = nlohmann::json::parse(detail::read_string(is));
  info.config = config_from_json(header.at("config"));
  for (const auto& t : header.at("vocab")) info.vocab_tokens.push_back(t.get<std::string>());
  for (const auto& t : header.at("findings")) info.finding_names.push_back(t.get<std::string>());
  info.metric_history = header.at("metric_history");
  info.epoch = detail::read_le<std::uint32_t>(is);
  return info;
}

// Rebuilds the model + optimizer from a checkpoint. T must match the stored
// precision.
template <typename T>
struct LoadedModel {
  std::unique_ptr<Model<T>> model;
  std::unique_ptr<AdamW<T>> optimizer;
  std::uint32_t epoch = 0;
  nlohmann::json metric_history;
};

template <typename T>
LoadedModel<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorIoError("cannot open checkpoint " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DDCK", 4) != 0) throw TensorIoError("bad checkpoint magic");
  const auto version = detail::read_le<std::uint16_t>(is);
  if (version != kCheckpointVersion) throw TensorIoError("unsupported checkpoint version");
  const auto width = detail::read_le<std::uint16_t>(is);
  if (width != sizeof(T)) {
    throw TensorIoError("checkpoint precision does not match the requested precision");
  }

  nlohmann::json header = nlohmann::json::parse(detail::read_string(is));
  RunConfig cfg = config_from_json(header.at("config"));
  Vocabulary vocab;
  {
    const auto& tokens = header.at("vocab");
    for (std::size_t i = Vocabulary::kNumReserved; i < tokens.size(); ++i) {
      vocab.add(tokens.at(i).get<std::string>());
    }
  }

  LoadedModel<T> out;
  out.model = std::make_unique<Model<T>>(cfg, vocab);
  out.optimizer = std::make_unique<AdamW<T>>(out.model->params, cfg.optimizer);
  out.metric_history = header.at("metric_history");
  out.epoch = detail::read_le<std::uint32_t>(is);
  out.optimizer->set_step_count(detail::read_le<std::uint64_t>(is));

  const auto count = detail::read_le<std::uint64_t>(is);
  if (count != out.model->params.count()) {
    throw TensorIoError("checkpoint parameter count does not match the rebuilt model");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = detail::read_string(is);
    const auto& entry = out.model->params.entries()[i];
    if (name != entry.name) {
      throw TensorIoError("checkpoint parameter order mismatch at " + name);
    }
    Tensor<T> value = read_tensor<T>(is);
    if (value.shape() != entry.tensor.shape()) {
      throw TensorIoError("checkpoint shape mismatch for " + name);
    }
    Tensor<T> param = entry.tensor;  // handle copy, shared storage
    param.values() = value.values();
    out.optimizer->moments()[i].m = read_tensor<T>(is).values();
    out.optimizer->moments()[i].v = read_tensor<T>(is).values();
  }
  return out;
}

}  // namespace ddatr
