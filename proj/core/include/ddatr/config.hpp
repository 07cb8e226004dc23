#pragma once

// Run configuration: one flat key-value record covering data, model,
// optimizer and ablation settings. Defaults mirror the training recipe
// (AdamW, lr 5e-5, weight decay 0.05, 10 epochs, batch 16, loss weight 4);
// everything is overridable from a JSON config file or CLI flags.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddatr/backbone.hpp"
#include "ddatr/decoder.hpp"
#include "ddatr/synth.hpp"

namespace ddatr {

enum class Precision : std::uint8_t { kF32 = 4, kF64 = 8 };

Precision precision_from_name(const std::string& name);  // "f32" / "f64"
const char* precision_name(Precision p);

struct AblationFlags {
  bool multi_stage_fusion = true;   // off = fuse at the final stage only
  bool dfam_enabled = true;         // off = prior branch without text alignment
  bool ddam_enabled = true;         // off = current branch never sees the prior
  bool dynamic_fusion_enabled = true;  // off = both gates pass through
};

struct OptimizerConfig {
  double lr = 5e-5;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
};

struct RunConfig {
  std::uint64_t seed = 0;
  Precision precision = Precision::kF32;

  BackboneConfig backbone;
  bool share_branches = false;

  std::size_t text_embed_dim = 64;
  std::size_t max_text_len = 100;

  DecoderConfig decoder;

  AblationFlags ablation;
  bool use_prior = true;  // off = train/evaluate with every prior ignored

  OptimizerConfig optimizer;
  double loss_weight = 4.0;
  bool teacher_forcing = false;
  bool augment = false;
  std::size_t augment_crop = 28;
  double augment_max_rotation_deg = 5.0;

  std::string data_dir;
  std::string out_dir = "out";

  void validate() const;

  FusionConfig fusion() const {
    FusionConfig f;
    f.multi_stage = ablation.multi_stage_fusion;
    f.alignment = ablation.dfam_enabled;
    f.difference = ablation.ddam_enabled;
    f.dynamic_fusion = ablation.dynamic_fusion_enabled;
    return f;
  }
};

// Named ablation rows: none, no-msf, no-dam, no-fam, no-df.
void apply_ablation(RunConfig& cfg, const std::string& name);
std::vector<std::string> ablation_row_names();

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& js);  // rejects unknown keys
RunConfig load_config_file(const std::string& path);

}  // namespace ddatr
