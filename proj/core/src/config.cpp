#include "ddatr/config.hpp"

#include <fstream>
#include <set>

namespace ddatr {

using nlohmann::json;

Precision precision_from_name(const std::string& name) {
  if (name == "f32") return Precision::kF32;
  if (name == "f64") return Precision::kF64;
  throw std::invalid_argument("unknown precision: " + name + " (expected f32 or f64)");
}

const char* precision_name(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

void RunConfig::validate() const {
  backbone.validate();
  decoder.validate();
  if (optimizer.batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
  if (optimizer.epochs == 0) throw std::invalid_argument("config: epochs must be positive");
  if (loss_weight < 0) throw std::invalid_argument("config: loss weight must be non-negative");
  if (text_embed_dim == 0) throw std::invalid_argument("config: text_embed_dim must be positive");
  if (max_text_len == 0) throw std::invalid_argument("config: max_text_len must be positive");
}

void apply_ablation(RunConfig& cfg, const std::string& name) {
  if (name == "none") return;
  if (name == "no-msf") {
    cfg.ablation.multi_stage_fusion = false;
  } else if (name == "no-dam") {
    cfg.ablation.ddam_enabled = false;
  } else if (name == "no-fam") {
    cfg.ablation.dfam_enabled = false;
  } else if (name == "no-df") {
    cfg.ablation.dynamic_fusion_enabled = false;
  } else {
    throw std::invalid_argument("unknown ablation: " + name +
                                " (expected none, no-msf, no-dam, no-fam or no-df)");
  }
}

std::vector<std::string> ablation_row_names() {
  return {"none", "no-msf", "no-dam", "no-fam", "no-df"};
}

json config_to_json(const RunConfig& cfg) {
  json js;
  js["seed"] = cfg.seed;
  js["precision"] = precision_name(cfg.precision);
  js["stages"] = cfg.backbone.stages;
  js["channels"] = cfg.backbone.channels;
  js["input_channels"] = cfg.backbone.input_channels;
  js["input_height"] = cfg.backbone.input_height;
  js["input_width"] = cfg.backbone.input_width;
  js["downsample"] = cfg.backbone.downsample;
  js["share_branches"] = cfg.share_branches;
  js["text_embed_dim"] = cfg.text_embed_dim;
  js["max_text_len"] = cfg.max_text_len;
  js["decoder_layers"] = cfg.decoder.layers;
  js["decoder_width"] = cfg.decoder.width;
  js["decoder_heads"] = cfg.decoder.heads;
  js["decoder_ffn_width"] = cfg.decoder.ffn_width;
  js["max_gen_len"] = cfg.decoder.max_gen_len;
  js["beam_width"] = cfg.decoder.beam_width;
  js["multi_stage_fusion"] = cfg.ablation.multi_stage_fusion;
  js["dfam_enabled"] = cfg.ablation.dfam_enabled;
  js["ddam_enabled"] = cfg.ablation.ddam_enabled;
  js["dynamic_fusion_enabled"] = cfg.ablation.dynamic_fusion_enabled;
  js["use_prior"] = cfg.use_prior;
  js["lr"] = cfg.optimizer.lr;
  js["weight_decay"] = cfg.optimizer.weight_decay;
  js["beta1"] = cfg.optimizer.beta1;
  js["beta2"] = cfg.optimizer.beta2;
  js["eps"] = cfg.optimizer.eps;
  js["epochs"] = cfg.optimizer.epochs;
  js["batch_size"] = cfg.optimizer.batch_size;
  js["loss_weight"] = cfg.loss_weight;
  js["teacher_forcing"] = cfg.teacher_forcing;
  js["augment"] = cfg.augment;
  js["augment_crop"] = cfg.augment_crop;
  js["augment_max_rotation_deg"] = cfg.augment_max_rotation_deg;
  js["data_dir"] = cfg.data_dir;
  js["out_dir"] = cfg.out_dir;
  return js;
}

RunConfig config_from_json(const json& js) {
  static const std::set<std::string> known = {
      "seed",          "precision",       "stages",
      "channels",      "input_channels",  "input_height",
      "input_width",   "downsample",      "share_branches",
      "text_embed_dim", "max_text_len",   "decoder_layers",
      "decoder_width", "decoder_heads",   "decoder_ffn_width",
      "max_gen_len",   "beam_width",      "multi_stage_fusion",
      "dfam_enabled",  "ddam_enabled",    "dynamic_fusion_enabled",
      "use_prior",     "lr",              "weight_decay",
      "beta1",         "beta2",           "eps",
      "epochs",        "batch_size",      "loss_weight",
      "teacher_forcing", "augment",       "augment_crop",
      "augment_max_rotation_deg", "data_dir", "out_dir"};
  for (auto it = js.begin(); it != js.end(); ++it) {
    if (!known.count(it.key())) throw std::invalid_argument("config: unknown key " + it.key());
  }

  RunConfig cfg;
  auto get = [&js](const char* key, auto& target) {
    if (js.contains(key)) target = js.at(key).get<std::decay_t<decltype(target)>>();
  };
  get("seed", cfg.seed);
  if (js.contains("precision")) {
    cfg.precision = precision_from_name(js.at("precision").get<std::string>());
  }
  get("stages", cfg.backbone.stages);
  get("channels", cfg.backbone.channels);
  get("input_channels", cfg.backbone.input_channels);
  get("input_height", cfg.backbone.input_height);
  get("input_width", cfg.backbone.input_width);
  get("downsample", cfg.backbone.downsample);
  get("share_branches", cfg.share_branches);
  get("text_embed_dim", cfg.text_embed_dim);
  get("max_text_len", cfg.max_text_len);
  get("decoder_layers", cfg.decoder.layers);
  get("decoder_width", cfg.decoder.width);
  get("decoder_heads", cfg.decoder.heads);
  get("decoder_ffn_width", cfg.decoder.ffn_width);
  get("max_gen_len", cfg.decoder.max_gen_len);
  get("beam_width", cfg.decoder.beam_width);
  get("multi_stage_fusion", cfg.ablation.multi_stage_fusion);
  get("dfam_enabled", cfg.ablation.dfam_enabled);
  get("ddam_enabled", cfg.ablation.ddam_enabled);
  get("dynamic_fusion_enabled", cfg.ablation.dynamic_fusion_enabled);
  get("use_prior", cfg.use_prior);
  get("lr", cfg.optimizer.lr);
  get("weight_decay", cfg.optimizer.weight_decay);
  get("beta1", cfg.optimizer.beta1);
  get("beta2", cfg.optimizer.beta2);
  get("eps", cfg.optimizer.eps);
  get("epochs", cfg.optimizer.epochs);
  get("batch_size", cfg.optimizer.batch_size);
  get("loss_weight", cfg.loss_weight);
  get("teacher_forcing", cfg.teacher_forcing);
  get("augment", cfg.augment);
  get("augment_crop", cfg.augment_crop);
  get("augment_max_rotation_deg", cfg.augment_max_rotation_deg);
  get("data_dir", cfg.data_dir);
  get("out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  return config_from_json(json::parse(is));
}

}  // namespace ddatr
