// ddatr command-line tool: synthetic corpus generation, training,
// evaluation, report generation, gradient checking and ablation runs.

#include <CLI11.hpp>
#include <iostream>

#include "ddatr/config.hpp"
#include "ddatr/harness.hpp"

namespace {

struct CommonModelFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string precision;
  std::string ablation = "none";
  std::string data;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file with RunConfig fields");
    cmd->add_option("--seed", seed, "run seed")->each([this](const std::string&) { seed_set = true; });
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--precision", precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    cmd->add_option("--ablation", ablation, "none, no-msf, no-dam, no-fam or no-df")
        ->check(CLI::IsMember({"none", "no-msf", "no-dam", "no-fam", "no-df"}));
    cmd->add_option("--data", data, "corpus directory");
  }

  ddatr::RunConfig build() const {
    ddatr::RunConfig cfg;
    if (!config_path.empty()) cfg = ddatr::load_config_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (!out.empty()) cfg.out_dir = out;
    if (!precision.empty()) cfg.precision = ddatr::precision_from_name(precision);
    if (!data.empty()) cfg.data_dir = data;
    ddatr::apply_ablation(cfg, ablation);
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddatr: longitudinal radiology report generation on synthetic data"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic longitudinal corpus");
  ddatr::CorpusConfig corpus_cfg;
  std::string gen_out = "corpus";
  gen->add_option("--seed", corpus_cfg.seed, "corpus seed");
  gen->add_option("--patients", corpus_cfg.n_patients, "number of patients");
  gen->add_option("--visits", corpus_cfg.visits_per_patient, "visits per patient");
  gen->add_option("--prior-fraction", corpus_cfg.prior_fraction,
                  "fraction of records carrying a prior exam");
  gen->add_option("--image-size", corpus_cfg.image_size, "square image extent");
  gen->add_option("--noise-sigma", corpus_cfg.noise_sigma, "additive noise level");
  gen->add_option("--out", gen_out, "corpus output directory");

  // train
  auto* train = app.add_subcommand("train", "train a model on a corpus");
  CommonModelFlags train_flags;
  train_flags.attach(train);
  std::size_t train_epochs = 0;
  double train_lr = -1.0;
  train->add_option("--epochs", train_epochs, "override epoch count");
  train->add_option("--lr", train_lr, "override learning rate");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
  std::string eval_ckpt, eval_data, eval_out = "eval", eval_split = "all";
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "corpus directory")->required();
  eval->add_option("--split", eval_split, "all | no-prior | with-prior | fraction=<f>");
  eval->add_option("--out", eval_out, "output directory");
  eval->add_option("--seed", eval_seed, "split selection seed");

  // generate
  auto* generate = app.add_subcommand("generate", "generate reports without scoring");
  std::string g_ckpt, g_data, g_out = "generated", g_split = "all";
  std::uint64_t g_seed = 0;
  generate->add_option("--checkpoint", g_ckpt, "checkpoint file")->required();
  generate->add_option("--data", g_data, "corpus directory")->required();
  generate->add_option("--split", g_split, "all | no-prior | with-prior | fraction=<f>");
  generate->add_option("--out", g_out, "output directory");
  generate->add_option("--seed", g_seed, "split selection seed");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "64-bit gradient checks per block");
  std::uint64_t gc_seed = 0;
  gradcheck->add_option("--seed", gc_seed, "probe seed");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and evaluate every ablation row");
  CommonModelFlags ablate_flags;
  ablate_flags.attach(ablate);
  std::string ablate_test_data;
  ablate->add_option("--test-data", ablate_test_data, "held-out corpus directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      std::cout << ddatr::run_gen_data(corpus_cfg, gen_out).dump(2) << '\n';
    } else if (*train) {
      ddatr::RunConfig cfg = train_flags.build();
      if (train_epochs > 0) cfg.optimizer.epochs = train_epochs;
      if (train_lr > 0) cfg.optimizer.lr = train_lr;
      std::cout << ddatr::run_train(cfg).dump(2) << '\n';
    } else if (*eval) {
      std::cout << ddatr::run_eval(eval_ckpt, eval_data, ddatr::SplitSpec::parse(eval_split),
                                   eval_out, eval_seed)
                       .dump(2)
                << '\n';
    } else if (*generate) {
      std::cout << ddatr::run_generate(g_ckpt, g_data, ddatr::SplitSpec::parse(g_split), g_out,
                                       g_seed)
                       .dump(2)
                << '\n';
    } else if (*gradcheck) {
      const auto report = ddatr::run_gradcheck(gc_seed);
      std::cout << report.dump(2) << '\n';
      if (report.at("max").get<double>() >= 1e-4) {
        std::cerr << "gradcheck FAILED: max relative error " << report.at("max") << '\n';
        return 1;
      }
    } else if (*ablate) {
      ddatr::RunConfig cfg = ablate_flags.build();
      std::cout << ddatr::run_ablate(cfg, ablate_test_data).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
