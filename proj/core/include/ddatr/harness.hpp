#pragma once

// Batch entry points behind the CLI: corpus generation, deterministic
// training, evaluation with metric emission, block-wise gradient checking
// and the ablation table. Training internals are precision-templated and
// dispatched on RunConfig::precision.

#include <string>
#include <vector>

#include <json.hpp>

#include "ddatr/config.hpp"
#include "ddatr/synth.hpp"

namespace ddatr {

struct SplitSpec {
  enum class Kind { kAll, kNoPrior, kWithPrior, kFraction };
  Kind kind = Kind::kAll;
  double fraction = 1.0;

  // "all" | "no-prior" | "with-prior" | "fraction=<f>"
  static SplitSpec parse(const std::string& text);
  std::string describe() const;
};

// Deterministic split selection: every no-prior record plus (for
// fraction=f) a seeded selection of f * n_with_prior prior-bearing records.
std::vector<std::size_t> select_split(const std::vector<StudyRecord>& records, const SplitSpec& spec,
                                      std::uint64_t seed);

// gen-data: corpus to disk, returns summary.
nlohmann::json run_gen_data(const CorpusConfig& cfg, const std::string& out_dir);

// train: optimizes the combined loss over the corpus at cfg.data_dir,
// writes step/epoch CSVs and the final checkpoint under cfg.out_dir.
nlohmann::json run_train(const RunConfig& cfg);

// eval: loads a checkpoint, generates a report per record of the selected
// split, scores clinical-efficacy and NLG metrics, writes metrics.json/

// metrics.csv plus the generated reports and their metadata records.
nlohmann::json run_eval(const std::string& checkpoint_path, const std::string& data_dir,
                        const SplitSpec& split, const std::string& out_dir,
                        std::uint64_t split_seed = 0);

// generate: reports only (no metrics); same outputs as eval minus scoring.
nlohmann::json run_generate(const std::string& checkpoint_path, const std::string& data_dir,
                            const SplitSpec& split, const std::string& out_dir,
                            std::uint64_t split_seed = 0);

// gradcheck: 64-bit finite-difference validation per architecture block.
nlohmann::json run_gradcheck(std::uint64_t seed = 0);

// ablate: trains and evaluates every ablation row plus the full model.
nlohmann::json run_ablate(const RunConfig& base, const std::string& test_data_dir);

// Stable column order of the metrics record.
const std::vector<std::string>& metric_record_keys();

// Helper shared with the acceptance suite: metrics json -> one CSV line.
std::string metrics_csv_header();
std::string metrics_csv_row(const nlohmann::json& metrics);

}  // namespace ddatr
