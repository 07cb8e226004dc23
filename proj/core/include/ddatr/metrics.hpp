#pragma once

// Clinical-efficacy (precision/recall/F1 over binarized labels) and
// natural-language-generation (BLEU, ROUGE-L) metrics.

#include <cstdint>
#include <string>
#include <vector>

#include "ddatr/labels.hpp"

namespace ddatr {

// N samples x 14 findings of binarized labels, produced via map_attributes.
struct BinaryLabelMatrix {
  std::size_t rows = 0;
  std::vector<bool> cells;  // rows * kNumFindings, row-major

  void append(const std::array<bool, kNumFindings>& row) {
    for (bool b : row) cells.push_back(b);
    ++rows;
  }
  bool at(std::size_t r, std::size_t c) const { return cells[r * kNumFindings + c]; }
};

struct CeScores {
  double precision_macro = 0, recall_macro = 0, f1_macro = 0;
  double precision_micro = 0, recall_micro = 0, f1_micro = 0;
};

// Zero-denominator convention: P (or R) is 0 when its denominator is 0 and
// F1 is 0 when P+R is 0.
CeScores ce_scores(const BinaryLabelMatrix& pred, const BinaryLabelMatrix& gold);

// Pooled micro counts restricted to an arbitrary cell mask (same layout as
// the matrices). Used for per-progression-cell evaluation.
struct MicroCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};
MicroCounts micro_counts(const BinaryLabelMatrix& pred, const BinaryLabelMatrix& gold,
                         const std::vector<bool>* cell_mask = nullptr);

// Corpus-level BLEU with pooled modified n-gram counts and the standard
// brevity penalty; no smoothing. BLEU-n uses uniform 1/n log-weights over
// orders 1..n.
class BleuAccumulator {
 public:
  void add(const std::vector<std::string>& candidate,
           const std::vector<std::vector<std::string>>& references);
  double score(std::size_t max_order) const;

 private:
  static constexpr std::size_t kMaxOrder = 4;
  std::size_t clipped_[kMaxOrder] = {0, 0, 0, 0};
  std::size_t total_[kMaxOrder] = {0, 0, 0, 0};
  std::size_t candidate_len_ = 0;
  std::size_t reference_len_ = 0;  // closest reference length per sentence
};

// Single-pair convenience: a corpus of one.
double bleu(const std::vector<std::string>& candidate,
            const std::vector<std::vector<std::string>>& references, std::size_t max_order);

// LCS-based F-score with beta = 1.2 (recall-weighted).
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

}  // namespace ddatr
