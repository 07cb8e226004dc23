#include "ddatr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ddatr {

namespace {

struct Prf {
  double p = 0, r = 0, f1 = 0;
};

Prf from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf out;
  out.p = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
  out.r = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
  out.f1 = out.p + out.r == 0.0 ? 0.0 : 2.0 * out.p * out.r / (out.p + out.r);
  return out;
}

}  // namespace

CeScores ce_scores(const BinaryLabelMatrix& pred, const BinaryLabelMatrix& gold) {
  if (pred.rows != gold.rows || pred.cells.size() != gold.cells.size()) {
    throw std::invalid_argument("ce_scores: dimension mismatch");
  }
  if (pred.rows == 0) throw std::invalid_argument("ce_scores: empty matrices");

  std::size_t tp = 0, fp = 0, fn = 0;
  double psum = 0, rsum = 0, fsum = 0;
  for (std::size_t d = 0; d < kNumFindings; ++d) {
    std::size_t dtp = 0, dfp = 0, dfn = 0;
    for (std::size_t r = 0; r < pred.rows; ++r) {
      const bool p = pred.at(r, d), g = gold.at(r, d);
      dtp += p && g;
      dfp += p && !g;
      dfn += !p && g;
    }
    const Prf prf = from_counts(dtp, dfp, dfn);
    psum += prf.p;
    rsum += prf.r;
    fsum += prf.f1;
    tp += dtp;
    fp += dfp;
    fn += dfn;
  }
  CeScores s;
  s.precision_macro = psum / kNumFindings;
  s.recall_macro = rsum / kNumFindings;
  s.f1_macro = fsum / kNumFindings;
  const Prf micro = from_counts(tp, fp, fn);
  s.precision_micro = micro.p;
  s.recall_micro = micro.r;
  s.f1_micro = micro.f1;
  return s;
}

MicroCounts micro_counts(const BinaryLabelMatrix& pred, const BinaryLabelMatrix& gold,
                         const std::vector<bool>* cell_mask) {
  if (pred.cells.size() != gold.cells.size()) {
    throw std::invalid_argument("micro_counts: dimension mismatch");
  }
  if (cell_mask && cell_mask->size() != pred.cells.size()) {
    throw std::invalid_argument("micro_counts: mask size mismatch");
  }
  MicroCounts c;
  for (std::size_t i = 0; i < pred.cells.size(); ++i) {
    if (cell_mask && !(*cell_mask)[i]) continue;
    const bool p = pred.cells[i], g = gold.cells[i];
    c.tp += p && g;
    c.fp += p && !g;
    c.fn += !p && g;
  }
  return c;
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)]++;
  }
  return counts;
}

}  // namespace

void BleuAccumulator::add(const std::vector<std::string>& candidate,
                          const std::vector<std::vector<std::string>>& references) {
  candidate_len_ += candidate.size();
  // closest reference length, ties broken toward the shorter one
  std::size_t best = 0;
  bool first = true;
  for (const auto& ref : references) {
    if (first || std::llabs(long(ref.size()) - long(candidate.size())) <
                     std::llabs(long(best) - long(candidate.size())) ||
        (std::llabs(long(ref.size()) - long(candidate.size())) ==
             std::llabs(long(best) - long(candidate.size())) &&
         ref.size() < best)) {
      best = ref.size();
      first = false;
    }
  }
  reference_len_ += best;

  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    auto cand = ngram_counts(candidate, n);
    std::map<Ngram, std::size_t> max_ref;
    for (const auto& ref : references) {
      for (const auto& [ng, cnt] : ngram_counts(ref, n)) {
        max_ref[ng] = std::max(max_ref[ng], cnt);
      }
    }
    for (const auto& [ng, cnt] : cand) {
      total_[n - 1] += cnt;
      auto it = max_ref.find(ng);
      if (it != max_ref.end()) clipped_[n - 1] += std::min(cnt, it->second);
    }
  }
}

double BleuAccumulator::score(std::size_t max_order) const {
  if (max_order == 0 || max_order > kMaxOrder) {
    throw std::invalid_argument("bleu: order must be in 1..4");
  }
  if (candidate_len_ == 0) return 0.0;
  double log_precision = 0.0;
  for (std::size_t n = 1; n <= max_order; ++n) {
    if (total_[n - 1] == 0 || clipped_[n - 1] == 0) return 0.0;
    log_precision += std::log(double(clipped_[n - 1]) / double(total_[n - 1])) / double(max_order);
  }
  double bp = 1.0;
  if (candidate_len_ < reference_len_) {
    bp = std::exp(1.0 - double(reference_len_) / double(candidate_len_));
  }
  return bp * std::exp(log_precision);
}

double bleu(const std::vector<std::string>& candidate,
            const std::vector<std::vector<std::string>>& references, std::size_t max_order) {
  BleuAccumulator acc;
  acc.add(candidate, references);
  return acc.score(max_order);
}

double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t m = candidate.size(), n = reference.size();
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = double(prev[n]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / double(m);
  const double r = lcs / double(n);
  constexpr double beta = 1.2;
  const double denom = r + beta * beta * p;
  return denom == 0.0 ? 0.0 : (1.0 + beta * beta) * r * p / denom;
}

}  // namespace ddatr
