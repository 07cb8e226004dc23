#pragma once

// The 14-finding label space shared by the classifier heads, the report
// labeler, the metrics and the prompt construction.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ddatr {

inline constexpr std::size_t kNumFindings = 14;
inline constexpr std::size_t kNumAttributes = 4;

enum class Attribute : std::uint8_t { kBlank = 0, kPositive = 1, kNegative = 2, kUncertain = 3 };

using LabelVector = std::array<Attribute, kNumFindings>;

inline LabelVector all_blank_labels() {
  LabelVector v;
  v.fill(Attribute::kBlank);
  return v;
}

// Prompt tokens, one per finding, in the fixed finding order.
// [BLA]/[POS]/[NEG]/[UNC] <-> blank/positive/negative/uncertain.
using PromptSequence = std::array<std::uint8_t, kNumFindings>;

const std::string& attribute_name(Attribute a);
const std::string& prompt_token_text(Attribute a);

Attribute attribute_from_name(const std::string& name);

PromptSequence labels_to_prompt(const LabelVector& labels);
LabelVector prompt_to_labels(const PromptSequence& prompt);

// Binary mapping used by the clinical-efficacy metrics: positive and
// uncertain count as positive, negative and blank as negative.
std::array<bool, kNumFindings> map_attributes(const LabelVector& labels);

}  // namespace ddatr
