#include "ddatr/labels.hpp"

#include <stdexcept>

namespace ddatr {

namespace {
const std::string kAttrNames[kNumAttributes] = {"blank", "positive", "negative", "uncertain"};
const std::string kPromptTokens[kNumAttributes] = {"[BLA]", "[POS]", "[NEG]", "[UNC]"};
}  // namespace

const std::string& attribute_name(Attribute a) { return kAttrNames[static_cast<std::size_t>(a)]; }

const std::string& prompt_token_text(Attribute a) {
  return kPromptTokens[static_cast<std::size_t>(a)];
}

Attribute attribute_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNumAttributes; ++i) {
    if (kAttrNames[i] == name) return static_cast<Attribute>(i);
  }
  throw std::invalid_argument("unknown attribute: " + name);
}

PromptSequence labels_to_prompt(const LabelVector& labels) {
  PromptSequence p{};
  for (std::size_t i = 0; i < kNumFindings; ++i) p[i] = static_cast<std::uint8_t>(labels[i]);
  return p;
}

LabelVector prompt_to_labels(const PromptSequence& prompt) {
  LabelVector v{};
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    if (prompt[i] >= kNumAttributes) throw std::invalid_argument("invalid prompt token id");
    v[i] = static_cast<Attribute>(prompt[i]);
  }
  return v;
}

std::array<bool, kNumFindings> map_attributes(const LabelVector& labels) {
  std::array<bool, kNumFindings> out{};
  for (std::size_t i = 0; i < kNumFindings; ++i) {
    out[i] = labels[i] == Attribute::kPositive || labels[i] == Attribute::kUncertain;
  }
  return out;
}

}  // namespace ddatr
