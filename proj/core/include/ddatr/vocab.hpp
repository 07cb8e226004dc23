#pragma once

// Word-level vocabulary with reserved control and prompt tokens at the
// lowest ids. Lookup is total: unknown words map to [UNK].

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ddatr {

class EmptyTextError : public std::runtime_error {
 public:
  EmptyTextError() : std::runtime_error("text is empty after normalization") {}
};

class Vocabulary {
 public:
  // Reserved ids. Prompt tokens sit directly after the control tokens so
  // that prompt id = kBla + attribute.
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kBla = 4;
  static constexpr std::size_t kPos = 5;
  static constexpr std::size_t kNeg = 6;
  static constexpr std::size_t kUnc = 7;
  static constexpr std::size_t kNumReserved = 8;

  // Builds the reserved prefix; words are appended via add().
  Vocabulary();

  // id of `word`, inserting it when absent.
  std::size_t add(const std::string& word);

  // Total lookup with [UNK] fallback.
  std::size_t id(const std::string& word) const;
  bool contains(const std::string& word) const;
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }

  // One token per line, id = line index.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Lowercases, splits punctuation into standalone tokens, splits on
// whitespace. Throws EmptyTextError when nothing remains.
std::vector<std::string> split_words(const std::string& text);

// split_words + vocabulary lookup + truncation to max_len tokens.
std::vector<std::size_t> tokenize(const Vocabulary& vocab, const std::string& text,
                                  std::size_t max_len);

}  // namespace ddatr
