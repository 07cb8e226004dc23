#include "ddatr/vocab.hpp"

#include <cctype>
#include <fstream>

namespace ddatr {

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[BOS]", "[EOS]", "[UNK]", "[BLA]", "[POS]", "[NEG]", "[UNC]"}) {
    add(t);
  }
}

std::size_t Vocabulary::add(const std::string& word) {
  auto it = index_.find(word);
  if (it != index_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(word);
  index_[word] = id;
  return id;
}

std::size_t Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& word) const { return index_.count(word) != 0; }

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw std::out_of_range("token id out of range");
  return tokens_[id];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& t : tokens_) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  Vocabulary v;
  std::string line;
  std::size_t index = 0;
  while (std::getline(is, line)) {
    if (index >= Vocabulary::kNumReserved) {
      v.add(line);
    } else if (line != v.token(index)) {
      throw std::runtime_error("vocabulary file does not start with the reserved tokens");
    }
    ++index;
  }
  return v;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '[' || c == ']') {
      // keep bracket tokens like [POS] intact
      cur.push_back(raw);
    } else {
      flush();
      words.push_back(std::string(1, raw));
    }
  }
  flush();
  if (words.empty()) throw EmptyTextError();
  return words;
}

std::vector<std::size_t> tokenize(const Vocabulary& vocab, const std::string& text,
                                  std::size_t max_len) {
  std::vector<std::string> words = split_words(text);
  if (words.size() > max_len) words.resize(max_len);
  std::vector<std::size_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(vocab.id(w));
  return ids;
}

}  // namespace ddatr
