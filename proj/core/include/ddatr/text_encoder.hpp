#pragma once

// Frozen text encoder: seeded random token embeddings plus sinusoidal
// positional codes. Parameters are fixed at construction, never registered
// as trainable, and never receive gradient.

#include <cmath>
#include <vector>

#include "ddatr/ops.hpp"
#include "ddatr/rng.hpp"
#include "ddatr/tensor.hpp"
#include "ddatr/vocab.hpp"

namespace ddatr {

template <typename T>
class TextEncoder {
 public:
  TextEncoder(std::size_t vocab_size, std::size_t embed_dim, std::uint64_t seed)
      : embed_dim_(embed_dim) {
    Rng rng(derive_seed(seed, "text_encoder.embedding"));
    std::vector<T> data(embed_dim * vocab_size);
    for (auto& v : data) v = static_cast<T>(rng.normal(0.0, 1.0));
    table_ = Tensor<T>::from_data({embed_dim, vocab_size}, std::move(data),
                                  /*requires_grad=*/false);
  }

  // F_txt: (C_txt, L). Column j = embedding(token_j) + position code(j).
  Tensor<T> encode(const std::vector<std::size_t>& tokens) const {
    if (tokens.empty()) throw EmptyTextError();
    Tensor<T> emb = gather_cols(table_, tokens);
    Tensor<T> pos = positional_codes(tokens.size());
    return add(emb, pos);
  }

  // Sinusoidal codes in the usual interleaved layout, (C_txt, L).
  Tensor<T> positional_codes(std::size_t len) const {
    std::vector<T> data(embed_dim_ * len);
    for (std::size_t d = 0; d < embed_dim_; ++d) {
      const double rate = std::pow(10000.0, -double(d / 2 * 2) / double(embed_dim_));
      for (std::size_t j = 0; j < len; ++j) {
        const double angle = double(j) * rate;
        data[d * len + j] = static_cast<T>(d % 2 == 0 ? std::sin(angle) : std::cos(angle));
      }
    }
    return Tensor<T>::from_data({embed_dim_, len}, std::move(data));
  }

  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t vocab_size() const { return table_.extent(1); }
  const Tensor<T>& embedding_table() const { return table_; }

 private:
  std::size_t embed_dim_;
  Tensor<T> table_;
};

}  // namespace ddatr
