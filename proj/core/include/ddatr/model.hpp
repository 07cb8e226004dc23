#pragma once

// Full model bundle: frozen text encoder, longitudinal visual encoder and
// report decoder over one shared trainable parameter store.

#include <memory>

#include "ddatr/config.hpp"
#include "ddatr/decoder.hpp"
#include "ddatr/encoder.hpp"
#include "ddatr/text_encoder.hpp"
#include "ddatr/vocab.hpp"

namespace ddatr {

template <typename T>
struct Model {
  RunConfig cfg;
  Vocabulary vocab;
  ParameterStore<T> params;
  TextEncoder<T> text;
  LongitudinalEncoder<T> encoder;
  ReportDecoder<T> decoder;

  Model(const RunConfig& config, const Vocabulary& vocabulary)
      : cfg(config),
        vocab(vocabulary),
        params(config.seed),
        text(vocab.size(), config.text_embed_dim, config.seed),
        encoder(params, config.backbone, config.text_embed_dim, config.fusion(),
                config.share_branches),
        decoder(params, config.decoder, vocab.size(), config.backbone.channels.back()) {}
};

}  // namespace ddatr
