#pragma once

#include <stdexcept>
#include <string>

namespace longtail {

/// Dimensions of the encoder-decoder. Encoder and decoder share the layer
/// count; source and target share one tied vocabulary.
struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int num_heads = 2;
  int d_ffn = 128;
  int num_layers = 2;
  int max_len = 256;      // positional table length
  double dropout = 0.1;

  int head_dim() const { return d_model / num_heads; }

  void validate() const {
    if (vocab_size < 5) throw std::invalid_argument("model: vocab_size must cover the specials");
    if (d_model < 1 || num_heads < 1 || d_ffn < 1 || num_layers < 1 || max_len < 2)
      throw std::invalid_argument("model: dimensions must be positive");
    if (d_model % num_heads != 0)
      throw std::invalid_argument("model: d_model " + std::to_string(d_model) +
                                  " not divisible by num_heads " + std::to_string(num_heads));
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("model: dropout must be in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace longtail
