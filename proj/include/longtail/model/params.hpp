#pragma once

#include "longtail/model/config.hpp"
#include "longtail/rng.hpp"
#include "longtail/types.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace longtail {

// Every tensor is a Mat so the parameter tree enumerates uniformly; biases
// and layer-norm vectors are d x 1.

template <typename S>
struct LayerNormParams {
  Mat<S> gain, bias;
};

template <typename S>
struct AttentionParams {
  Mat<S> wq, wk, wv, wo;  // d_model x d_model
  Mat<S> bq, bk, bv, bo;  // d_model x 1
};

template <typename S>
struct FfnParams {
  Mat<S> w1;  // d_model x d_ffn
  Mat<S> b1;  // d_ffn x 1
  Mat<S> w2;  // d_ffn x d_model
  Mat<S> b2;  // d_model x 1
};

template <typename S>
struct EncoderLayerParams {
  LayerNormParams<S> ln1, ln2;
  AttentionParams<S> self_attn;
  FfnParams<S> ffn;
};

template <typename S>
struct DecoderLayerParams {
  LayerNormParams<S> ln1, ln2, ln3;
  AttentionParams<S> self_attn, cross_attn;
  FfnParams<S> ffn;
};

/// All trainable tensors. The embedding is tied: it is the source lookup,
/// the target lookup, and (transposed) the output projection. A tau
/// normalized model additionally carries a detached output projection that
/// replaces the tied one at inference time; it is never trained.
template <typename S>
struct ModelParams {
  ModelConfig config;
  Mat<S> embedding;  // vocab_size x d_model
  std::vector<EncoderLayerParams<S>> encoder;
  std::vector<DecoderLayerParams<S>> decoder;
  LayerNormParams<S> encoder_norm, decoder_norm;
  std::optional<Mat<S>> output_projection;  // vocab_size x d_model
};

template <typename S>
using NamedTensor = std::pair<std::string, Mat<S>*>;

/// The parameter tree as a flat, deterministically ordered list of named
/// tensors. Optimizer slots, checkpoints, and casts all walk this order.
/// The detached output projection is excluded: it is not a trainable tensor.
template <typename S>
std::vector<NamedTensor<S>> tensor_list(ModelParams<S>& params) {
  std::vector<NamedTensor<S>> out;
  auto add = [&out](std::string name, Mat<S>& m) { out.emplace_back(std::move(name), &m); };
  auto add_ln = [&](const std::string& prefix, LayerNormParams<S>& ln) {
    add(prefix + ".gain", ln.gain);
    add(prefix + ".bias", ln.bias);
  };
  auto add_attn = [&](const std::string& prefix, AttentionParams<S>& a) {
    add(prefix + ".wq", a.wq);
    add(prefix + ".bq", a.bq);
    add(prefix + ".wk", a.wk);
    add(prefix + ".bk", a.bk);
    add(prefix + ".wv", a.wv);
    add(prefix + ".bv", a.bv);
    add(prefix + ".wo", a.wo);
    add(prefix + ".bo", a.bo);
  };
  auto add_ffn = [&](const std::string& prefix, FfnParams<S>& f) {
    add(prefix + ".w1", f.w1);
    add(prefix + ".b1", f.b1);
    add(prefix + ".w2", f.w2);
    add(prefix + ".b2", f.b2);
  };

  add("embedding", params.embedding);
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    std::string p = "encoder." + std::to_string(l);
    add_ln(p + ".ln1", params.encoder[l].ln1);
    add_attn(p + ".self_attn", params.encoder[l].self_attn);
    add_ln(p + ".ln2", params.encoder[l].ln2);
    add_ffn(p + ".ffn", params.encoder[l].ffn);
  }
  add_ln("encoder.norm", params.encoder_norm);
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    std::string p = "decoder." + std::to_string(l);
    add_ln(p + ".ln1", params.decoder[l].ln1);
    add_attn(p + ".self_attn", params.decoder[l].self_attn);
    add_ln(p + ".ln2", params.decoder[l].ln2);
    add_attn(p + ".cross_attn", params.decoder[l].cross_attn);
    add_ln(p + ".ln3", params.decoder[l].ln3);
    add_ffn(p + ".ffn", params.decoder[l].ffn);
  }
  add_ln("decoder.norm", params.decoder_norm);
  return out;
}

template <typename S>
std::vector<std::pair<std::string, const Mat<S>*>> tensor_list(const ModelParams<S>& params) {
  std::vector<std::pair<std::string, const Mat<S>*>> out;
  for (auto& [name, mat] : tensor_list(const_cast<ModelParams<S>&>(params)))
    out.emplace_back(name, mat);
  return out;
}

template <typename S>
std::size_t parameter_count(const ModelParams<S>& params) {
  std::size_t n = 0;
  for (const auto& [name, mat] : tensor_list(params)) n += static_cast<std::size_t>(mat->size());
  return n;
}

/// Zero-valued gradient holder with the same tree shape.
template <typename S>
ModelParams<S> zeros_like(const ModelParams<S>& params) {
  ModelParams<S> out;
  out.config = params.config;
  out.embedding.setZero(params.embedding.rows(), params.embedding.cols());
  auto zero_ln = [](const LayerNormParams<S>& src, LayerNormParams<S>& dst) {
    dst.gain.setZero(src.gain.rows(), 1);
    dst.bias.setZero(src.bias.rows(), 1);
  };
  auto zero_attn = [](const AttentionParams<S>& src, AttentionParams<S>& dst) {
    for (auto [s, d] : {std::pair{&src.wq, &dst.wq}, {&src.wk, &dst.wk}, {&src.wv, &dst.wv},
                        {&src.wo, &dst.wo}, {&src.bq, &dst.bq}, {&src.bk, &dst.bk},
                        {&src.bv, &dst.bv}, {&src.bo, &dst.bo}})
      d->setZero(s->rows(), s->cols());
  };
  auto zero_ffn = [](const FfnParams<S>& src, FfnParams<S>& dst) {
    dst.w1.setZero(src.w1.rows(), src.w1.cols());
    dst.b1.setZero(src.b1.rows(), 1);
    dst.w2.setZero(src.w2.rows(), src.w2.cols());
    dst.b2.setZero(src.b2.rows(), 1);
  };
  out.encoder.resize(params.encoder.size());
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    zero_ln(params.encoder[l].ln1, out.encoder[l].ln1);
    zero_attn(params.encoder[l].self_attn, out.encoder[l].self_attn);
    zero_ln(params.encoder[l].ln2, out.encoder[l].ln2);
    zero_ffn(params.encoder[l].ffn, out.encoder[l].ffn);
  }
  zero_ln(params.encoder_norm, out.encoder_norm);
  out.decoder.resize(params.decoder.size());
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    zero_ln(params.decoder[l].ln1, out.decoder[l].ln1);
    zero_attn(params.decoder[l].self_attn, out.decoder[l].self_attn);
    zero_ln(params.decoder[l].ln2, out.decoder[l].ln2);
    zero_attn(params.decoder[l].cross_attn, out.decoder[l].cross_attn);
    zero_ln(params.decoder[l].ln3, out.decoder[l].ln3);
    zero_ffn(params.decoder[l].ffn, out.decoder[l].ffn);
  }
  zero_ln(params.decoder_norm, out.decoder_norm);
  return out;
}

/// Precision change, e.g. a float model re-run in double for gradient checks.
template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out;
  out.config = params.config;
  out.embedding = params.embedding.template cast<To>();
  auto cast_ln = [](const LayerNormParams<From>& s) {
    return LayerNormParams<To>{s.gain.template cast<To>(), s.bias.template cast<To>()};
  };
  auto cast_attn = [](const AttentionParams<From>& s) {
    return AttentionParams<To>{s.wq.template cast<To>(), s.wk.template cast<To>(),
                               s.wv.template cast<To>(), s.wo.template cast<To>(),
                               s.bq.template cast<To>(), s.bk.template cast<To>(),
                               s.bv.template cast<To>(), s.bo.template cast<To>()};
  };
  auto cast_ffn = [](const FfnParams<From>& s) {
    return FfnParams<To>{s.w1.template cast<To>(), s.b1.template cast<To>(),
                         s.w2.template cast<To>(), s.b2.template cast<To>()};
  };
  for (const auto& layer : params.encoder)
    out.encoder.push_back({cast_ln(layer.ln1), cast_ln(layer.ln2), cast_attn(layer.self_attn),
                           cast_ffn(layer.ffn)});
  for (const auto& layer : params.decoder)
    out.decoder.push_back({cast_ln(layer.ln1), cast_ln(layer.ln2), cast_ln(layer.ln3),
                           cast_attn(layer.self_attn), cast_attn(layer.cross_attn),
                           cast_ffn(layer.ffn)});
  out.encoder_norm = cast_ln(params.encoder_norm);
  out.decoder_norm = cast_ln(params.decoder_norm);
  if (params.output_projection)
    out.output_projection = params.output_projection->template cast<To>();
  return out;
}

/// Fresh parameters: embeddings N(0, 1/sqrt(d_model)), linear maps Xavier
/// uniform, layer norms identity. Reproducible per seed.
template <typename S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);

  ModelParams<S> params;
  params.config = config;
  const int d = config.d_model;

  auto normal_fill = [&rng](Mat<S>& m, Eigen::Index rows, Eigen::Index cols, double std) {
    m.resize(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        m(r, c) = static_cast<S>(normal01(rng) * std);
  };
  auto xavier_fill = [&rng](Mat<S>& m, Eigen::Index rows, Eigen::Index cols) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    m.resize(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r)
        m(r, c) = static_cast<S>(uniform_range(rng, -limit, limit));
  };
  auto init_ln = [d](LayerNormParams<S>& ln) {
    ln.gain = Mat<S>::Ones(d, 1);
    ln.bias = Mat<S>::Zero(d, 1);
  };
  auto init_attn = [&](AttentionParams<S>& a) {
    xavier_fill(a.wq, d, d);
    xavier_fill(a.wk, d, d);
    xavier_fill(a.wv, d, d);
    xavier_fill(a.wo, d, d);
    a.bq = Mat<S>::Zero(d, 1);
    a.bk = Mat<S>::Zero(d, 1);
    a.bv = Mat<S>::Zero(d, 1);
    a.bo = Mat<S>::Zero(d, 1);
  };
  auto init_ffn = [&](FfnParams<S>& f) {
    xavier_fill(f.w1, d, config.d_ffn);
    f.b1 = Mat<S>::Zero(config.d_ffn, 1);
    xavier_fill(f.w2, config.d_ffn, d);
    f.b2 = Mat<S>::Zero(d, 1);
  };

  normal_fill(params.embedding, config.vocab_size, d, 1.0 / std::sqrt(static_cast<double>(d)));
  params.encoder.resize(config.num_layers);
  for (auto& layer : params.encoder) {
    init_ln(layer.ln1);
    init_attn(layer.self_attn);
    init_ln(layer.ln2);
    init_ffn(layer.ffn);
  }
  init_ln(params.encoder_norm);
  params.decoder.resize(config.num_layers);
  for (auto& layer : params.decoder) {
    init_ln(layer.ln1);
    init_attn(layer.self_attn);
    init_ln(layer.ln2);
    init_attn(layer.cross_attn);
    init_ln(layer.ln3);
    init_ffn(layer.ffn);
  }
  init_ln(params.decoder_norm);
  return params;
}

/// L2 norm of each embedding row; the quantity tau normalization rescales.
template <typename S>
Vec<S> embedding_norms(const Mat<S>& embedding) {
  return embedding.rowwise().norm();
}

}  // namespace longtail
