#pragma once

#include "longtail/losses.hpp"
#include "longtail/model/params.hpp"
#include "longtail/rng.hpp"
#include "longtail/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace longtail {

/// Sinusoidal positional table: row pos, even columns sin(pos / 10000^(2i/d)),
/// odd columns the matching cos.
template <typename S>
Mat<S> sinusoidal_positions(int max_len, int d_model) {
  Mat<S> pe(max_len, d_model);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      double rate = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      double angle = static_cast<double>(pos) / rate;
      pe(pos, i) = static_cast<S>(std::sin(angle));
      if (i + 1 < d_model) pe(pos, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

template <typename S>
struct LayerNormCache {
  Mat<S> xhat;
  Vec<S> inv_std;
};

template <typename S>
Mat<S> layer_norm_forward(const LayerNormParams<S>& ln, const Mat<S>& x,
                          LayerNormCache<S>& cache) {
  Vec<S> mu = x.rowwise().mean();
  Mat<S> centered = x.colwise() - mu;
  Vec<S> var = centered.array().square().matrix().rowwise().mean();
  cache.inv_std = (var.array() + static_cast<S>(kLayerNormEps)).rsqrt().matrix();
  cache.xhat = (centered.array().colwise() * cache.inv_std.array()).matrix();
  Mat<S> y = (cache.xhat.array().rowwise() * ln.gain.col(0).transpose().array()).matrix();
  y.array().rowwise() += ln.bias.col(0).transpose().array();
  return y;
}

template <typename S>
Mat<S> layer_norm_backward(const LayerNormParams<S>& ln, const LayerNormCache<S>& cache,
                           const Mat<S>& dy, LayerNormParams<S>& grads) {
  grads.gain.col(0).array() += (dy.array() * cache.xhat.array()).colwise().sum().transpose();
  grads.bias.col(0).array() += dy.array().colwise().sum().transpose();

  Mat<S> gdy = (dy.array().rowwise() * ln.gain.col(0).transpose().array()).matrix();
  Vec<S> mean_gdy = gdy.rowwise().mean();
  Vec<S> mean_gdy_xhat = (gdy.array() * cache.xhat.array()).matrix().rowwise().mean();
  Mat<S> dx = ((gdy.colwise() - mean_gdy).array() -
               (cache.xhat.array().colwise() * mean_gdy_xhat.array()))
                  .matrix();
  return (dx.array().colwise() * cache.inv_std.array()).matrix();
}

template <typename S>
struct DropoutCache {
  Mat<S> mask;
  bool active = false;
};

// Inverted dropout: kept entries scale by 1/(1-p). A null rng disables it.
template <typename S>
void dropout_forward(Mat<S>& x, double p, std::mt19937_64* rng, DropoutCache<S>& cache) {
  if (rng == nullptr || p <= 0.0) return;
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  cache.mask.resize(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      cache.mask(r, c) = uniform01(*rng) < p ? S(0) : scale;
  cache.active = true;
  x.array() *= cache.mask.array();
}

template <typename S>
void dropout_backward(Mat<S>& dx, const DropoutCache<S>& cache) {
  if (cache.active) dx.array() *= cache.mask.array();
}

// Row-wise softmax; a causal mask limits row i to columns 0..i.
template <typename S>
Mat<S> masked_softmax_rows(const Mat<S>& scores, bool causal) {
  Mat<S> p = Mat<S>::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index width = causal ? std::min<Eigen::Index>(i + 1, scores.cols()) : scores.cols();
    auto row = scores.row(i).head(width);
    Vec<S> e = (row.transpose().array() - row.maxCoeff()).exp().matrix();
    p.row(i).head(width) = (e / e.sum()).transpose();
  }
  return p;
}

template <typename S>
struct AttentionCache {
  Mat<S> xq, xkv;              // sublayer inputs
  Mat<S> q, k, v;              // projected, heads side by side
  std::vector<Mat<S>> attn;    // per head, Tq x Tk
  Mat<S> concat;               // pre output projection
};

template <typename S>
Mat<S> attention_forward(const AttentionParams<S>& p, const Mat<S>& xq, const Mat<S>& xkv,
                         bool causal, int num_heads, AttentionCache<S>& cache) {
  const Eigen::Index d = p.wq.rows();
  const Eigen::Index dh = d / num_heads;
  cache.xq = xq;
  cache.xkv = xkv;
  cache.q.noalias() = xq * p.wq;
  cache.q.rowwise() += p.bq.col(0).transpose();
  cache.k.noalias() = xkv * p.wk;
  cache.k.rowwise() += p.bk.col(0).transpose();
  cache.v.noalias() = xkv * p.wv;
  cache.v.rowwise() += p.bv.col(0).transpose();

  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  cache.attn.resize(num_heads);
  cache.concat.resize(xq.rows(), d);
  for (int h = 0; h < num_heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    Mat<S> scores = qh * kh.transpose() * scale;
    cache.attn[h] = masked_softmax_rows(scores, causal);
    cache.concat.middleCols(h * dh, dh).noalias() = cache.attn[h] * vh;
  }
  Mat<S> y = cache.concat * p.wo;
  y.rowwise() += p.bo.col(0).transpose();
  return y;
}

// Accumulates parameter gradients and the gradients of both attention inputs.
template <typename S>
void attention_backward(const AttentionParams<S>& p, const AttentionCache<S>& cache,
                        const Mat<S>& dy, int num_heads, AttentionParams<S>& grads,
                        Mat<S>& dxq, Mat<S>& dxkv) {
  const Eigen::Index d = p.wq.rows();
  const Eigen::Index dh = d / num_heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  grads.wo.noalias() += cache.concat.transpose() * dy;
  grads.bo.col(0) += dy.colwise().sum().transpose();
  Mat<S> dconcat = dy * p.wo.transpose();

  Mat<S> dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
  for (int h = 0; h < num_heads; ++h) {
    auto qh = cache.q.middleCols(h * dh, dh);
    auto kh = cache.k.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    const Mat<S>& ah = cache.attn[h];
    auto dch = dconcat.middleCols(h * dh, dh);

    Mat<S> da = dch * vh.transpose();
    dv.middleCols(h * dh, dh).noalias() = ah.transpose() * dch;

    // Softmax rows: ds = a (da - <da, a>); masked entries carry a = 0.
    Mat<S> ds(da.rows(), da.cols());
    for (Eigen::Index i = 0; i < da.rows(); ++i) {
      S dot = ah.row(i).dot(da.row(i));
      ds.row(i) = (ah.row(i).array() * (da.row(i).array() - dot)).matrix();
    }
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * kh;
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * qh;
  }

  grads.wq.noalias() += cache.xq.transpose() * dq;
  grads.bq.col(0) += dq.colwise().sum().transpose();
  grads.wk.noalias() += cache.xkv.transpose() * dk;
  grads.bk.col(0) += dk.colwise().sum().transpose();
  grads.wv.noalias() += cache.xkv.transpose() * dv;
  grads.bv.col(0) += dv.colwise().sum().transpose();

  dxq.noalias() += dq * p.wq.transpose();
  dxkv.noalias() += dk * p.wk.transpose();
  dxkv.noalias() += dv * p.wv.transpose();
}

template <typename S>
struct FfnCache {
  Mat<S> x, pre;  // input and pre-activation
};

template <typename S>
Mat<S> ffn_forward(const FfnParams<S>& p, const Mat<S>& x, FfnCache<S>& cache) {
  cache.x = x;
  cache.pre.noalias() = x * p.w1;
  cache.pre.rowwise() += p.b1.col(0).transpose();
  Mat<S> y = cache.pre.cwiseMax(S(0)) * p.w2;
  y.rowwise() += p.b2.col(0).transpose();
  return y;
}

template <typename S>
Mat<S> ffn_backward(const FfnParams<S>& p, const FfnCache<S>& cache, const Mat<S>& dy,
                    FfnParams<S>& grads) {
  Mat<S> relu_out = cache.pre.cwiseMax(S(0));
  grads.w2.noalias() += relu_out.transpose() * dy;
  grads.b2.col(0) += dy.colwise().sum().transpose();
  Mat<S> dh = dy * p.w2.transpose();
  dh.array() *= (cache.pre.array() > S(0)).template cast<S>();
  grads.w1.noalias() += cache.x.transpose() * dh;
  grads.b1.col(0) += dh.colwise().sum().transpose();
  return dh * p.w1.transpose();
}

template <typename S>
struct EncoderLayerTrace {
  LayerNormCache<S> ln1, ln2;
  AttentionCache<S> attn;
  FfnCache<S> ffn;
  DropoutCache<S> drop1, drop2;
};

template <typename S>
struct DecoderLayerTrace {
  LayerNormCache<S> ln1, ln2, ln3;
  AttentionCache<S> self_attn, cross_attn;
  FfnCache<S> ffn;
  DropoutCache<S> drop1, drop2, drop3;
};

template <typename S>
struct ForwardTrace {
  IdSequence src_ids, dec_ids, predict_ids;
  DropoutCache<S> enc_embed_drop, dec_embed_drop;
  std::vector<EncoderLayerTrace<S>> enc_layers;
  std::vector<DecoderLayerTrace<S>> dec_layers;
  LayerNormCache<S> enc_norm, dec_norm;
  Mat<S> enc_out, dec_out;
};

}  // namespace detail

/// Pre-norm transformer encoder-decoder over a single tied embedding.
/// Sentences are processed one at a time; there is no padding anywhere.
template <typename S>
class Transformer {
 public:
  explicit Transformer(ModelParams<S> params)
      : params_(std::move(params)),
        positions_(sinusoidal_positions<S>(params_.config.max_len, params_.config.d_model)) {
    params_.config.validate();
    if (params_.embedding.rows() != params_.config.vocab_size ||
        params_.embedding.cols() != params_.config.d_model)
      throw std::invalid_argument("transformer: embedding shape mismatch");
  }

  const ModelParams<S>& params() const { return params_; }
  ModelParams<S>& params() { return params_; }
  const ModelConfig& config() const { return params_.config; }

  /// Teacher-forced loss and gradients for one sentence pair, accumulated
  /// into grads. Returns the summed loss; token_count grows by the number of
  /// predicted positions. A null rng runs without dropout.
  S accumulate_gradients(const IdSequence& src, const IdSequence& tgt, const LossConfig& loss,
                         ModelParams<S>& grads, std::mt19937_64* dropout_rng,
                         std::int64_t* token_count) {
    if (params_.output_projection)
      throw std::invalid_argument(
          "transformer: the detached output projection is frozen; training it is undefined");
    detail::ForwardTrace<S> trace;
    Mat<S> logits = forward_teacher(src, tgt, dropout_rng, trace);
    SequenceLossResult<S> seq = sequence_loss<S>(loss, logits, trace.predict_ids);
    backward(trace, seq.dlogits, grads);
    if (token_count) *token_count += seq.tokens;
    return seq.loss;
  }

  /// Teacher-forced loss without dropout or gradients (validation).
  S evaluate_loss(const IdSequence& src, const IdSequence& tgt, const LossConfig& loss,
                  std::int64_t* token_count) const {
    detail::ForwardTrace<S> trace;
    Mat<S> logits = forward_teacher(src, tgt, nullptr, trace);
    SequenceLossResult<S> seq = sequence_loss<S>(loss, logits, trace.predict_ids);
    if (token_count) *token_count += seq.tokens;
    return seq.loss;
  }

  /// Teacher-forced logits, one row per predicted position (dropout off).
  Mat<S> teacher_logits(const IdSequence& src, const IdSequence& tgt,
                        IdSequence* predict_ids = nullptr) const {
    detail::ForwardTrace<S> trace;
    Mat<S> logits = forward_teacher(src, tgt, nullptr, trace);
    if (predict_ids) *predict_ids = trace.predict_ids;
    return logits;
  }

  /// Encoder output for a source sentence (eos appended internally).
  Mat<S> encode(const IdSequence& src) const {
    detail::ForwardTrace<S> trace;
    return encode_internal(with_eos(src), nullptr, trace);
  }

  /// Logits for every position of [bos] + prefix against an encoded source.
  Mat<S> decoder_logits(const Mat<S>& enc_out, const IdSequence& prefix) const {
    detail::ForwardTrace<S> trace;
    IdSequence dec_ids = with_bos(prefix);
    Mat<S> dec_out = decode_internal(dec_ids, enc_out, nullptr, trace);
    return dec_out * projection().transpose();
  }

  /// Distribution parameters for the next token after prefix.
  Vec<S> next_logits(const Mat<S>& enc_out, const IdSequence& prefix) const {
    Mat<S> logits = decoder_logits(enc_out, prefix);
    return logits.row(logits.rows() - 1).transpose();
  }

 private:
  // Inference projects with the detached matrix when present; training always
  // uses the tied embedding.
  const Mat<S>& projection() const {
    return params_.output_projection ? *params_.output_projection : params_.embedding;
  }

  IdSequence with_eos(IdSequence ids) const {
    check_ids(ids);
    ids.push_back(Specials::eos);
    check_len(ids.size());
    return ids;
  }

  IdSequence with_bos(const IdSequence& ids) const {
    check_ids(ids);
    IdSequence out;
    out.reserve(ids.size() + 1);
    out.push_back(Specials::bos);
    out.insert(out.end(), ids.begin(), ids.end());
    check_len(out.size());
    return out;
  }

  void check_ids(const IdSequence& ids) const {
    for (TokenId id : ids)
      if (id < 0 || id >= params_.config.vocab_size)
        throw std::out_of_range("transformer: token id " + std::to_string(id) +
                                " outside vocabulary of " +
                                std::to_string(params_.config.vocab_size));
  }

  void check_len(std::size_t len) const {
    if (len > static_cast<std::size_t>(params_.config.max_len))
      throw std::invalid_argument("transformer: sequence length " + std::to_string(len) +
                                  " exceeds positional table " +
                                  std::to_string(params_.config.max_len));
  }

  Mat<S> embed(const IdSequence& ids) const {
    const S scale = static_cast<S>(std::sqrt(static_cast<double>(params_.config.d_model)));
    Mat<S> x(ids.size(), params_.config.d_model);
    for (std::size_t t = 0; t < ids.size(); ++t)
      x.row(t) = params_.embedding.row(ids[t]) * scale + positions_.row(t);
    return x;
  }

  Mat<S> encode_internal(const IdSequence& src_ids, std::mt19937_64* rng,
                         detail::ForwardTrace<S>& trace) const {
    const double p = params_.config.dropout;
    trace.src_ids = src_ids;
    Mat<S> x = embed(src_ids);
    detail::dropout_forward(x, p, rng, trace.enc_embed_drop);

    trace.enc_layers.resize(params_.encoder.size());
    for (std::size_t l = 0; l < params_.encoder.size(); ++l) {
      auto& layer = params_.encoder[l];
      auto& lt = trace.enc_layers[l];
      Mat<S> a = detail::layer_norm_forward(layer.ln1, x, lt.ln1);
      Mat<S> s = detail::attention_forward(layer.self_attn, a, a, false,
                                           params_.config.num_heads, lt.attn);
      detail::dropout_forward(s, p, rng, lt.drop1);
      Mat<S> h = x + s;
      Mat<S> b = detail::layer_norm_forward(layer.ln2, h, lt.ln2);
      Mat<S> f = detail::ffn_forward(layer.ffn, b, lt.ffn);
      detail::dropout_forward(f, p, rng, lt.drop2);
      x = h + f;
    }
    trace.enc_out = detail::layer_norm_forward(params_.encoder_norm, x, trace.enc_norm);
    return trace.enc_out;
  }

  Mat<S> decode_internal(const IdSequence& dec_ids, const Mat<S>& enc_out,
                         std::mt19937_64* rng, detail::ForwardTrace<S>& trace) const {
    if (enc_out.cols() != params_.config.d_model)
      throw std::invalid_argument("transformer: encoder output width mismatch");
    const double p = params_.config.dropout;
    trace.dec_ids = dec_ids;
    Mat<S> x = embed(dec_ids);
    detail::dropout_forward(x, p, rng, trace.dec_embed_drop);

    trace.dec_layers.resize(params_.decoder.size());
    for (std::size_t l = 0; l < params_.decoder.size(); ++l) {
      auto& layer = params_.decoder[l];
      auto& lt = trace.dec_layers[l];
      Mat<S> a = detail::layer_norm_forward(layer.ln1, x, lt.ln1);
      Mat<S> s = detail::attention_forward(layer.self_attn, a, a, true,
                                           params_.config.num_heads, lt.self_attn);
      detail::dropout_forward(s, p, rng, lt.drop1);
      Mat<S> h = x + s;
      Mat<S> b = detail::layer_norm_forward(layer.ln2, h, lt.ln2);
      Mat<S> c = detail::attention_forward(layer.cross_attn, b, enc_out, false,
                                           params_.config.num_heads, lt.cross_attn);
      detail::dropout_forward(c, p, rng, lt.drop2);
      Mat<S> g = h + c;
      Mat<S> e = detail::layer_norm_forward(layer.ln3, g, lt.ln3);
      Mat<S> f = detail::ffn_forward(layer.ffn, e, lt.ffn);
      detail::dropout_forward(f, p, rng, lt.drop3);
      x = g + f;
    }
    trace.dec_out = detail::layer_norm_forward(params_.decoder_norm, x, trace.dec_norm);
    return trace.dec_out;
  }

  Mat<S> forward_teacher(const IdSequence& src, const IdSequence& tgt, std::mt19937_64* rng,
                         detail::ForwardTrace<S>& trace) const {
    IdSequence src_ids = with_eos(src);
    IdSequence dec_ids = with_bos(tgt);
    trace.predict_ids = with_eos(tgt);

    Mat<S> enc_out = encode_internal(src_ids, rng, trace);
    Mat<S> dec_out = decode_internal(dec_ids, enc_out, rng, trace);
    return dec_out * params_.embedding.transpose();
  }

  void backward(const detail::ForwardTrace<S>& trace, const Mat<S>& dlogits,
                ModelParams<S>& grads) {
    const int heads = params_.config.num_heads;
    const S scale = static_cast<S>(std::sqrt(static_cast<double>(params_.config.d_model)));

    // logits = dec_out E^T: both factors are live.
    Mat<S> dx = dlogits * params_.embedding;
    grads.embedding.noalias() += dlogits.transpose() * trace.dec_out;

    dx = detail::layer_norm_backward(params_.decoder_norm, trace.dec_norm, dx,
                                     grads.decoder_norm);
    Mat<S> denc_out = Mat<S>::Zero(trace.enc_out.rows(), trace.enc_out.cols());
    for (std::size_t l = params_.decoder.size(); l-- > 0;) {
      auto& layer = params_.decoder[l];
      auto& lt = trace.dec_layers[l];
      auto& lg = grads.decoder[l];

      Mat<S> df = dx;
      detail::dropout_backward(df, lt.drop3);
      Mat<S> de = detail::ffn_backward(layer.ffn, lt.ffn, df, lg.ffn);
      Mat<S> dg = dx + detail::layer_norm_backward(layer.ln3, lt.ln3, de, lg.ln3);

      Mat<S> dc = dg;
      detail::dropout_backward(dc, lt.drop2);
      Mat<S> db = Mat<S>::Zero(dc.rows(), dc.cols());
      detail::attention_backward(layer.cross_attn, lt.cross_attn, dc, heads, lg.cross_attn, db,
                                 denc_out);
      Mat<S> dh = dg + detail::layer_norm_backward(layer.ln2, lt.ln2, db, lg.ln2);

      Mat<S> ds = dh;
      detail::dropout_backward(ds, lt.drop1);
      Mat<S> da = Mat<S>::Zero(ds.rows(), ds.cols());
      detail::attention_backward(layer.self_attn, lt.self_attn, ds, heads, lg.self_attn, da,
                                 da);
      dx = dh + detail::layer_norm_backward(layer.ln1, lt.ln1, da, lg.ln1);
    }
    detail::dropout_backward(dx, trace.dec_embed_drop);
    for (std::size_t t = 0; t < trace.dec_ids.size(); ++t)
      grads.embedding.row(trace.dec_ids[t]) += dx.row(t) * scale;

    Mat<S> dy = detail::layer_norm_backward(params_.encoder_norm, trace.enc_norm, denc_out,
                                            grads.encoder_norm);
    for (std::size_t l = params_.encoder.size(); l-- > 0;) {
      auto& layer = params_.encoder[l];
      auto& lt = trace.enc_layers[l];
      auto& lg = grads.encoder[l];

      Mat<S> df = dy;
      detail::dropout_backward(df, lt.drop2);
      Mat<S> db = detail::ffn_backward(layer.ffn, lt.ffn, df, lg.ffn);
      Mat<S> dh = dy + detail::layer_norm_backward(layer.ln2, lt.ln2, db, lg.ln2);

      Mat<S> ds = dh;
      detail::dropout_backward(ds, lt.drop1);
      Mat<S> da = Mat<S>::Zero(ds.rows(), ds.cols());
      detail::attention_backward(layer.self_attn, lt.attn, ds, heads, lg.self_attn, da, da);
      dy = dh + detail::layer_norm_backward(layer.ln1, lt.ln1, da, lg.ln1);
    }
    detail::dropout_backward(dy, trace.enc_embed_drop);
    for (std::size_t t = 0; t < trace.src_ids.size(); ++t)
      grads.embedding.row(trace.src_ids[t]) += dy.row(t) * scale;
  }

  ModelParams<S> params_;
  Mat<S> positions_;
};

}  // namespace longtail
