#pragma once

#include "longtail/model/params.hpp"
#include "longtail/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace longtail {

/// Rescales each row to w / ||w||^tau. tau = 0 is the identity, tau = 1
/// leaves every row unit length; in between, frequent tokens' long embedding
/// rows shrink toward the rare tokens' short ones. Zero rows cannot be
/// rescaled; they pass through unchanged and are reported.
template <typename S>
Mat<S> tau_normalize(const Mat<S>& weights, double tau,
                     std::vector<TokenId>* zero_rows = nullptr) {
  if (tau < 0.0) throw std::invalid_argument("tau_normalize: tau must be >= 0");
  Mat<S> out(weights.rows(), weights.cols());
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    double norm = weights.row(r).template cast<double>().norm();
    if (norm == 0.0) {
      if (zero_rows) zero_rows->push_back(static_cast<TokenId>(r));
      out.row(r) = weights.row(r);
      continue;
    }
    out.row(r) = weights.row(r) / static_cast<S>(std::pow(norm, tau));
  }
  return out;
}

/// Installs the detached output projection: a tau-normalized copy of the
/// tied embedding that inference uses in its place. The embedding itself,
/// and therefore both input lookups, keeps its full-length rows. Returns the
/// ids whose zero-length rows were left alone.
template <typename S>
std::vector<TokenId> apply_tau_norm(ModelParams<S>& params, double tau) {
  std::vector<TokenId> zero_rows;
  params.output_projection = tau_normalize(params.embedding, tau, &zero_rows);
  return zero_rows;
}

}  // namespace longtail
