#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "longtail/losses.hpp"

#include <cmath>
#include <random>

using namespace longtail;

namespace {

// Independent long-double softmax.
Vec<double> softmax_oracle(const Vec<double>& z) {
  long double m = z(0);
  for (Eigen::Index i = 1; i < z.size(); ++i) m = std::max<long double>(m, z(i));
  long double sum = 0;
  std::vector<long double> e(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(z(i)) - m);
    sum += e[i];
  }
  Vec<double> p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = static_cast<double>(e[i] / sum);
  return p;
}

Vec<double> random_logits(int v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Vec<double> z(v);
  for (int i = 0; i < v; ++i) z(i) = u(rng);
  return z;
}

// Central finite differences of the loss value, in double.
Vec<double> fd_gradient(const LossConfig& cfg, const Vec<double>& logits, TokenId target) {
  const double h = 1e-6;
  Vec<double> grad(logits.size());
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    Vec<double> zp = logits, zm = logits;
    zp(j) += h;
    zm(j) -= h;
    grad(j) = (token_loss<double>(cfg, zp, target).loss -
               token_loss<double>(cfg, zm, target).loss) /
              (2.0 * h);
  }
  return grad;
}

double relative_inf_error(const Vec<double>& analytic, const Vec<double>& reference) {
  return (analytic - reference).template lpNorm<Eigen::Infinity>() /
         reference.template lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("softmax matches a long double oracle and is shift invariant") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Vec<double> z = random_logits(16, rng);
    Vec<double> p = softmax(z);
    Vec<double> oracle = softmax_oracle(z);
    CHECK(std::abs(p.sum() - 1.0) < 1e-14);
    CHECK((p - oracle).lpNorm<Eigen::Infinity>() < 1e-15);

    Vec<double> shifted = softmax(Vec<double>(z.array() + 1234.5));
    CHECK((shifted - p).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  // Extreme logits must not overflow.
  Vec<double> extreme(3);
  extreme << 1e4, 0.0, -1e4;
  Vec<double> p = softmax(extreme);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(std::isfinite(p.sum()));

  CHECK_THROWS_AS(softmax(Vec<double>()), std::invalid_argument);
}

TEST_CASE("entropy in nats") {
  Vec<double> uniform = Vec<double>::Constant(8, 1.0 / 8.0);
  CHECK(entropy(uniform) == doctest::Approx(std::log(8.0)).epsilon(1e-12));

  Vec<double> delta = Vec<double>::Zero(5);
  delta(2) = 1.0;
  CHECK(entropy(delta) == doctest::Approx(0.0));

  Vec<double> two(2);
  two << 0.3, 0.7;
  CHECK(entropy(two) == doctest::Approx(-0.3 * std::log(0.3) - 0.7 * std::log(0.7)));
}

TEST_CASE("point losses match their closed forms") {
  LossConfig ce{LossKind::kCrossEntropy};
  CHECK(point_loss(ce, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(point_loss(ce, 1.0) == 0.0);

  LossConfig focal{LossKind::kFocal, 2.0};
  CHECK(point_loss(focal, 0.9) ==
        doctest::Approx(-std::pow(0.1, 2.0) * std::log(0.9)).epsilon(1e-12));

  LossConfig gfl{LossKind::kGeneralizedFocal, 1.0, 1.0};
  CHECK(point_loss(gfl, 0.6) == doctest::Approx(-1.6 * std::log(0.6)).epsilon(1e-12));

  // The floor keeps p = 0 finite.
  CHECK(point_loss(ce, 0.0) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(point_loss(ce, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(point_loss(ce, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(point_loss(LossConfig{LossKind::kLabelSmoothedCE}, 0.5),
                  std::invalid_argument);
}

TEST_CASE("relative loss ratios reproduce the published comparison") {
  // Independent closed forms at p_low = 0.6, p_high = 0.9.
  const double ce_oracle = std::log(0.6) / std::log(0.9);
  const double fl_oracle = (0.4 * std::log(0.6)) / (0.1 * std::log(0.9));
  const double afl_oracle = (1.6 * std::log(0.6)) / (1.9 * std::log(0.9));

  LossConfig ce{LossKind::kCrossEntropy};
  LossConfig fl{LossKind::kFocal, 1.0};
  LossConfig afl{LossKind::kGeneralizedFocal, 1.0, 1.0};

  CHECK(relative_loss_ratio(ce, 0.6, 0.9) == doctest::Approx(ce_oracle).epsilon(1e-12));
  CHECK(relative_loss_ratio(fl, 0.6, 0.9) == doctest::Approx(fl_oracle).epsilon(1e-12));
  CHECK(relative_loss_ratio(afl, 0.6, 0.9) == doctest::Approx(afl_oracle).epsilon(1e-12));

  // Two-decimal headline numbers.
  CHECK(std::abs(relative_loss_ratio(ce, 0.6, 0.9) - 4.85) < 0.005);
  CHECK(std::abs(relative_loss_ratio(fl, 0.6, 0.9) - 19.39) < 0.005);
  CHECK(std::abs(relative_loss_ratio(afl, 0.6, 0.9) - 4.08) < 0.005);

  CHECK_THROWS_AS(relative_loss_ratio(ce, 0.6, 1.0), std::domain_error);
}

TEST_CASE("analytic token gradients agree with central differences") {
  std::mt19937_64 rng(7);
  const int v = 12;
  LossConfig configs[] = {
      {LossKind::kCrossEntropy},
      {LossKind::kLabelSmoothedCE, 1.0, 1.0, 0.1},
      {LossKind::kFocal, 2.0},
      {LossKind::kFocal, 1.0},
      {LossKind::kGeneralizedFocal, 1.0, 0.5},
      {LossKind::kGeneralizedFocal, 1.0, 1.0},
      {LossKind::kGeneralizedFocal, 2.0, -0.5},
  };
  for (const LossConfig& cfg : configs) {
    for (int trial = 0; trial < 5; ++trial) {
      Vec<double> z = random_logits(v, rng);
      TokenId target = static_cast<TokenId>(rng() % v);
      TokenLoss<double> tl = token_loss<double>(cfg, z, target);
      CHECK(std::isfinite(tl.loss));
      Vec<double> fd = fd_gradient(cfg, z, target);
      CHECK(relative_inf_error(tl.dlogits, fd) < 1e-6);
    }
  }
}

TEST_CASE("generalized focal reduces to cross entropy and focal") {
  std::mt19937_64 rng(11);
  Vec<double> z = random_logits(10, rng);
  TokenId target = 4;

  LossConfig ce{LossKind::kCrossEntropy};
  LossConfig gfl_gamma0{LossKind::kGeneralizedFocal, 0.0, 0.7};
  TokenLoss<double> a = token_loss<double>(ce, z, target);
  TokenLoss<double> b = token_loss<double>(gfl_gamma0, z, target);
  CHECK(std::abs(a.loss - b.loss) < 1e-15);
  CHECK((a.dlogits - b.dlogits).lpNorm<Eigen::Infinity>() < 1e-12);

  LossConfig fl{LossKind::kFocal, 2.0};
  LossConfig gfl_neg{LossKind::kGeneralizedFocal, 2.0, -1.0};
  TokenLoss<double> c = token_loss<double>(fl, z, target);
  TokenLoss<double> d = token_loss<double>(gfl_neg, z, target);
  CHECK(c.loss == d.loss);
  CHECK((c.dlogits - d.dlogits).lpNorm<Eigen::Infinity>() == 0.0);

  // Dedicated closed forms as independent oracles.
  Vec<double> p = softmax(z);
  double pt = p(target);
  CHECK(std::abs(c.loss - (-std::pow(1.0 - pt, 2.0) * std::log(pt))) < 1e-15);
  CHECK(std::abs(a.loss - (-std::log(pt))) < 1e-15);
}

TEST_CASE("sequence loss sums token losses") {
  std::mt19937_64 rng(23);
  const int v = 9, tlen = 6;
  Mat<double> logits(tlen, v);
  IdSequence targets;
  for (int t = 0; t < tlen; ++t) {
    logits.row(t) = random_logits(v, rng).transpose();
    targets.push_back(static_cast<TokenId>(rng() % v));
  }

  LossConfig cfg{LossKind::kGeneralizedFocal, 1.0, 1.0};
  SequenceLossResult<double> seq = sequence_loss<double>(cfg, logits, targets);
  CHECK(seq.tokens == tlen);

  double sum = 0.0;
  for (int t = 0; t < tlen; ++t) {
    TokenLoss<double> tl = token_loss<double>(cfg, logits.row(t).transpose(), targets[t]);
    sum += tl.loss;
    CHECK((seq.dlogits.row(t).transpose() - tl.dlogits).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK(seq.loss == doctest::Approx(sum).epsilon(1e-14));

  IdSequence short_targets{0, 1};
  CHECK_THROWS_AS(sequence_loss<double>(cfg, logits, short_targets), std::invalid_argument);
  IdSequence bad{0, 1, 2, 3, 4, 99};
  CHECK_THROWS_AS(sequence_loss<double>(cfg, logits, bad), std::out_of_range);
}

TEST_CASE("loss kinds round trip through names") {
  for (LossKind kind : {LossKind::kCrossEntropy, LossKind::kLabelSmoothedCE, LossKind::kFocal,
                        LossKind::kGeneralizedFocal})
    CHECK(loss_kind_from_string(to_string(kind)) == kind);
  CHECK(loss_kind_from_string("cross-entropy") == LossKind::kCrossEntropy);
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), std::invalid_argument);

  CHECK_THROWS_AS(point_loss(LossConfig{LossKind::kFocal, -1.0}, 0.5), std::invalid_argument);
  LossConfig bad_eps{LossKind::kLabelSmoothedCE, 1.0, 1.0, 1.0};
  Vec<double> z = Vec<double>::Zero(4);
  CHECK_THROWS_AS(token_loss<double>(bad_eps, z, 0), std::invalid_argument);
}
