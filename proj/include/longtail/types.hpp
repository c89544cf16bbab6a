#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace longtail {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using TokenId = std::int32_t;
using Count = std::int64_t;

// A sentence as whitespace-separated surface tokens.
using Sentence = std::vector<std::string>;
// A sentence mapped through a Vocabulary.
using IdSequence = std::vector<TokenId>;
// An encoded source/target sentence pair.
using IdPairs = std::vector<std::pair<IdSequence, IdSequence>>;

// Reserved vocabulary slots. Every Vocabulary places these at ids 0..3.
struct Specials {
  static constexpr TokenId pad = 0;
  static constexpr TokenId bos = 1;
  static constexpr TokenId eos = 2;
  static constexpr TokenId unk = 3;
  static constexpr const char* pad_token = "<pad>";
  static constexpr const char* bos_token = "<bos>";
  static constexpr const char* eos_token = "<eos>";
  static constexpr const char* unk_token = "<unk>";
  static constexpr int count = 4;
};

}  // namespace longtail
