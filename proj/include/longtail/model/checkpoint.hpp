#pragma once

#include "longtail/corpus.hpp"
#include "longtail/model/params.hpp"

#include <cstdint>
#include <string>

namespace longtail {

/// Everything evaluate needs from a training run. Stored as "LTCK", a u32
/// format version, a u64 JSON header length, the JSON header (model config,
/// step, vocabulary, tensor manifest), then one float32 column-major blob
/// per tensor. Writes go through a temp file and an atomic rename.
struct Checkpoint {
  ModelParams<float> params;
  Vocabulary vocab;
  std::int64_t step = 0;
};

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const Vocabulary& vocab, std::int64_t step);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace longtail
