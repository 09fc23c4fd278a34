// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "melvq/quantizer.hpp"
#include "melvq/trainer.hpp"

namespace melvq::testing {

/// Gaussian codebook with float32-exact entries.
inline Matrix random_codewords(std::mt19937_64& rng, int bits, int dim, double scale = 1.0) {
  std::normal_distribution<float> g(0.0f, static_cast<float>(scale));
  Matrix m(Eigen::Index{1} << bits, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline ScalarCodebook random_scalar(std::mt19937_64& rng, int bits) {
  std::uniform_real_distribution<float> u(-60.0f, 20.0f);
  std::vector<double> levels;
  while (levels.size() < (std::size_t{1} << bits)) {
    levels.push_back(u(rng));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  }
  return ScalarCodebook(levels);
}

/// Untrained but valid codebook set with the given widths.
inline CodebookSet random_set(RateMode mode, std::uint64_t seed, int sq_bits, int vq_bits_a,
                              int vq_bits_b = 0, int dim = 79) {
  std::mt19937_64 rng(seed);
  CodebookSet set;
  set.mode = mode;
  set.scalar = random_scalar(rng, sq_bits);
  if (mode == RateMode::kR1000) {
    set.vector = VectorCodebook(random_codewords(rng, vq_bits_a, dim, 3.0));
  } else {
    set.msvq = MsvqCodebook({VectorCodebook(random_codewords(rng, vq_bits_a, dim, 3.0)),
                             VectorCodebook(random_codewords(rng, vq_bits_b, dim, 1.0))});
  }
  set.content_hash = codebook_hash(set);
  return set;
}

}  // namespace melvq::testing
