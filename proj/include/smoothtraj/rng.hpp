#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace smoothtraj {

using Rng = std::mt19937_64;

/// Independent generator for the stream addressed by (seed, path...), e.g.
/// (seed, epoch, scene) or (seed, scene, sample). The same address always
/// yields the same sequence.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path.size() + 1) + 1);
  auto append = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  append(seed);
  words.push_back(static_cast<std::uint32_t>(path.size()));
  for (auto p : path) append(p);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace smoothtraj
