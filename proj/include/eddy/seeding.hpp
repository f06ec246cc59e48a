#pragma once

#include <cstdint>
#include <initializer_list>

namespace eddy {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic child seed for a (parent, labels...) lineage. Distinct label
/// tuples give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = mix64(parent);
  for (std::uint64_t label : labels) {
    h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ull));
  }
  return h;
}

}  // namespace eddy
