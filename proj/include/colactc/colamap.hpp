#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "colactc/prng.hpp"
#include "colactc/vocab.hpp"

namespace colactc {

enum class MapKind { Identity, Truncation, Modulo, Division, LogScaling, Random };

MapKind parse_map_kind(const std::string& name);  // identity|tru|mod|div|log|random
std::string map_kind_name(MapKind kind);

// Coarse label mapping f(z): [0, V) -> [0, L).
//
//   Identity     f(z) = z                    (requires L == V)
//   Truncation   f(z) = min(z, L-1)
//   Modulo       f(z) = z mod L
//   Division     f(z) = floor(z * L / V)     (exact integer arithmetic)
//   LogScaling   f(z) = floor(ln(max(z,1)) * L / ln(V)), clamped to L-1
//   Random       fresh uniform draw on [0, L) per call from the mapper's
//                seeded stream; with frozen=true the draws are fixed once
//                per id at construction instead.
//
// An optional shuffle permutation replaces z with perm(z) before the
// mapping. Non-Random mappers are pure; a Random mapper owns mutable PRNG
// state and needs exclusive access per instance.
class CoarseMapper {
 public:
  CoarseMapper(MapKind kind, int vocab_size, int label_size,
               std::uint64_t seed = 0,
               std::optional<ShufflePermutation> perm = std::nullopt,
               bool frozen = false);

  MapKind kind() const { return kind_; }
  int vocab_size() const { return vocab_size_; }
  int label_size() const { return label_size_; }
  bool deterministic() const { return kind_ != MapKind::Random || frozen_; }

  int map_id(int z);
  std::vector<int> map_sequence(const std::vector<int>& ids);

  // Counts per coarse label over all z in [0, V). Errors for the Random
  // kind, which is not a fixed function of z.
  std::vector<std::int64_t> label_histogram() const;

 private:
  int apply(int z) const;  // non-Random kinds only

  MapKind kind_;
  int vocab_size_;
  int label_size_;
  std::optional<ShufflePermutation> perm_;
  bool frozen_;
  SplitMix64 rng_;
  std::vector<int> frozen_table_;
};

}  // namespace colactc
