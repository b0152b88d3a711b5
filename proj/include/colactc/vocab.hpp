#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace colactc {

// Frequency-ranked vocabulary: id == rank position, 0 = most frequent.
// Immutable after construction and safe to share across threads.
class Vocabulary {
 public:
  // Takes ownership of an ordered token list; throws on duplicates.
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token_of(int id) const;
  int id_of(const std::string& token) const;  // throws if unknown
  bool contains(const std::string& token) const {
    return ids_.count(token) != 0;
  }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// One token per line, UTF-8, LF line endings, no header. Line index is
// the id. Errors on duplicates (names the token and both 1-based line
// numbers) and on an empty file.
Vocabulary load_vocabulary(const std::string& path);
void save_vocabulary(const Vocabulary& vocab, const std::string& path);

// Ranks tokens by descending corpus count; ties broken by first
// occurrence in the corpus. Errors on an empty corpus.
Vocabulary build_from_corpus(
    const std::vector<std::vector<std::string>>& sentences);

// A seeded bijection on [0, V), used for the shuffled-vocabulary
// ablation: composing a mapper with the permutation destroys the
// frequency ordering the mapper would otherwise see.
struct ShufflePermutation {
  std::vector<int> perm;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(perm.size()); }
  int operator()(int id) const { return perm[static_cast<size_t>(id)]; }
};

// Fisher-Yates driven by SplitMix64(seed); identical seed gives an
// identical permutation.
ShufflePermutation shuffle_ids(int vocab_size, std::uint64_t seed);

// Serialized as a JSON array of integers.
void save_permutation(const ShufflePermutation& p, const std::string& path);
ShufflePermutation load_permutation(const std::string& path);

}  // namespace colactc
