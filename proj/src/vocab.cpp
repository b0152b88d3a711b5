#include "colactc/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "colactc/prng.hpp"
#include "json.hpp"

namespace colactc {

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) {
    throw std::invalid_argument("vocabulary is empty");
  }
  ids_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = ids_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted) {
      std::ostringstream msg;
      msg << "duplicate token \"" << tokens_[i] << "\" at lines "
          << (it->second + 1) << "," << (i + 1);
      throw std::invalid_argument(msg.str());
    }
  }
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) +
                            " out of range [0," + std::to_string(size()) + ")");
  }
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) {
    throw std::out_of_range("unknown token \"" + token + "\"");
  }
  return it->second;
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open vocabulary file: " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    tokens.push_back(line);
  }
  if (tokens.empty()) {
    throw std::runtime_error("empty vocabulary file: " + path);
  }
  return Vocabulary(std::move(tokens));
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write vocabulary file: " + path);
  }
  for (const auto& tok : vocab.tokens()) {
    out << tok << '\n';
  }
}

Vocabulary build_from_corpus(
    const std::vector<std::vector<std::string>>& sentences) {
  struct Entry {
    std::int64_t count = 0;
    std::int64_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::int64_t position = 0;
  bool any_token = false;
  for (const auto& sentence : sentences) {
    for (const auto& tok : sentence) {
      any_token = true;
      auto [it, inserted] = counts.try_emplace(tok, Entry{0, position});
      it->second.count += 1;
      ++position;
    }
  }
  if (!any_token) {
    throw std::invalid_argument("empty corpus");
  }
  std::vector<std::pair<std::string, Entry>> ranked(counts.begin(),
                                                    counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.count != b.second.count) return a.second.count > b.second.count;
    return a.second.first_seen < b.second.first_seen;
  });
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, entry] : ranked) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

ShufflePermutation shuffle_ids(int vocab_size, std::uint64_t seed) {
  if (vocab_size < 1) {
    throw std::invalid_argument("vocab size must be >= 1");
  }
  ShufflePermutation out;
  out.seed = seed;
  out.perm.resize(static_cast<size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) out.perm[static_cast<size_t>(i)] = i;
  SplitMix64 rng(seed);
  for (int i = vocab_size - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(out.perm[static_cast<size_t>(i)], out.perm[static_cast<size_t>(j)]);
  }
  return out;
}

void save_permutation(const ShufflePermutation& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write permutation file: " + path);
  }
  out << nlohmann::json(p.perm).dump() << '\n';
}

ShufflePermutation load_permutation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open permutation file: " + path);
  }
  nlohmann::json j;
  in >> j;
  if (!j.is_array()) {
    throw std::runtime_error("permutation file must hold a JSON array: " + path);
  }
  ShufflePermutation p;
  p.perm = j.get<std::vector<int>>();
  // must be a bijection on [0, n)
  std::vector<int> sorted = p.perm;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != static_cast<int>(i)) {
      throw std::runtime_error("permutation file is not a bijection on [0," +
                               std::to_string(p.perm.size()) + "): " + path);
    }
  }
  return p;
}

}  // namespace colactc
