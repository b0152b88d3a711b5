#include "colactc/colamap.hpp"

#include <cmath>
#include <stdexcept>

namespace colactc {

MapKind parse_map_kind(const std::string& name) {
  if (name == "identity") return MapKind::Identity;
  if (name == "tru") return MapKind::Truncation;
  if (name == "mod") return MapKind::Modulo;
  if (name == "div") return MapKind::Division;
  if (name == "log") return MapKind::LogScaling;
  if (name == "random") return MapKind::Random;
  throw std::invalid_argument(
      "unknown mapping \"" + name +
      "\" (expected identity|tru|mod|div|log|random)");
}

std::string map_kind_name(MapKind kind) {
  switch (kind) {
    case MapKind::Identity: return "identity";
    case MapKind::Truncation: return "tru";
    case MapKind::Modulo: return "mod";
    case MapKind::Division: return "div";
    case MapKind::LogScaling: return "log";
    case MapKind::Random: return "random";
  }
  return "?";
}

CoarseMapper::CoarseMapper(MapKind kind, int vocab_size, int label_size,
                           std::uint64_t seed,
                           std::optional<ShufflePermutation> perm, bool frozen)
    : kind_(kind),
      vocab_size_(vocab_size),
      label_size_(label_size),
      perm_(std::move(perm)),
      frozen_(frozen),
      rng_(seed) {
  if (vocab_size_ < 1) {
    throw std::invalid_argument("mapper vocab size must be >= 1");
  }
  if (label_size_ < 1 || label_size_ > vocab_size_) {
    throw std::invalid_argument(
        "label size must satisfy 1 <= L <= V, got L=" +
        std::to_string(label_size_) + " V=" + std::to_string(vocab_size_));
  }
  if (kind_ == MapKind::Identity && label_size_ != vocab_size_) {
    throw std::invalid_argument("identity mapping requires L == V, got L=" +
                                std::to_string(label_size_) +
                                " V=" + std::to_string(vocab_size_));
  }
  if (perm_ && perm_->size() != vocab_size_) {
    throw std::invalid_argument("shuffle permutation size " +
                                std::to_string(perm_->size()) +
                                " does not match V=" +
                                std::to_string(vocab_size_));
  }
  if (kind_ == MapKind::Random && frozen_) {
    frozen_table_.resize(static_cast<size_t>(vocab_size_));
    for (int z = 0; z < vocab_size_; ++z) {
      frozen_table_[static_cast<size_t>(z)] =
          static_cast<int>(rng_.below(static_cast<std::uint64_t>(label_size_)));
    }
  }
}

int CoarseMapper::apply(int z) const {
  switch (kind_) {
    case MapKind::Identity:
      return z;
    case MapKind::Truncation:
      return std::min(z, label_size_ - 1);
    case MapKind::Modulo:
      return z % label_size_;
    case MapKind::Division:
      return static_cast<int>(static_cast<std::int64_t>(z) * label_size_ /
                              vocab_size_);
    case MapKind::LogScaling: {
      if (vocab_size_ == 1) return 0;
      double v = std::log(static_cast<double>(std::max(z, 1))) *
                 static_cast<double>(label_size_) /
                 std::log(static_cast<double>(vocab_size_));
      int out = static_cast<int>(std::floor(v));
      return std::min(std::max(out, 0), label_size_ - 1);
    }
    case MapKind::Random:
      break;
  }
  throw std::logic_error("apply() called on a Random mapper");
}

int CoarseMapper::map_id(int z) {
  if (z < 0 || z >= vocab_size_) {
    throw std::out_of_range("token id " + std::to_string(z) +
                            " out of range [0," + std::to_string(vocab_size_) +
                            ")");
  }
  if (perm_) z = (*perm_)(z);
  if (kind_ == MapKind::Random) {
    if (frozen_) return frozen_table_[static_cast<size_t>(z)];
    return static_cast<int>(rng_.below(static_cast<std::uint64_t>(label_size_)));
  }
  return apply(z);
}

std::vector<int> CoarseMapper::map_sequence(const std::vector<int>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    try {
      out.push_back(map_id(ids[i]));
    } catch (const std::out_of_range& e) {
      throw std::out_of_range("at index " + std::to_string(i) + ": " +
                              e.what());
    }
  }
  return out;
}

std::vector<std::int64_t> CoarseMapper::label_histogram() const {
  if (kind_ == MapKind::Random) {
    throw std::invalid_argument(
        "label_histogram is undefined for the random mapping");
  }
  std::vector<std::int64_t> counts(static_cast<size_t>(label_size_), 0);
  for (int z = 0; z < vocab_size_; ++z) {
    int y = perm_ ? (*perm_)(z) : z;
    counts[static_cast<size_t>(apply(y))] += 1;
  }
  return counts;
}

}  // namespace colactc
