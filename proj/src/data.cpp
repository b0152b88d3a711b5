#include "colactc/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "colactc/prng.hpp"
#include "colactc/vocab.hpp"
#include "json.hpp"

namespace colactc {

namespace {

constexpr std::uint64_t kProtoTag = 0;
constexpr std::uint64_t kBijectionTag = 1;
constexpr std::uint64_t kSentenceTag = 2;

// Round through "%.6g" so the in-memory value equals the stored one.
double quantize6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace

void TaskSpec::validate() const {
  if (v_src < 1 || v_tgt < 1) throw std::invalid_argument("vocab sizes must be >= 1");
  if (v_tgt < v_src) {
    throw std::invalid_argument(
        "v_tgt must be >= v_src (translation is a bijection of source ids)");
  }
  if (expand_min < 1 || expand_max < expand_min) {
    throw std::invalid_argument("need 1 <= expand_min <= expand_max");
  }
  if (swap_prob < 0.0 || swap_prob > 0.5) {
    throw std::invalid_argument("swap_prob must be in [0, 0.5]");
  }
  if (len_min < 1 || len_max < len_min) {
    throw std::invalid_argument("need 1 <= len_min <= len_max");
  }
  if (f_dim < 1) throw std::invalid_argument("f_dim must be >= 1");
  if (zipf_s < 0.0) throw std::invalid_argument("zipf_s must be >= 0");
}

std::vector<Triplet> generate(const TaskSpec& spec, int n) {
  spec.validate();

  // Token prototypes, one standard-normal row per source id.
  SplitMix64 proto_rng(derive_seed(spec.seed, kProtoTag));
  Eigen::MatrixXd prototypes(spec.v_src, spec.f_dim);
  for (int z = 0; z < spec.v_src; ++z)
    for (int j = 0; j < spec.f_dim; ++j) prototypes(z, j) = proto_rng.normal();

  // Source-to-target bijection.
  auto bijection = shuffle_ids(spec.v_tgt, derive_seed(spec.seed, kBijectionTag));

  // Zipf CDF over source ids: weight(z) = (z+1)^-s.
  std::vector<double> cdf(static_cast<size_t>(spec.v_src));
  double acc = 0.0;
  for (int z = 0; z < spec.v_src; ++z) {
    acc += std::pow(static_cast<double>(z + 1), -spec.zipf_s);
    cdf[static_cast<size_t>(z)] = acc;
  }

  SplitMix64 rng(derive_seed(spec.seed, kSentenceTag));
  auto draw_token = [&]() {
    double u = rng.real() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                     spec.v_src - 1));
  };

  std::vector<Triplet> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Triplet t;
    int len = spec.len_min +
              static_cast<int>(rng.below(
                  static_cast<std::uint64_t>(spec.len_max - spec.len_min + 1)));
    t.transcript_ids.resize(static_cast<size_t>(len));
    // adjacent repeats are redrawn: with expand_min >= k_concat this keeps
    // every transcript CTC-feasible after downsampling
    for (int j = 0; j < len; ++j) {
      int z = draw_token();
      while (spec.v_src > 1 && j > 0 &&
             z == t.transcript_ids[static_cast<size_t>(j - 1)]) {
        z = draw_token();
      }
      t.transcript_ids[static_cast<size_t>(j)] = z;
    }

    t.translation_ids.resize(static_cast<size_t>(len));
    for (int j = 0; j < len; ++j) {
      t.translation_ids[static_cast<size_t>(j)] = bijection(t.transcript_ids[static_cast<size_t>(j)]);
    }
    for (int j = 0; j + 1 < len;) {
      if (rng.real() < spec.swap_prob) {
        std::swap(t.translation_ids[static_cast<size_t>(j)],
                  t.translation_ids[static_cast<size_t>(j + 1)]);
        j += 2;
      } else {
        j += 1;
      }
    }

    // Expand each source token into noisy prototype copies.
    std::vector<int> reps(static_cast<size_t>(len));
    int frames = 0;
    for (auto& r : reps) {
      r = spec.expand_min +
          static_cast<int>(rng.below(static_cast<std::uint64_t>(
              spec.expand_max - spec.expand_min + 1)));
      frames += r;
    }
    t.frames.resize(frames, spec.f_dim);
    int row = 0;
    for (int j = 0; j < len; ++j) {
      for (int r = 0; r < reps[static_cast<size_t>(j)]; ++r, ++row) {
        for (int c = 0; c < spec.f_dim; ++c) {
          double noise = spec.noise_sigma == 0.0 ? 0.0 : spec.noise_sigma * rng.normal();
          t.frames(row, c) = prototypes(t.transcript_ids[static_cast<size_t>(j)], c) + noise;
        }
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<Triplet>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& t : data) {
    nlohmann::json j;
    auto& frames = j["frames"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < t.frames.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < t.frames.cols(); ++c) {
        row.push_back(quantize6(t.frames(r, c)));
      }
      frames.push_back(std::move(row));
    }
    j["transcript_ids"] = t.transcript_ids;
    j["translation_ids"] = t.translation_ids;
    out << j.dump() << '\n';
  }
}

std::vector<Triplet> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<Triplet> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed JSON: " + e.what());
    }
    for (const char* key : {"frames", "transcript_ids", "translation_ids"}) {
      if (!j.contains(key)) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": missing key \"" + key + "\"");
      }
    }
    Triplet t;
    try {
      const auto& frames = j["frames"];
      Eigen::Index rows = static_cast<Eigen::Index>(frames.size());
      Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(frames[0].size()) : 0;
      t.frames.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(frames[static_cast<size_t>(r)].size()) != cols) {
          throw std::runtime_error("ragged frame rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
          t.frames(r, c) = frames[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
        }
      }
      t.transcript_ids = j["transcript_ids"].get<std::vector<int>>();
      t.translation_ids = j["translation_ids"].get<std::vector<int>>();
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

void validate_ids(const std::vector<Triplet>& data, int v_src, int v_tgt) {
  for (size_t i = 0; i < data.size(); ++i) {
    for (int z : data[i].transcript_ids) {
      if (z < 0 || z >= v_src) {
        throw std::runtime_error("item " + std::to_string(i) +
                                 ": transcript id " + std::to_string(z) +
                                 " outside [0," + std::to_string(v_src) + ")");
      }
    }
    for (int y : data[i].translation_ids) {
      if (y < 0 || y >= v_tgt) {
        throw std::runtime_error("item " + std::to_string(i) +
                                 ": translation id " + std::to_string(y) +
                                 " outside [0," + std::to_string(v_tgt) + ")");
      }
    }
  }
}

BatchIterator::BatchIterator(const std::vector<Triplet>& data, int batch_tokens,
                             std::uint64_t seed)
    : data_(&data), batch_tokens_(batch_tokens), seed_(seed) {
  if (data.empty()) throw std::invalid_argument("empty dataset");
  for (size_t i = 0; i < data.size(); ++i) {
    int len = static_cast<int>(data[i].translation_ids.size());
    if (len > batch_tokens_) {
      throw std::invalid_argument(
          "item " + std::to_string(i) + " has " + std::to_string(len) +
          " target tokens, above the batch budget " +
          std::to_string(batch_tokens_));
    }
  }
}

void BatchIterator::build_epoch() {
  ++epoch_;
  std::vector<int> order(data_->size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch_)));
  for (size_t i = order.size() - 1; i > 0; --i) {
    size_t j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return (*data_)[static_cast<size_t>(a)].translation_ids.size() <
           (*data_)[static_cast<size_t>(b)].translation_ids.size();
  });

  batches_.clear();
  std::vector<int> cur;
  int cur_tokens = 0;
  for (int idx : order) {
    int len = static_cast<int>((*data_)[static_cast<size_t>(idx)].translation_ids.size());
    if (!cur.empty() && cur_tokens + len > batch_tokens_) {
      batches_.push_back(std::move(cur));
      cur.clear();
      cur_tokens = 0;
    }
    cur.push_back(idx);
    cur_tokens += len;
  }
  if (!cur.empty()) batches_.push_back(std::move(cur));

  for (size_t i = batches_.size() - 1; i > 0; --i) {
    size_t j = rng.below(i + 1);
    std::swap(batches_[i], batches_[j]);
  }
  cursor_ = 0;
}

const std::vector<int>& BatchIterator::next() {
  if (epoch_ < 0 || cursor_ >= batches_.size()) build_epoch();
  return batches_[cursor_++];
}

}  // namespace colactc
