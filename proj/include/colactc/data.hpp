#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace colactc {

// One synthetic "speech translation" example. Frames are generated at
// double precision; the trainer casts to its scalar mode.
struct Triplet {
  Eigen::MatrixXd frames;            // F x f_dim
  std::vector<int> transcript_ids;   // in [0, v_src)
  std::vector<int> translation_ids;  // in [0, v_tgt)
};

// Desk-scale generator spec. Source tokens are Zipf-distributed; the
// translation is a fixed seeded bijection of source ids with occasional
// adjacent swaps (mild reordering); each source token expands into a few
// noisy copies of its prototype frame vector.
struct TaskSpec {
  int v_src = 512;
  int v_tgt = 512;
  double zipf_s = 1.3;
  int expand_min = 2;
  int expand_max = 3;
  double noise_sigma = 0.5;
  double swap_prob = 0.1;
  int len_min = 3;
  int len_max = 8;
  int f_dim = 16;
  std::uint64_t seed = 42;

  void validate() const;
};

std::vector<Triplet> generate(const TaskSpec& spec, int n);

// JSON-lines: one object per line with keys frames, transcript_ids,
// translation_ids. Frame values are stored at 6 significant digits.
void write_jsonl(const std::string& path, const std::vector<Triplet>& data);
std::vector<Triplet> read_jsonl(const std::string& path);
// Hard id-range assertion used after read when sizes are known.
void validate_ids(const std::vector<Triplet>& data, int v_src, int v_tgt);

// Token-bucketed batching: per epoch, shuffle deterministically, stable
// sort by target length, pack greedily up to batch_tokens target tokens,
// then shuffle the batch order. One consumer per instance.
class BatchIterator {
 public:
  BatchIterator(const std::vector<Triplet>& data, int batch_tokens,
                std::uint64_t seed);

  // Indices of the next batch; rebuilds the schedule at epoch boundaries.
  const std::vector<int>& next();
  int epoch() const { return epoch_; }
  int batches_per_epoch() const { return static_cast<int>(batches_.size()); }

 private:
  void build_epoch();

  const std::vector<Triplet>* data_;
  int batch_tokens_;
  std::uint64_t seed_;
  int epoch_ = -1;
  size_t cursor_ = 0;
  std::vector<std::vector<int>> batches_;
};

}  // namespace colactc
