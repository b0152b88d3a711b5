#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace colactc {

// One grid point: vocabulary size V (decoder softmax is V+2 with BOS and
// EOS, so the MLE head scales with V like the genuine-label CTC head
// does), coarse label size L (L == V means genuine labels), model width,
// lattice frame count and batch size.
struct BenchPoint {
  int v = 1024;
  int l = 256;
  int d = 64;
  int frames = 16;
  int batch = 4;
  double lambda = 0.3;  // 0 disables the CTC branch entirely
};

struct ComponentStat {
  std::string name;
  double median_ms = 0.0;
  double p10_ms = 0.0;
  double p90_ms = 0.0;
};

struct BenchResult {
  BenchPoint point;
  std::vector<ComponentStat> components;  // encode, decode, mle_head,
                                          // ctc_head_loss, backward,
                                          // optimizer, total
  std::int64_t param_count = 0;

  const ComponentStat& component(const std::string& name) const;
  double median_total_ms() const { return component("total").median_ms; }
};

// Times `steps` optimizer steps (after `warmup` untimed ones) on fixed
// synthetic batches, `reps` times from fresh parameters, and reports the
// per-step median with a p10/p90 band. Single-threaded by construction.
BenchResult bench_step(const BenchPoint& point, int steps, int reps,
                       int warmup = 10, std::uint64_t seed = 42);

// Long-format CSV: one row per component plus a total row. The speedup
// column is filled on total rows whenever the matching genuine-label
// (L == V) baseline is present in `results`.
std::string bench_csv(const std::vector<BenchResult>& results);

// Speedups against the genuine-label baseline at otherwise equal grid
// coordinates: speedup(V, L) = median_step_ms(L = V) / median_step_ms(L).
// Errors if a baseline row is missing.
std::string speedup_table(const std::vector<BenchResult>& results);

// Two-column TSV (L, median ctc_head_loss ms) for external plotting.
std::string scaling_tsv(const std::vector<BenchResult>& results);

// Least-squares R^2 of y against an affine function of x.
double affine_fit_r2(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace colactc
