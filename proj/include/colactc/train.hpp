#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <vector>

#include "colactc/model.hpp"

namespace colactc {

// Inverse-sqrt schedule with linear warmup, scaled by d_model^-1/2.
inline double learning_rate(const ModelConfig& cfg, int step) {
  double s = static_cast<double>(step);
  double w = static_cast<double>(cfg.warmup_steps);
  return cfg.lr_scale / std::sqrt(static_cast<double>(cfg.d_model)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

template <typename S>
struct AdamState {
  ModelParams<S> m;
  ModelParams<S> v;
};

template <typename S>
AdamState<S> make_adam_state(const ModelParams<S>& params) {
  return {zeros_like(params), zeros_like(params)};
}

template <typename S>
void adam_step(ModelParams<S>& params, const ModelParams<S>& grads,
               AdamState<S>& state, int step, double lr,
               const ModelConfig& cfg) {
  const S b1 = static_cast<S>(cfg.adam_beta1);
  const S b2 = static_cast<S>(cfg.adam_beta2);
  const S eps = static_cast<S>(cfg.adam_eps);
  const S bc1 = static_cast<S>(1.0 - std::pow(cfg.adam_beta1, step));
  const S bc2 = static_cast<S>(1.0 - std::pow(cfg.adam_beta2, step));
  const S alpha = static_cast<S>(lr);

  auto ps = param_ptrs(params);
  auto gs = param_ptrs(const_cast<ModelParams<S>&>(grads));
  auto ms = param_ptrs(state.m);
  auto vs = param_ptrs(state.v);
  for (size_t i = 0; i < ps.size(); ++i) {
    auto& p = *ps[i];
    const auto& g = *gs[i];
    auto& m = *ms[i];
    auto& v = *vs[i];
    m = b1 * m + (S(1) - b1) * g;
    v = (b2 * v.array() + (S(1) - b2) * g.array().square()).matrix();
    p.array() -=
        alpha * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
}

struct StepMetrics {
  int step = 0;
  double mle_loss = 0.0;
  bool has_mle = false;
  double ctc_loss = 0.0;
  bool has_ctc = false;
  double total_loss = 0.0;
  int skipped_infeasible = 0;
  double wall_ms = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  int threads = 1;
  // Deterministic mode reports wall_ms as 0 so two runs with the same
  // resolved config and seed emit byte-identical metrics streams.
  bool deterministic = false;
  std::function<void(const StepMetrics&)> metrics_sink;
  StepTimings* timings = nullptr;  // bench instrumentation; threads must be 1
};

template <typename S>
struct TrainOutput {
  ModelParams<S> params;
  std::vector<StepMetrics> metrics;
  std::int64_t skipped_total = 0;
  double wall_s = 0.0;
};

// Runs max_steps Adam steps over token-bucketed batches. Fully
// deterministic given the config seed and a fixed thread count.
template <typename S>
TrainOutput<S> train(const ModelConfig& cfg, const std::vector<Triplet>& dataset,
                     CoarseMapper* mapper, LabelSource source,
                     const TrainOptions& opts = {}) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  validate_ids(dataset, cfg.v_src, cfg.v_tgt);
  if (cfg.lambda > 0.0) {
    if (mapper == nullptr) {
      throw std::invalid_argument("lambda > 0 requires a coarse mapper");
    }
    int want = source == LabelSource::Transcript ? cfg.v_src : cfg.v_tgt;
    if (mapper->vocab_size() != want) {
      throw std::invalid_argument(
          "mapper V=" + std::to_string(mapper->vocab_size()) +
          " does not match the label source vocabulary " + std::to_string(want));
    }
  }
  if (opts.timings && opts.threads > 1) {
    throw std::invalid_argument("timing instrumentation requires threads == 1");
  }

  using clock = std::chrono::steady_clock;
  auto run_start = clock::now();

  TrainOutput<S> out;
  out.params = init_params<S>(cfg);
  AdamState<S> adam = make_adam_state(out.params);
  ModelParams<S> grads = zeros_like(out.params);
  BatchIterator batches(dataset, cfg.batch_tokens, derive_seed(cfg.seed, 0xB0));
  const std::uint64_t drop_root = derive_seed(cfg.seed, 0xD0);
  out.metrics.reserve(static_cast<size_t>(cfg.max_steps));

  for (int step = 1; step <= cfg.max_steps; ++step) {
    auto step_start = clock::now();
    const auto& idx = batches.next();
    std::vector<const Triplet*> batch;
    batch.reserve(idx.size());
    for (int i : idx) batch.push_back(&dataset[static_cast<size_t>(i)]);

    for_each_param(grads, [](const std::string&, Mat<S>& m) { m.setZero(); });
    DropoutPlan plan{derive_seed(drop_root, static_cast<std::uint64_t>(step))};
    BatchLoss loss = interpolated_loss<S>(
        batch, out.params, cfg, mapper, source,
        cfg.dropout > 0.0 ? &plan : nullptr, &grads, opts.threads, opts.timings);

    double lr = learning_rate(cfg, step);
    auto opt_start = clock::now();
    adam_step(out.params, grads, adam, step, lr, cfg);
    if (opts.timings) {
      opts.timings->optimizer_ms +=
          std::chrono::duration<double, std::milli>(clock::now() - opt_start)
              .count();
    }

    for_each_param(out.params, [&](const std::string& name, const Mat<S>& m) {
      if (!m.allFinite()) {
        throw std::runtime_error("non-finite parameter \"" + name +
                                 "\" after optimizer step " +
                                 std::to_string(step));
      }
    });

    out.skipped_total += loss.skipped_infeasible;
    StepMetrics rec;
    rec.step = step;
    rec.mle_loss = loss.mle;
    rec.has_mle = loss.has_mle;
    rec.ctc_loss = loss.ctc;
    rec.has_ctc = loss.has_ctc;
    rec.total_loss = loss.total;
    rec.skipped_infeasible = loss.skipped_infeasible;
    rec.lr = lr;
    rec.wall_ms =
        opts.deterministic
            ? 0.0
            : std::chrono::duration<double, std::milli>(clock::now() - step_start)
                  .count();
    if (opts.metrics_sink) opts.metrics_sink(rec);
    out.metrics.push_back(rec);
  }

  out.wall_s =
      std::chrono::duration<double>(clock::now() - run_start).count();
  return out;
}

}  // namespace colactc
