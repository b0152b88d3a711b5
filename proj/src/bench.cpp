#include "colactc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "colactc/model.hpp"
#include "colactc/train.hpp"

namespace colactc {

namespace {

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::min(std::max<size_t>(rank, 1), n);
  return values[rank - 1];
}

ModelConfig bench_config(const BenchPoint& point, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.lambda = point.lambda;
  cfg.v_src = point.v;
  cfg.v_tgt = point.v;
  cfg.label_size = point.l;
  cfg.d_model = point.d;
  cfg.n_enc = 2;
  cfg.n_dec = 2;
  cfg.n_heads = 4;
  cfg.ff_mult = 4;
  cfg.k_concat = 1;  // lattice frames == raw frames at the grid's T
  cfg.f_dim = 16;
  cfg.dropout = 0.2;
  cfg.max_steps = 1;
  cfg.batch_tokens = 1 << 30;  // batching is fixed by hand below
  cfg.seed = seed;
  return cfg;
}

std::vector<Triplet> bench_batch(const BenchPoint& point, const ModelConfig& cfg,
                                 std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 0xBE));
  const int src_len = std::max(1, point.frames / 2);
  const int tgt_len = std::max(2, point.frames / 2);
  std::vector<Triplet> batch(static_cast<size_t>(point.batch));
  for (auto& t : batch) {
    t.frames.resize(point.frames, cfg.f_dim);
    for (Eigen::Index r = 0; r < t.frames.rows(); ++r)
      for (Eigen::Index c = 0; c < t.frames.cols(); ++c)
        t.frames(r, c) = rng.normal();
    t.transcript_ids.resize(static_cast<size_t>(src_len));
    for (auto& z : t.transcript_ids)
      z = static_cast<int>(rng.below(static_cast<std::uint64_t>(point.v)));
    t.translation_ids.resize(static_cast<size_t>(tgt_len));
    for (auto& y : t.translation_ids)
      y = static_cast<int>(rng.below(static_cast<std::uint64_t>(point.v)));
  }
  return batch;
}

}  // namespace

const ComponentStat& BenchResult::component(const std::string& name) const {
  for (const auto& c : components) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no component \"" + name + "\" in bench result");
}

BenchResult bench_step(const BenchPoint& point, int steps, int reps, int warmup,
                       std::uint64_t seed) {
  if (steps < 1 || reps < 1 || warmup < 0) {
    throw std::invalid_argument("need steps >= 1, reps >= 1, warmup >= 0");
  }
  ModelConfig cfg = bench_config(point, seed);
  cfg.validate();
  std::vector<Triplet> items = bench_batch(point, cfg, seed);
  std::vector<const Triplet*> batch;
  for (const auto& t : items) batch.push_back(&t);

  std::optional<CoarseMapper> mapper;
  if (point.lambda > 0.0) {
    mapper.emplace(point.l == point.v ? MapKind::Identity : MapKind::Modulo,
                   point.v, point.l);
  }
  const std::uint64_t drop_root = derive_seed(seed, 0xD0);
  const char* names[] = {"encode",        "decode",   "mle_head",
                         "ctc_head_loss", "backward", "optimizer",
                         "total"};
  std::map<std::string, std::vector<double>> samples;

  std::int64_t param_count = 0;
  for (int rep = 0; rep < reps; ++rep) {
    ModelParams<float> params = init_params<float>(cfg);
    param_count = count_params(params);
    AdamState<float> adam = make_adam_state(params);
    ModelParams<float> grads = zeros_like(params);
    StepTimings timings;
    double total_ms = 0.0;
    using clock = std::chrono::steady_clock;
    for (int step = 1; step <= warmup + steps; ++step) {
      const bool timed = step > warmup;
      auto t0 = clock::now();
      for_each_param(grads, [](const std::string&, Mat<float>& m) { m.setZero(); });
      DropoutPlan plan{derive_seed(drop_root, static_cast<std::uint64_t>(step))};
      interpolated_loss<float>(batch, params, cfg, mapper ? &*mapper : nullptr,
                               LabelSource::Translation, &plan, &grads, 1,
                               timed ? &timings : nullptr);
      double lr = learning_rate(cfg, step);
      auto opt0 = clock::now();
      adam_step(params, grads, adam, step, lr, cfg);
      if (timed) {
        timings.optimizer_ms +=
            std::chrono::duration<double, std::milli>(clock::now() - opt0).count();
        total_ms +=
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      }
    }
    const double n = static_cast<double>(steps);
    samples["encode"].push_back(timings.encode_ms / n);
    samples["decode"].push_back(timings.decode_ms / n);
    samples["mle_head"].push_back(timings.mle_head_ms / n);
    samples["ctc_head_loss"].push_back(timings.ctc_ms / n);
    samples["backward"].push_back(timings.backward_ms / n);
    samples["optimizer"].push_back(timings.optimizer_ms / n);
    samples["total"].push_back(total_ms / n);
  }

  BenchResult out;
  out.point = point;
  out.param_count = param_count;
  for (const char* name : names) {
    const auto& vals = samples[name];
    out.components.push_back({name, percentile(vals, 0.5), percentile(vals, 0.1),
                              percentile(vals, 0.9)});
  }
  return out;
}

namespace {

std::string point_key(const BenchPoint& p) {
  return std::to_string(p.v) + ":" + std::to_string(p.d) + ":" +
         std::to_string(p.frames) + ":" + std::to_string(p.batch);
}

// baseline (L == V) total median per matching grid coordinates
std::map<std::string, double> baselines(const std::vector<BenchResult>& results) {
  std::map<std::string, double> out;
  for (const auto& r : results) {
    if (r.point.l == r.point.v) out[point_key(r.point)] = r.median_total_ms();
  }
  return out;
}

}  // namespace

std::string bench_csv(const std::vector<BenchResult>& results) {
  auto base = baselines(results);
  std::ostringstream out;
  out << "V,L,d,T,batch,component,median_ms,p10_ms,p90_ms,speedup\n";
  for (const auto& r : results) {
    for (const auto& c : r.components) {
      out << r.point.v << ',' << r.point.l << ',' << r.point.d << ','
          << r.point.frames << ',' << r.point.batch << ',' << c.name << ','
          << c.median_ms << ',' << c.p10_ms << ',' << c.p90_ms << ',';
      auto it = base.find(point_key(r.point));
      if (c.name == "total" && it != base.end()) {
        out << it->second / c.median_ms;
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string speedup_table(const std::vector<BenchResult>& results) {
  auto base = baselines(results);
  std::ostringstream out;
  out << "V,L,d,T,batch,median_ms,baseline_ms,speedup\n";
  for (const auto& r : results) {
    auto it = base.find(point_key(r.point));
    if (it == base.end()) {
      throw std::invalid_argument(
          "missing genuine-label baseline (L == V) row for V=" +
          std::to_string(r.point.v));
    }
    out << r.point.v << ',' << r.point.l << ',' << r.point.d << ','
        << r.point.frames << ',' << r.point.batch << ','
        << r.median_total_ms() << ',' << it->second << ','
        << it->second / r.median_total_ms() << '\n';
  }
  return out.str();
}

std::string scaling_tsv(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  out << "L\tctc_head_loss_ms\n";
  for (const auto& r : results) {
    out << r.point.l << '\t' << r.component("ctc_head_loss").median_ms << '\n';
  }
  return out.str();
}

double affine_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("need matching x/y with at least 2 points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("degenerate x values");
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  double mean_y = sy / n;
  for (size_t i = 0; i < x.size(); ++i) {
    double fit = intercept + slope * x[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
  }
  if (ss_tot == 0.0) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace colactc
