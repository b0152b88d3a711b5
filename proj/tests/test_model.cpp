#include <cmath>

#include "colactc/checkpoint.hpp"
#include "colactc/model.hpp"
#include "colactc/train.hpp"
#include "doctest.h"

using namespace colactc;

namespace {

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.lambda = 0.3;
  cfg.label_size = 3;
  cfg.v_src = 5;
  cfg.v_tgt = 6;  // decoder vocab is 8 with BOS and EOS
  cfg.d_model = 4;
  cfg.n_enc = 1;
  cfg.n_dec = 1;
  cfg.n_heads = 2;
  cfg.ff_mult = 2;
  cfg.k_concat = 1;
  cfg.f_dim = 4;
  cfg.label_smoothing = 0.1;
  cfg.dropout = 0.0;
  cfg.seed = 7;
  return cfg;
}

Eigen::MatrixXd random_frames(Eigen::Index f, Eigen::Index d, SplitMix64& rng) {
  Eigen::MatrixXd m(f, d);
  for (Eigen::Index i = 0; i < f; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  return m;
}

std::vector<Triplet> micro_batch(const ModelConfig& cfg, SplitMix64& rng) {
  std::vector<Triplet> items(2);
  items[0].frames = random_frames(5, cfg.f_dim, rng);
  items[0].transcript_ids = {0, 2, 4};
  items[0].translation_ids = {1, 5, 3};
  items[1].frames = random_frames(4, cfg.f_dim, rng);
  items[1].transcript_ids = {1, 1};
  items[1].translation_ids = {0, 2};
  return items;
}

std::vector<const Triplet*> ptrs(const std::vector<Triplet>& items) {
  std::vector<const Triplet*> out;
  for (const auto& t : items) out.push_back(&t);
  return out;
}

}  // namespace

TEST_CASE("encoder length contract and padding") {
  ModelConfig cfg = micro_config();
  cfg.k_concat = 3;
  cfg.validate();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(3);
  CHECK(encode(random_frames(6, cfg.f_dim, rng), params, cfg).rows() == 2);
  CHECK(encode(random_frames(7, cfg.f_dim, rng), params, cfg).rows() == 3);
  auto frames = random_frames(7, cfg.f_dim, rng);
  Mat<double> a = encode(frames, params, cfg);
  Mat<double> b = encode(frames, params, cfg);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder rejects dimension mismatch and empty input") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(4);
  CHECK_THROWS(encode(random_frames(3, cfg.f_dim + 1, rng), params, cfg));
  CHECK_THROWS(encode(Eigen::MatrixXd(0, cfg.f_dim), params, cfg));
}

TEST_CASE("mle loss on uniform logits is ln V") {
  ModelConfig cfg = micro_config();  // v_mle == 8
  auto params = init_params<double>(cfg);
  params.w_mle.setZero();
  Mat<double> y = Mat<double>::Random(3, cfg.d_model);
  CHECK(mle_loss<double>(y, {0, 3, 7}, params, 0.0) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy goes to zero with a confident margin") {
  Mat<double> logits = Mat<double>::Zero(2, 8);
  logits(0, 3) = 60.0;
  logits(1, 0) = 60.0;
  double loss = smoothed_cross_entropy<double>(logits, {3, 0}, 0.0, nullptr);
  CHECK(loss < 1e-8);
}

TEST_CASE("smoothed cross entropy matches a direct reimplementation") {
  SplitMix64 rng(11);
  const double eps = 0.1;
  Mat<double> logits(4, 6);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) logits(i, j) = rng.normal();
  std::vector<int> targets{2, 0, 5, 1};
  double got = smoothed_cross_entropy<double>(logits, targets, eps, nullptr);

  double expect = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    double m = logits.row(i).maxCoeff();
    double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    for (Eigen::Index v = 0; v < 6; ++v) {
      double q = (v == targets[static_cast<size_t>(i)] ? 1.0 - eps : 0.0) + eps / 6.0;
      expect -= q * (logits(i, v) - lse);
    }
  }
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("mle loss rejects out-of-vocabulary targets") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  Mat<double> y = Mat<double>::Random(1, cfg.d_model);
  CHECK_THROWS(mle_loss<double>(y, {cfg.v_mle()}, params, 0.0));
}

TEST_CASE("ctc head rows normalize, shift-invariant, uniform at zero weights") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(5);
  Mat<double> x = encode(random_frames(6, cfg.f_dim, rng), params, cfg);
  auto lat = ctc_head(x, params);
  CHECK(lat.classes() == cfg.label_size + 1);
  for (Eigen::Index t = 0; t < lat.frames(); ++t) {
    CHECK(std::abs(log_sum_exp(lat.logp.row(t))) <= 1e-6);
  }

  Mat<double> logits = x * params.ctc_weight().transpose();
  Mat<double> shifted = logits;
  shifted.row(0).array() += 3.25;
  Mat<double> a = log_softmax_rows(logits);
  Mat<double> b = log_softmax_rows(shifted);
  CHECK((a.row(0) - b.row(0)).cwiseAbs().maxCoeff() <= 1e-12);

  params.w_ctc.setZero();
  auto uni = ctc_head(x, params);
  CHECK(uni.logp.minCoeff() ==
        doctest::Approx(-std::log(cfg.label_size + 1.0)).epsilon(1e-12));
  CHECK(uni.logp.maxCoeff() ==
        doctest::Approx(-std::log(cfg.label_size + 1.0)).epsilon(1e-12));
}

TEST_CASE("interpolation endpoints and exact linearity") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(6);
  auto items = micro_batch(cfg, rng);
  auto batch = ptrs(items);
  CoarseMapper mapper(MapKind::Modulo, cfg.v_src, cfg.label_size);

  ModelConfig c0 = cfg;
  c0.lambda = 0.0;
  auto l0 = interpolated_loss<double>(batch, params, c0, nullptr,
                                      LabelSource::Transcript, nullptr, nullptr);
  CHECK(l0.has_mle);
  CHECK_FALSE(l0.has_ctc);
  CHECK(l0.total == l0.mle);

  ModelConfig c1 = cfg;
  c1.lambda = 1.0;
  auto l1 = interpolated_loss<double>(batch, params, c1, &mapper,
                                      LabelSource::Transcript, nullptr, nullptr);
  CHECK_FALSE(l1.has_mle);
  CHECK(l1.has_ctc);
  CHECK(l1.total == l1.ctc);

  auto lm = interpolated_loss<double>(batch, params, cfg, &mapper,
                                      LabelSource::Transcript, nullptr, nullptr);
  CHECK(std::abs(lm.mle - l0.total) <= 1e-12);
  CHECK(std::abs(lm.ctc - l1.total) <= 1e-12);
  CHECK(std::abs(lm.total - (0.7 * l0.total + 0.3 * l1.total)) <= 1e-12);
}

TEST_CASE("lambda outside [0,1] rejected") {
  ModelConfig cfg = micro_config();
  cfg.lambda = 1.5;
  CHECK_THROWS(cfg.validate());
  cfg.lambda = -0.1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("full interpolated gradient matches finite differences") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(12);
  auto items = micro_batch(cfg, rng);
  auto batch = ptrs(items);
  CoarseMapper mapper(MapKind::Modulo, cfg.v_src, cfg.label_size);

  ModelParams<double> grads = zeros_like(params);
  interpolated_loss<double>(batch, params, cfg, &mapper,
                            LabelSource::Transcript, nullptr, &grads);

  auto loss_at = [&]() {
    return interpolated_loss<double>(batch, params, cfg, &mapper,
                                     LabelSource::Transcript, nullptr, nullptr)
        .total;
  };

  const double eps = 1e-5;
  const double tol = 1e-3;
  auto gs = param_ptrs(grads);
  auto pp = param_ptrs(params);
  double worst = 0.0;
  for (size_t k = 0; k < pp.size(); ++k) {
    Mat<double>& p = *pp[k];
    Mat<double>& g = *gs[k];
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        double kept = p(i, j);
        p(i, j) = kept + eps;
        double up = loss_at();
        p(i, j) = kept - eps;
        double dn = loss_at();
        p(i, j) = kept;
        double fd = (up - dn) / (2 * eps);
        double err = std::abs(fd - g(i, j)) /
                     std::max(1.0, std::abs(fd) + std::abs(g(i, j)));
        worst = std::max(worst, err);
      }
    }
  }
  CHECK(worst <= tol);
}

TEST_CASE("decoder causality: row t sees only the prefix") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(13);
  Mat<double> x = encode(random_frames(5, cfg.f_dim, rng), params, cfg);
  std::vector<int> in_ids{cfg.bos_id(), 1, 4, 2, 0};
  DecTape<double> tape;
  Mat<double> y = decoder_forward(x, in_ids, params, cfg, nullptr, tape);
  auto perturbed = in_ids;
  perturbed[3] = 5;
  DecTape<double> tape2;
  Mat<double> y2 = decoder_forward(x, perturbed, params, cfg, nullptr, tape2);
  CHECK((y.topRows(3) - y2.topRows(3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((y.row(3) - y2.row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("parameter counting") {
  ModelConfig cfg;
  cfg.v_src = 512;
  cfg.v_tgt = 512;
  cfg.label_size = 256;
  cfg.d_model = 64;
  auto params = init_params<float>(cfg);
  CHECK(params.w_ctc.size() == 257 * 64);

  ModelConfig genuine = cfg;
  genuine.label_size = 512;
  auto gparams = init_params<float>(genuine);
  CHECK(count_params(gparams) - count_params(params) ==
        static_cast<std::int64_t>(512 - 256) * 64);
}

TEST_CASE("shared prediction weight uses single storage") {
  ModelConfig cfg = micro_config();
  cfg.share_params = true;
  cfg.label_size = cfg.v_mle() - 1;  // 7; transcript vocab must cover it
  cfg.v_src = 9;
  cfg.validate();
  auto params = init_params<double>(cfg);
  CHECK(params.w_ctc.size() == 0);
  CHECK(&params.ctc_weight() == &params.w_mle);

  ModelConfig plain = cfg;
  plain.share_params = false;
  auto full = init_params<double>(plain);
  CHECK(count_params(full) - count_params(params) ==
        static_cast<std::int64_t>(cfg.label_size + 1) * cfg.d_model);

  // one optimizer step moves the single matrix consistently
  SplitMix64 rng(14);
  auto items = micro_batch(cfg, rng);
  for (auto& t : items) t.transcript_ids = {0, 7, 8};
  auto batch = ptrs(items);
  CoarseMapper mapper(MapKind::Truncation, cfg.v_src, cfg.label_size);
  ModelParams<double> grads = zeros_like(params);
  interpolated_loss<double>(batch, params, cfg, &mapper,
                            LabelSource::Transcript, nullptr, &grads);
  CHECK(grads.w_ctc.size() == 0);
  AdamState<double> adam = make_adam_state(params);
  Mat<double> before = params.w_mle;
  adam_step(params, grads, adam, 1, 1e-3, cfg);
  CHECK((params.w_mle - before).cwiseAbs().maxCoeff() > 0.0);
  CHECK(params.w_ctc.size() == 0);
}

TEST_CASE("dropout off means deterministic loss; on draws per item") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(15);
  auto items = micro_batch(cfg, rng);
  auto batch = ptrs(items);
  CoarseMapper mapper(MapKind::Modulo, cfg.v_src, cfg.label_size);
  auto a = interpolated_loss<double>(batch, params, cfg, &mapper,
                                     LabelSource::Transcript, nullptr, nullptr);
  auto b = interpolated_loss<double>(batch, params, cfg, &mapper,
                                     LabelSource::Transcript, nullptr, nullptr);
  CHECK(a.total == b.total);

  ModelConfig cfgd = cfg;
  cfgd.dropout = 0.3;
  DropoutPlan plan{123};
  auto c = interpolated_loss<double>(batch, params, cfgd, &mapper,
                                     LabelSource::Transcript, &plan, nullptr);
  auto d = interpolated_loss<double>(batch, params, cfgd, &mapper,
                                     LabelSource::Transcript, &plan, nullptr);
  CHECK(c.total == d.total);  // same plan, same masks
  CHECK(c.total != a.total);
}

TEST_CASE("thread count does not change the result") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  SplitMix64 rng(16);
  auto items = micro_batch(cfg, rng);
  auto batch = ptrs(items);
  CoarseMapper mapper(MapKind::Modulo, cfg.v_src, cfg.label_size);
  ModelParams<double> g1 = zeros_like(params);
  ModelParams<double> g2 = zeros_like(params);
  auto a = interpolated_loss<double>(batch, params, cfg, &mapper,
                                     LabelSource::Transcript, nullptr, &g1, 1);
  auto b = interpolated_loss<double>(batch, params, cfg, &mapper,
                                     LabelSource::Transcript, nullptr, &g2, 2);
  CHECK(a.total == b.total);
  auto p1 = param_ptrs(g1);
  auto p2 = param_ptrs(g2);
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK((*p1[i] - *p2[i]).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("checkpoint round trip preserves parameters and config") {
  ModelConfig cfg = micro_config();
  auto params = init_params<double>(cfg);
  save_checkpoint("/tmp/colactc_test_ckpt.bin", params, cfg);
  auto [loaded, lcfg] = load_checkpoint<double>("/tmp/colactc_test_ckpt.bin");
  CHECK(lcfg.d_model == cfg.d_model);
  CHECK(lcfg.label_size == cfg.label_size);
  auto a = param_ptrs(params);
  auto b = param_ptrs(loaded);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK((*a[i] - *b[i]).cwiseAbs().maxCoeff() == 0.0);
  }

  auto f32 = init_params<float>(cfg);
  save_checkpoint("/tmp/colactc_test_ckpt32.bin", f32, cfg);
  auto [widened, wcfg] = load_checkpoint<double>("/tmp/colactc_test_ckpt32.bin");
  CHECK(static_cast<float>(widened.w_mle(0, 0)) == f32.w_mle(0, 0));
}

TEST_CASE("beam with width one equals greedy; beam never scores worse") {
  ModelConfig cfg = micro_config();
  cfg.max_decode_len = 8;
  auto params = init_params<double>(cfg);
  SplitMix64 rng(17);
  for (int round = 0; round < 5; ++round) {
    auto frames = random_frames(4 + static_cast<Eigen::Index>(rng.below(4)),
                                cfg.f_dim, rng);
    ModelConfig beam1 = cfg;
    beam1.beam_size = 1;
    CHECK(decode(frames, params, beam1, DecodeMode::Beam) ==
          decode(frames, params, cfg, DecodeMode::Greedy));

    ModelConfig beam4 = cfg;
    beam4.beam_size = 4;
    auto beam_out = decode(frames, params, beam4, DecodeMode::Beam);
    auto greedy_out = decode(frames, params, cfg, DecodeMode::Greedy);
    CHECK(hypothesis_score(frames, beam_out, params, cfg) >=
          hypothesis_score(frames, greedy_out, params, cfg) - 1e-12);
  }
}
