#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "colactc/colamap.hpp"
#include "colactc/ctc.hpp"
#include "colactc/data.hpp"
#include "colactc/nn.hpp"

namespace colactc {

// ------------------------------------------------------------------ config

enum class LabelSource { Transcript, Translation };

inline LabelSource parse_label_source(const std::string& s) {
  if (s == "transcript") return LabelSource::Transcript;
  if (s == "translation") return LabelSource::Translation;
  throw std::invalid_argument("unknown label source \"" + s +
                              "\" (expected transcript|translation)");
}

// Desk-scale training configuration. The decoder vocabulary is the target
// vocabulary plus BOS and EOS.
struct ModelConfig {
  double lambda = 0.3;
  int label_size = 256;  // L, the coarse CTC space
  int v_src = 512;
  int v_tgt = 512;
  int d_model = 64;
  int n_enc = 2;
  int n_dec = 2;
  int n_heads = 4;
  int ff_mult = 4;
  int k_concat = 3;
  int f_dim = 16;
  double label_smoothing = 0.1;
  double dropout = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  int warmup_steps = 400;
  int max_steps = 2000;
  int batch_tokens = 128;
  double lr_scale = 1.0;
  int beam_size = 8;
  int max_decode_len = 64;
  bool share_params = false;
  std::uint64_t seed = 42;

  int v_mle() const { return v_tgt + 2; }
  int bos_id() const { return v_tgt; }
  int eos_id() const { return v_tgt + 1; }
  int d_ff() const { return d_model * ff_mult; }

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0)
      throw std::invalid_argument("lambda must be in [0,1]");
    if (label_size < 1) throw std::invalid_argument("label_size must be >= 1");
    if (v_src < 1 || v_tgt < 1)
      throw std::invalid_argument("vocab sizes must be >= 1");
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
      throw std::invalid_argument("d_model must be a positive multiple of n_heads");
    if (n_enc < 1 || n_dec < 1)
      throw std::invalid_argument("need at least one encoder and decoder layer");
    if (k_concat < 1) throw std::invalid_argument("k_concat must be >= 1");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
      throw std::invalid_argument("label_smoothing must be in [0,1)");
    if (dropout < 0.0 || dropout >= 1.0)
      throw std::invalid_argument("dropout must be in [0,1)");
    if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (batch_tokens < 1) throw std::invalid_argument("batch_tokens must be >= 1");
    if (beam_size < 1) throw std::invalid_argument("beam_size must be >= 1");
    if (share_params && label_size + 1 != v_mle()) {
      throw std::invalid_argument(
          "share_params requires L+1 == decoder vocab (" +
          std::to_string(v_mle()) + "), got L=" + std::to_string(label_size));
    }
  }
};

// ------------------------------------------------------------------ params

template <typename S>
struct EncLayerParams {
  LayerNormParams<S> ln1;
  AttnParams<S> attn;
  LayerNormParams<S> ln2;
  FfnParams<S> ffn;
};

template <typename S>
struct DecLayerParams {
  LayerNormParams<S> ln1;
  AttnParams<S> self_attn;
  LayerNormParams<S> ln2;
  AttnParams<S> cross_attn;
  LayerNormParams<S> ln3;
  FfnParams<S> ffn;
};

template <typename S>
struct ModelParams {
  Mat<S> frame_proj_w;  // (k_concat * f_dim) x d
  Mat<S> frame_proj_b;  // 1 x d
  std::vector<EncLayerParams<S>> enc;
  LayerNormParams<S> enc_ln;
  std::vector<DecLayerParams<S>> dec;
  LayerNormParams<S> dec_ln;
  Mat<S> w_mle;  // v_mle x d, softmax embedding (also the decoder input embedding)
  Mat<S> w_ctc;  // (L+1) x d prediction weight; 0x0 when shared
  bool shared = false;

  Mat<S>& ctc_weight() { return shared ? w_mle : w_ctc; }
  const Mat<S>& ctc_weight() const { return shared ? w_mle : w_ctc; }
};

// Fixed parameter traversal order; checkpoints, Adam state and the
// finite-difference suites all rely on it.
template <typename PT, typename Fn>
void for_each_param(PT& p, Fn&& fn) {
  fn("frame_proj_w", p.frame_proj_w);
  fn("frame_proj_b", p.frame_proj_b);
  for (size_t i = 0; i < p.enc.size(); ++i) {
    const std::string base = "enc." + std::to_string(i) + ".";
    auto& l = p.enc[i];
    fn(base + "ln1.g", l.ln1.g);
    fn(base + "ln1.b", l.ln1.b);
    fn(base + "attn.wq", l.attn.wq);
    fn(base + "attn.wk", l.attn.wk);
    fn(base + "attn.wv", l.attn.wv);
    fn(base + "attn.wo", l.attn.wo);
    fn(base + "ln2.g", l.ln2.g);
    fn(base + "ln2.b", l.ln2.b);
    fn(base + "ffn.w1", l.ffn.w1);
    fn(base + "ffn.b1", l.ffn.b1);
    fn(base + "ffn.w2", l.ffn.w2);
    fn(base + "ffn.b2", l.ffn.b2);
  }
  fn("enc_ln.g", p.enc_ln.g);
  fn("enc_ln.b", p.enc_ln.b);
  for (size_t i = 0; i < p.dec.size(); ++i) {
    const std::string base = "dec." + std::to_string(i) + ".";
    auto& l = p.dec[i];
    fn(base + "ln1.g", l.ln1.g);
    fn(base + "ln1.b", l.ln1.b);
    fn(base + "self.wq", l.self_attn.wq);
    fn(base + "self.wk", l.self_attn.wk);
    fn(base + "self.wv", l.self_attn.wv);
    fn(base + "self.wo", l.self_attn.wo);
    fn(base + "ln2.g", l.ln2.g);
    fn(base + "ln2.b", l.ln2.b);
    fn(base + "cross.wq", l.cross_attn.wq);
    fn(base + "cross.wk", l.cross_attn.wk);
    fn(base + "cross.wv", l.cross_attn.wv);
    fn(base + "cross.wo", l.cross_attn.wo);
    fn(base + "ln3.g", l.ln3.g);
    fn(base + "ln3.b", l.ln3.b);
    fn(base + "ffn.w1", l.ffn.w1);
    fn(base + "ffn.b1", l.ffn.b1);
    fn(base + "ffn.w2", l.ffn.w2);
    fn(base + "ffn.b2", l.ffn.b2);
  }
  fn("dec_ln.g", p.dec_ln.g);
  fn("dec_ln.b", p.dec_ln.b);
  fn("w_mle", p.w_mle);
  // absent when shared with w_mle or when the model trains without CTC
  if (!p.shared && p.w_ctc.size() > 0) fn("w_ctc", p.w_ctc);
}

template <typename S>
std::vector<Mat<S>*> param_ptrs(ModelParams<S>& p) {
  std::vector<Mat<S>*> out;
  for_each_param(p, [&](const std::string&, Mat<S>& m) { out.push_back(&m); });
  return out;
}

template <typename S>
std::int64_t count_params(const ModelParams<S>& p) {
  std::int64_t n = 0;
  for_each_param(p, [&](const std::string&, const Mat<S>& m) { n += m.size(); });
  return n;
}

namespace detail {

template <typename S>
Mat<S> xavier(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(rows + cols));
  Mat<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<S>(std * rng.normal());
  return m;
}

template <typename S>
void init_ln(LayerNormParams<S>& ln, Eigen::Index d) {
  ln.g = Mat<S>::Ones(1, d);
  ln.b = Mat<S>::Zero(1, d);
}

template <typename S>
void init_attn(AttnParams<S>& a, Eigen::Index d, SplitMix64& rng) {
  a.wq = xavier<S>(d, d, rng);
  a.wk = xavier<S>(d, d, rng);
  a.wv = xavier<S>(d, d, rng);
  a.wo = xavier<S>(d, d, rng);
}

template <typename S>
void init_ffn(FfnParams<S>& f, Eigen::Index d, Eigen::Index dff,
              SplitMix64& rng) {
  f.w1 = xavier<S>(d, dff, rng);
  f.b1 = Mat<S>::Zero(1, dff);
  f.w2 = xavier<S>(dff, d, rng);
  f.b2 = Mat<S>::Zero(1, d);
}

}  // namespace detail

template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(derive_seed(cfg.seed, 0x70));
  const Eigen::Index d = cfg.d_model;
  ModelParams<S> p;
  p.shared = cfg.share_params;
  p.frame_proj_w = detail::xavier<S>(cfg.k_concat * cfg.f_dim, d, rng);
  p.frame_proj_b = Mat<S>::Zero(1, d);
  p.enc.resize(static_cast<size_t>(cfg.n_enc));
  for (auto& l : p.enc) {
    detail::init_ln(l.ln1, d);
    detail::init_attn(l.attn, d, rng);
    detail::init_ln(l.ln2, d);
    detail::init_ffn(l.ffn, d, cfg.d_ff(), rng);
  }
  detail::init_ln(p.enc_ln, d);
  p.dec.resize(static_cast<size_t>(cfg.n_dec));
  for (auto& l : p.dec) {
    detail::init_ln(l.ln1, d);
    detail::init_attn(l.self_attn, d, rng);
    detail::init_ln(l.ln2, d);
    detail::init_attn(l.cross_attn, d, rng);
    detail::init_ln(l.ln3, d);
    detail::init_ffn(l.ffn, d, cfg.d_ff(), rng);
  }
  detail::init_ln(p.dec_ln, d);
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  auto emb = [&](Eigen::Index rows) {
    Mat<S> m(rows, d);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        m(i, j) = static_cast<S>(emb_std * rng.normal());
    return m;
  };
  p.w_mle = emb(cfg.v_mle());
  // the prediction layer exists only when the CTC branch is active
  if (!cfg.share_params && cfg.lambda > 0.0) p.w_ctc = emb(cfg.label_size + 1);
  return p;
}

// ------------------------------------------------------------------- tapes

template <typename S>
struct EncLayerTape {
  LayerNormCache<S> ln1;
  AttnCache<S> attn;
  DropoutCache<S> drop1;
  LayerNormCache<S> ln2;
  FfnCache<S> ffn;
  DropoutCache<S> drop2;
};

template <typename S>
struct DecLayerTape {
  LayerNormCache<S> ln1;
  AttnCache<S> self_attn;
  DropoutCache<S> drop1;
  LayerNormCache<S> ln2;
  AttnCache<S> cross_attn;
  DropoutCache<S> drop2;
  LayerNormCache<S> ln3;
  FfnCache<S> ffn;
  DropoutCache<S> drop3;
};

template <typename S>
struct EncTape {
  Mat<S> concat;  // |X| x (k_concat * f_dim)
  std::vector<EncLayerTape<S>> layers;
  LayerNormCache<S> final_ln;
};

template <typename S>
struct DecTape {
  std::vector<int> in_ids;
  std::vector<DecLayerTape<S>> layers;
  LayerNormCache<S> final_ln;
};

// ----------------------------------------------------------------- encoder

// Stack k_concat neighboring frames per position, zero-filling the last
// partial group. |X| = ceil(F / k).
template <typename S>
Mat<S> frame_concat(const Eigen::MatrixXd& frames, int k) {
  const Eigen::Index f = frames.rows();
  const Eigen::Index fd = frames.cols();
  const Eigen::Index n = (f + k - 1) / k;
  Mat<S> out = Mat<S>::Zero(n, static_cast<Eigen::Index>(k) * fd);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::Index r = pos * k + j;
      if (r < f) out.block(pos, j * fd, 1, fd) = frames.row(r).template cast<S>();
    }
  }
  return out;
}

template <typename S>
Mat<S> encode_forward(const Eigen::MatrixXd& frames, const ModelParams<S>& p,
                      const ModelConfig& cfg, SplitMix64* drop_rng,
                      EncTape<S>& tape) {
  if (frames.rows() < 1) throw std::invalid_argument("empty frame matrix");
  if (frames.cols() != cfg.f_dim) {
    throw std::invalid_argument("frame dim " + std::to_string(frames.cols()) +
                                " does not match config f_dim " +
                                std::to_string(cfg.f_dim));
  }
  const S rate = static_cast<S>(cfg.dropout);
  tape.concat = frame_concat<S>(frames, cfg.k_concat);
  Mat<S> x = tape.concat * p.frame_proj_w;
  x.rowwise() += p.frame_proj_b.row(0);
  x += positional_encoding<S>(x.rows(), x.cols());

  tape.layers.resize(p.enc.size());
  for (size_t i = 0; i < p.enc.size(); ++i) {
    const auto& l = p.enc[i];
    auto& t = tape.layers[i];
    Mat<S> a = layer_norm(l.ln1, x, t.ln1);
    Mat<S> s = attention(l.attn, a, a, cfg.n_heads, false, t.attn);
    dropout_inplace(s, rate, drop_rng, t.drop1);
    x += s;
    Mat<S> fin = layer_norm(l.ln2, x, t.ln2);
    Mat<S> f = ffn(l.ffn, fin, rate, drop_rng, t.ffn);
    dropout_inplace(f, rate, drop_rng, t.drop2);
    x += f;
  }
  return layer_norm(p.enc_ln, x, tape.final_ln);
}

template <typename S>
void encode_backward(const ModelParams<S>& p, const ModelConfig& cfg,
                     const EncTape<S>& tape, const Mat<S>& dx_out,
                     ModelParams<S>& grads) {
  Mat<S> dx = layer_norm_backward(p.enc_ln, tape.final_ln, dx_out, grads.enc_ln);
  for (size_t ri = p.enc.size(); ri-- > 0;) {
    const auto& l = p.enc[ri];
    const auto& t = tape.layers[ri];
    auto& g = grads.enc[ri];
    Mat<S> df = dx;
    dropout_backward_inplace(df, t.drop2);
    Mat<S> dfin = ffn_backward(l.ffn, t.ffn, df, g.ffn);
    dx += layer_norm_backward(l.ln2, t.ln2, dfin, g.ln2);
    Mat<S> ds = dx;
    dropout_backward_inplace(ds, t.drop1);
    Mat<S> dxq = Mat<S>::Zero(ds.rows(), ds.cols());
    Mat<S> dxkv = Mat<S>::Zero(ds.rows(), ds.cols());
    attention_backward(l.attn, t.attn, ds, g.attn, dxq, dxkv);
    dxq += dxkv;
    dx += layer_norm_backward(l.ln1, t.ln1, dxq, g.ln1);
  }
  grads.frame_proj_w.noalias() += tape.concat.transpose() * dx;
  grads.frame_proj_b.row(0) += dx.colwise().sum();
}

// Deterministic eval-mode encoder output (the speech representation X).
template <typename S>
Mat<S> encode(const Eigen::MatrixXd& frames, const ModelParams<S>& p,
              const ModelConfig& cfg) {
  EncTape<S> tape;
  return encode_forward(frames, p, cfg, nullptr, tape);
}

// ----------------------------------------------------------------- decoder

// Decoder states for the shifted input sequence (BOS + prefix). Row t
// depends only on in_ids[0..t] thanks to the causal mask.
template <typename S>
Mat<S> decoder_forward(const Mat<S>& x_enc, const std::vector<int>& in_ids,
                       const ModelParams<S>& p, const ModelConfig& cfg,
                       SplitMix64* drop_rng, DecTape<S>& tape) {
  if (in_ids.empty()) throw std::invalid_argument("empty decoder input");
  const S rate = static_cast<S>(cfg.dropout);
  const Eigen::Index d = cfg.d_model;
  const S emb_scale = std::sqrt(static_cast<S>(d));
  tape.in_ids = in_ids;
  Mat<S> y(static_cast<Eigen::Index>(in_ids.size()), d);
  for (size_t t = 0; t < in_ids.size(); ++t) {
    int id = in_ids[t];
    if (id < 0 || id >= cfg.v_mle()) {
      throw std::out_of_range("decoder input id " + std::to_string(id) +
                              " outside [0," + std::to_string(cfg.v_mle()) + ")");
    }
    y.row(static_cast<Eigen::Index>(t)) = p.w_mle.row(id) * emb_scale;
  }
  y += positional_encoding<S>(y.rows(), d);

  tape.layers.resize(p.dec.size());
  for (size_t i = 0; i < p.dec.size(); ++i) {
    const auto& l = p.dec[i];
    auto& t = tape.layers[i];
    Mat<S> a = layer_norm(l.ln1, y, t.ln1);
    Mat<S> s = attention(l.self_attn, a, a, cfg.n_heads, true, t.self_attn);
    dropout_inplace(s, rate, drop_rng, t.drop1);
    y += s;
    Mat<S> cin = layer_norm(l.ln2, y, t.ln2);
    Mat<S> c = attention(l.cross_attn, cin, x_enc, cfg.n_heads, false, t.cross_attn);
    dropout_inplace(c, rate, drop_rng, t.drop2);
    y += c;
    Mat<S> fin = layer_norm(l.ln3, y, t.ln3);
    Mat<S> f = ffn(l.ffn, fin, rate, drop_rng, t.ffn);
    dropout_inplace(f, rate, drop_rng, t.drop3);
    y += f;
  }
  return layer_norm(p.dec_ln, y, tape.final_ln);
}

// Backward through the decoder stack; accumulates the cross-attention
// gradient w.r.t. the encoder output into dx_enc.
template <typename S>
void decoder_backward(const ModelParams<S>& p, const ModelConfig& cfg,
                      const DecTape<S>& tape, const Mat<S>& dy_out,
                      ModelParams<S>& grads, Mat<S>& dx_enc) {
  Mat<S> dy = layer_norm_backward(p.dec_ln, tape.final_ln, dy_out, grads.dec_ln);
  for (size_t ri = p.dec.size(); ri-- > 0;) {
    const auto& l = p.dec[ri];
    const auto& t = tape.layers[ri];
    auto& g = grads.dec[ri];
    Mat<S> df = dy;
    dropout_backward_inplace(df, t.drop3);
    Mat<S> dfin = ffn_backward(l.ffn, t.ffn, df, g.ffn);
    dy += layer_norm_backward(l.ln3, t.ln3, dfin, g.ln3);

    Mat<S> dc = dy;
    dropout_backward_inplace(dc, t.drop2);
    Mat<S> dcin = Mat<S>::Zero(dy.rows(), dy.cols());
    attention_backward(l.cross_attn, t.cross_attn, dc, g.cross_attn, dcin, dx_enc);
    dy += layer_norm_backward(l.ln2, t.ln2, dcin, g.ln2);

    Mat<S> ds = dy;
    dropout_backward_inplace(ds, t.drop1);
    Mat<S> dxq = Mat<S>::Zero(dy.rows(), dy.cols());
    Mat<S> dxkv = Mat<S>::Zero(dy.rows(), dy.cols());
    attention_backward(l.self_attn, t.self_attn, ds, g.self_attn, dxq, dxkv);
    dxq += dxkv;
    dy += layer_norm_backward(l.ln1, t.ln1, dxq, g.ln1);
  }
  const S emb_scale = std::sqrt(static_cast<S>(cfg.d_model));
  for (size_t t = 0; t < tape.in_ids.size(); ++t) {
    grads.w_mle.row(tape.in_ids[t]) +=
        dy.row(static_cast<Eigen::Index>(t)) * emb_scale;
  }
}

// ------------------------------------------------------------------- heads

// Per-frame log-probabilities over L coarse labels plus blank (Eq. of the
// prediction layer): rows are log-softmax of W_ctc x_k.
template <typename S>
LogProbLattice<S> ctc_head(const Mat<S>& x_enc, const ModelParams<S>& p) {
  Mat<S> logits = x_enc * p.ctc_weight().transpose();
  return {log_softmax_rows(logits)};
}

// Per-token mean of label-smoothed cross entropy for one sequence.
template <typename S>
S mle_loss(const Mat<S>& y_states, const std::vector<int>& targets,
           const ModelParams<S>& p, S smoothing) {
  Mat<S> logits = y_states * p.w_mle.transpose();
  S sum = smoothed_cross_entropy<S>(logits, targets, smoothing, nullptr);
  return sum / static_cast<S>(targets.size());
}

// -------------------------------------------------------- batch objective

struct BatchLoss {
  double mle = std::numeric_limits<double>::quiet_NaN();
  double ctc = std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  bool has_mle = false;
  bool has_ctc = false;
  int skipped_infeasible = 0;
  int feasible_items = 0;
  std::int64_t total_tokens = 0;
};

struct StepTimings {
  double encode_ms = 0;
  double decode_ms = 0;
  double mle_head_ms = 0;
  double ctc_ms = 0;
  double backward_ms = 0;
  double optimizer_ms = 0;
};

// Dropout is active when a plan is supplied; each batch item draws from
// its own derived stream so results do not depend on the thread count.
struct DropoutPlan {
  std::uint64_t step_seed = 0;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

template <typename S>
struct ItemResult {
  double mle_sum = 0.0;  // smoothed CE summed over target positions
  double ctc_nll = 0.0;
  bool feasible = false;
  std::int64_t tokens = 0;
};

// Forward (+ optional backward) for one batch item. mle_w and ctc_w are
// the weights applied to the per-position CE sum and the per-item CTC
// loss inside the batch objective.
template <typename S>
ItemResult<S> process_item(const Triplet& item, const std::vector<int>& ctc_labels,
                           bool ctc_on, bool mle_on, bool feasible,
                           const ModelParams<S>& p, const ModelConfig& cfg,
                           S mle_w, S ctc_w, std::uint64_t drop_seed,
                           bool use_dropout, ModelParams<S>* grads,
                           StepTimings* timings) {
  using clock = std::chrono::steady_clock;
  ItemResult<S> out;
  SplitMix64 drop_rng_store(drop_seed);
  SplitMix64* drop_rng = use_dropout ? &drop_rng_store : nullptr;

  auto t0 = clock::now();
  EncTape<S> etape;
  Mat<S> x = encode_forward(item.frames, p, cfg, drop_rng, etape);
  if (timings) timings->encode_ms += ms_since(t0);

  Mat<S> dx = Mat<S>::Zero(x.rows(), x.cols());

  if (ctc_on && feasible) {
    t0 = clock::now();
    const Mat<S>& w = p.ctc_weight();
    Mat<S> logits = x * w.transpose();
    LogProbLattice<S> lat{log_softmax_rows(logits)};
    if (grads) {
      Mat<S> dlogp;
      out.ctc_nll = static_cast<double>(ctc_grad(lat, ctc_labels, dlogp));
      // through log-softmax: dlogit = dlogp - p * rowsum(dlogp)
      Mat<S> probs = lat.logp.array().exp().matrix();
      Vec<S> rowsum = dlogp.rowwise().sum();
      Mat<S> dlogits = dlogp - rowsum.asDiagonal() * probs;
      dlogits *= ctc_w;
      Mat<S>& gw = grads->shared ? grads->w_mle : grads->w_ctc;
      gw.noalias() += dlogits.transpose() * x;
      dx.noalias() += dlogits * w;
    } else {
      out.ctc_nll = static_cast<double>(ctc_neg_log_likelihood(lat, ctc_labels).nll);
    }
    out.feasible = true;
    if (timings) timings->ctc_ms += ms_since(t0);
  }

  if (mle_on) {
    std::vector<int> in_ids;
    in_ids.reserve(item.translation_ids.size() + 1);
    in_ids.push_back(cfg.bos_id());
    in_ids.insert(in_ids.end(), item.translation_ids.begin(),
                  item.translation_ids.end());
    std::vector<int> targets = item.translation_ids;
    targets.push_back(cfg.eos_id());
    out.tokens = static_cast<std::int64_t>(targets.size());

    t0 = clock::now();
    DecTape<S> dtape;
    Mat<S> y = decoder_forward(x, in_ids, p, cfg, drop_rng, dtape);
    if (timings) timings->decode_ms += ms_since(t0);

    t0 = clock::now();
    Mat<S> logits = y * p.w_mle.transpose();
    Mat<S> dlogits;
    S ce = smoothed_cross_entropy<S>(logits, targets,
                                     static_cast<S>(cfg.label_smoothing),
                                     grads ? &dlogits : nullptr);
    out.mle_sum = static_cast<double>(ce);
    Mat<S> dy;
    if (grads) {
      dlogits *= mle_w;
      grads->w_mle.noalias() += dlogits.transpose() * y;
      dy.noalias() = dlogits * p.w_mle;
    }
    if (timings) timings->mle_head_ms += ms_since(t0);

    if (grads) {
      t0 = clock::now();
      decoder_backward(p, cfg, dtape, dy, *grads, dx);
      if (timings) timings->backward_ms += ms_since(t0);
    }
  }

  if (grads) {
    t0 = clock::now();
    encode_backward(p, cfg, etape, dx, *grads);
    if (timings) timings->backward_ms += ms_since(t0);
  }
  return out;
}

}  // namespace detail

template <typename S>
ModelParams<S> zeros_like(const ModelParams<S>& p) {
  ModelParams<S> z = p;
  for_each_param(z, [](const std::string&, Mat<S>& m) { m.setZero(); });
  return z;
}

// The interpolated objective (1-lambda) * MLE + lambda * CTC over one
// batch. MLE is a per-token mean over the batch, CTC a per-item mean over
// feasible items; infeasible items contribute MLE only and are counted.
// Gradients, when requested, accumulate into *grads (pre-zeroed by the
// caller or fresh from zeros_like).
template <typename S>
BatchLoss interpolated_loss(const std::vector<const Triplet*>& batch,
                            const ModelParams<S>& params,
                            const ModelConfig& cfg, CoarseMapper* mapper,
                            LabelSource source, const DropoutPlan* drop,
                            ModelParams<S>* grads, int threads = 1,
                            StepTimings* timings = nullptr) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const bool ctc_on = cfg.lambda > 0.0;
  const bool mle_on = cfg.lambda < 1.0;
  if (ctc_on && mapper == nullptr) {
    throw std::invalid_argument("lambda > 0 requires a coarse mapper");
  }
  if (ctc_on && mapper->label_size() != cfg.label_size) {
    throw std::invalid_argument("mapper L does not match config label_size");
  }

  const size_t n = batch.size();
  // Label mapping runs sequentially: the Random mapper owns mutable
  // PRNG state, and this keeps results independent of the thread count.
  std::vector<std::vector<int>> labels(n);
  std::vector<char> feasible(n, 0);
  BatchLoss out;
  for (size_t i = 0; i < n; ++i) {
    const Triplet& t = *batch[i];
    out.total_tokens += static_cast<std::int64_t>(t.translation_ids.size()) + 1;
    if (ctc_on) {
      const auto& src = source == LabelSource::Transcript ? t.transcript_ids
                                                          : t.translation_ids;
      labels[i] = mapper->map_sequence(src);
      Eigen::Index frames_out = (t.frames.rows() + cfg.k_concat - 1) / cfg.k_concat;
      feasible[i] = ctc_feasible(frames_out, labels[i]) ? 1 : 0;
      if (feasible[i]) {
        ++out.feasible_items;
      } else {
        ++out.skipped_infeasible;
      }
    }
  }

  const S mle_w = mle_on ? static_cast<S>((1.0 - cfg.lambda) /
                                          static_cast<double>(out.total_tokens))
                         : S(0);
  const S ctc_w = (ctc_on && out.feasible_items > 0)
                      ? static_cast<S>(cfg.lambda /
                                       static_cast<double>(out.feasible_items))
                      : S(0);

  std::vector<detail::ItemResult<S>> results(n);
  auto run_range = [&](size_t lo, size_t hi, ModelParams<S>* g,
                       StepTimings* tm) {
    for (size_t i = lo; i < hi; ++i) {
      results[i] = detail::process_item<S>(
          *batch[i], labels[i], ctc_on, mle_on, feasible[i] != 0, params, cfg,
          mle_w, ctc_w,
          drop ? derive_seed(drop->step_seed, static_cast<std::uint64_t>(i)) : 0,
          drop != nullptr, g, tm);
    }
  };

  int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    run_range(0, n, grads, timings);
  } else {
    // Chunked parallel map; chunk gradients are reduced in chunk order so
    // a fixed thread count reproduces bit-identical results.
    std::vector<ModelParams<S>> chunk_grads;
    if (grads) chunk_grads.assign(static_cast<size_t>(workers), zeros_like(params));
    std::vector<std::thread> pool;
    size_t per = (n + static_cast<size_t>(workers) - 1) / static_cast<size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      size_t lo = static_cast<size_t>(w) * per;
      size_t hi = std::min(n, lo + per);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi,
                        grads ? &chunk_grads[static_cast<size_t>(w)] : nullptr,
                        nullptr);
    }
    for (auto& th : pool) th.join();
    if (grads) {
      for (auto& cg : chunk_grads) {
        auto dst = param_ptrs(*grads);
        auto src = param_ptrs(cg);
        for (size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
      }
    }
  }

  double mle_sum = 0.0, ctc_sum = 0.0;
  for (const auto& r : results) {
    mle_sum += r.mle_sum;
    if (r.feasible) ctc_sum += r.ctc_nll;
  }
  if (mle_on) {
    out.mle = mle_sum / static_cast<double>(out.total_tokens);
    out.has_mle = true;
  }
  if (ctc_on && out.feasible_items > 0) {
    out.ctc = ctc_sum / static_cast<double>(out.feasible_items);
    out.has_ctc = true;
  }
  out.total = (out.has_mle ? (1.0 - cfg.lambda) * out.mle : 0.0) +
              (out.has_ctc ? cfg.lambda * out.ctc : 0.0);
  return out;
}

// ------------------------------------------------------------------ decode

enum class DecodeMode { Greedy, Beam };

namespace detail {

template <typename S>
RowVec<S> next_token_logp(const Mat<S>& x_enc, const std::vector<int>& prefix,
                          const ModelParams<S>& p, const ModelConfig& cfg) {
  DecTape<S> tape;
  Mat<S> y = decoder_forward(x_enc, prefix, p, cfg, nullptr, tape);
  Mat<S> logits = y.bottomRows(1) * p.w_mle.transpose();
  return log_softmax_rows(logits).row(0);
}

// Teacher-forced log-probability of ids followed by EOS.
template <typename S>
double sequence_logp(const Mat<S>& x_enc, const std::vector<int>& ids,
                     const ModelParams<S>& p, const ModelConfig& cfg) {
  std::vector<int> in_ids;
  in_ids.push_back(cfg.bos_id());
  in_ids.insert(in_ids.end(), ids.begin(), ids.end());
  DecTape<S> tape;
  Mat<S> y = decoder_forward(x_enc, in_ids, p, cfg, nullptr, tape);
  Mat<S> logp = log_softmax_rows<S>(y * p.w_mle.transpose());
  double sum = 0.0;
  for (size_t t = 0; t < ids.size(); ++t) {
    sum += static_cast<double>(logp(static_cast<Eigen::Index>(t), ids[t]));
  }
  sum += static_cast<double>(logp(logp.rows() - 1, cfg.eos_id()));
  return sum;
}

inline double length_norm(double logp, size_t generated) {
  return logp / static_cast<double>(generated + 1);  // +1 for EOS
}

template <typename S>
std::vector<int> greedy_decode_impl(const Mat<S>& x_enc,
                                    const ModelParams<S>& p,
                                    const ModelConfig& cfg) {
  std::vector<int> prefix{cfg.bos_id()};
  std::vector<int> ids;
  for (int step = 0; step < cfg.max_decode_len; ++step) {
    RowVec<S> lp = next_token_logp(x_enc, prefix, p, cfg);
    Eigen::Index best;
    lp.maxCoeff(&best);
    if (static_cast<int>(best) == cfg.eos_id()) break;
    ids.push_back(static_cast<int>(best));
    prefix.push_back(static_cast<int>(best));
  }
  return ids;
}

}  // namespace detail

// Autoregressive decoding from the translation softmax alone; the CTC
// prediction head plays no part here. Beam search uses length-normalized
// scores, and the greedy hypothesis is always among the scored
// candidates, so the returned score never falls below greedy's.
template <typename S>
std::vector<int> decode(const Eigen::MatrixXd& frames,
                        const ModelParams<S>& p, const ModelConfig& cfg,
                        DecodeMode mode) {
  Mat<S> x_enc = encode(frames, p, cfg);
  if (mode == DecodeMode::Greedy || cfg.beam_size == 1) {
    return detail::greedy_decode_impl(x_enc, p, cfg);
  }

  struct Hyp {
    std::vector<int> ids;
    double logp = 0.0;
  };
  std::vector<Hyp> live{{{}, 0.0}};
  std::vector<Hyp> finished;
  const int beam = cfg.beam_size;

  for (int step = 0; step < cfg.max_decode_len && !live.empty(); ++step) {
    std::vector<Hyp> candidates;
    for (const auto& hyp : live) {
      std::vector<int> prefix{cfg.bos_id()};
      prefix.insert(prefix.end(), hyp.ids.begin(), hyp.ids.end());
      RowVec<S> lp = detail::next_token_logp(x_enc, prefix, p, cfg);
      std::vector<int> order(static_cast<size_t>(lp.size()));
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::partial_sort(order.begin(),
                        order.begin() + std::min<size_t>(order.size(),
                                                         static_cast<size_t>(beam)),
                        order.end(), [&](int a, int b) { return lp(a) > lp(b); });
      for (int k = 0; k < beam && k < static_cast<int>(order.size()); ++k) {
        int tok = order[static_cast<size_t>(k)];
        double score = hyp.logp + static_cast<double>(lp(tok));
        if (tok == cfg.eos_id()) {
          finished.push_back({hyp.ids, score});
        } else {
          Hyp next{hyp.ids, score};
          next.ids.push_back(tok);
          candidates.push_back(std::move(next));
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
    if (candidates.size() > static_cast<size_t>(beam)) candidates.resize(static_cast<size_t>(beam));
    live = std::move(candidates);
  }
  // Length-capped leftovers are scored with EOS appended.
  for (const auto& hyp : live) {
    std::vector<int> prefix{cfg.bos_id()};
    prefix.insert(prefix.end(), hyp.ids.begin(), hyp.ids.end());
    RowVec<S> lp = detail::next_token_logp(x_enc, prefix, p, cfg);
    finished.push_back({hyp.ids, hyp.logp + static_cast<double>(lp(cfg.eos_id()))});
  }

  std::vector<int> greedy = detail::greedy_decode_impl(x_enc, p, cfg);
  finished.push_back({greedy, detail::sequence_logp(x_enc, greedy, p, cfg)});

  size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < finished.size(); ++i) {
    double score = detail::length_norm(finished[i].logp, finished[i].ids.size());
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return finished[best].ids;
}

// Length-normalized teacher-forced score of a hypothesis; the scorer used
// to rank beam candidates.
template <typename S>
double hypothesis_score(const Eigen::MatrixXd& frames, const std::vector<int>& ids,
                        const ModelParams<S>& p, const ModelConfig& cfg) {
  Mat<S> x_enc = encode(frames, p, cfg);
  return detail::length_norm(detail::sequence_logp(x_enc, ids, p, cfg), ids.size());
}

// Teacher-forced next-token accuracy over a dataset (EOS positions count).
template <typename S>
double token_accuracy(const std::vector<Triplet>& data,
                      const ModelParams<S>& p, const ModelConfig& cfg) {
  std::int64_t hits = 0, total = 0;
  for (const auto& item : data) {
    Mat<S> x_enc = encode(item.frames, p, cfg);
    std::vector<int> in_ids{cfg.bos_id()};
    in_ids.insert(in_ids.end(), item.translation_ids.begin(),
                  item.translation_ids.end());
    std::vector<int> targets = item.translation_ids;
    targets.push_back(cfg.eos_id());
    DecTape<S> tape;
    Mat<S> y = decoder_forward(x_enc, in_ids, p, cfg, nullptr, tape);
    Mat<S> logits = y * p.w_mle.transpose();
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      Eigen::Index best;
      logits.row(t).maxCoeff(&best);
      hits += best == targets[static_cast<size_t>(t)] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace colactc
