#pragma once

#include <stdexcept>
#include <vector>

#include "colactc/linalg.hpp"
#include "colactc/prng.hpp"

// Building blocks for the encoder-decoder. Each primitive is a pair of
// free functions: a forward that fills a cache and a backward that
// consumes it, accumulating into parameter gradients (+=) and returning
// or accumulating input gradients. All reverse-mode derivatives here are
// hand-derived; the finite-difference suites are the contract.
namespace colactc {

template <typename S>
inline constexpr S kAttnMask = S(-1e9);

// ---------------------------------------------------------------- layernorm

template <typename S>
struct LayerNormParams {
  Mat<S> g;  // 1 x d
  Mat<S> b;  // 1 x d
};

template <typename S>
struct LayerNormCache {
  Mat<S> xhat;       // N x d, normalized input
  Vec<S> inv_sigma;  // N
};

template <typename S>
Mat<S> layer_norm(const LayerNormParams<S>& p, const Mat<S>& x,
                  LayerNormCache<S>& cache) {
  const S eps = S(1e-5);
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_sigma.resize(n);
  Mat<S> y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    S mu = x.row(i).mean();
    S var = (x.row(i).array() - mu).square().mean();
    S inv = S(1) / std::sqrt(var + eps);
    cache.inv_sigma(i) = inv;
    cache.xhat.row(i) = (x.row(i).array() - mu) * inv;
    y.row(i) = cache.xhat.row(i).cwiseProduct(p.g.row(0)) + p.b.row(0);
  }
  return y;
}

template <typename S>
Mat<S> layer_norm_backward(const LayerNormParams<S>& p,
                           const LayerNormCache<S>& cache, const Mat<S>& dy,
                           LayerNormParams<S>& grads) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  grads.g.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  grads.b.row(0) += dy.colwise().sum();
  Mat<S> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVec<S> dxhat = dy.row(i).cwiseProduct(p.g.row(0));
    S m1 = dxhat.mean();
    S m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) = cache.inv_sigma(i) *
                (dxhat.array() - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

// ----------------------------------------------------------------- dropout

// Inverted dropout; an empty mask means the op was a no-op (eval mode or
// rate zero) and backward passes gradients through unchanged.
template <typename S>
struct DropoutCache {
  Mat<S> mask;
};

template <typename S>
void dropout_inplace(Mat<S>& x, S rate, SplitMix64* rng,
                     DropoutCache<S>& cache) {
  if (rng == nullptr || rate <= S(0)) {
    cache.mask.resize(0, 0);
    return;
  }
  const S keep_scale = S(1) / (S(1) - rate);
  cache.mask.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      cache.mask(i, j) = rng->real() < static_cast<double>(rate) ? S(0) : keep_scale;
    }
  }
  x = x.cwiseProduct(cache.mask);
}

template <typename S>
void dropout_backward_inplace(Mat<S>& dy, const DropoutCache<S>& cache) {
  if (cache.mask.size() != 0) dy = dy.cwiseProduct(cache.mask);
}

// --------------------------------------------------------------- attention

template <typename S>
struct AttnParams {
  Mat<S> wq, wk, wv, wo;  // each d x d
};

template <typename S>
struct AttnCache {
  Mat<S> xq, xkv;          // inputs
  Mat<S> q, k, v, o;       // projections and concatenated head outputs
  std::vector<Mat<S>> p;   // per-head attention weights, Nq x Nk
  bool causal = false;
};

// Multi-head scaled dot-product attention, no projection biases. With
// causal=true position i attends keys j <= i (requires Nq == Nk).
template <typename S>
Mat<S> attention(const AttnParams<S>& par, const Mat<S>& xq, const Mat<S>& xkv,
                 int heads, bool causal, AttnCache<S>& cache) {
  const Eigen::Index d = par.wq.cols();
  if (d % heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
  const Eigen::Index dk = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));

  cache.xq = xq;
  cache.xkv = xkv;
  cache.causal = causal;
  cache.q.noalias() = xq * par.wq;
  cache.k.noalias() = xkv * par.wk;
  cache.v.noalias() = xkv * par.wv;
  cache.p.assign(static_cast<size_t>(heads), Mat<S>());
  cache.o.resize(xq.rows(), d);

  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dk, dk);
    auto kh = cache.k.middleCols(h * dk, dk);
    auto vh = cache.v.middleCols(h * dk, dk);
    Mat<S> scores = qh * kh.transpose() * scale;
    if (causal) {
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < scores.cols(); ++j) {
          scores(i, j) = kAttnMask<S>;
        }
      }
    }
    Mat<S>& probs = cache.p[static_cast<size_t>(h)];
    probs = softmax_rows(scores);
    cache.o.middleCols(h * dk, dk).noalias() = probs * vh;
  }
  return cache.o * par.wo;
}

// Accumulates dXq and dXkv separately; for self-attention the caller adds
// them into the same tensor.
template <typename S>
void attention_backward(const AttnParams<S>& par, const AttnCache<S>& cache,
                        const Mat<S>& dy, AttnParams<S>& grads, Mat<S>& dxq,
                        Mat<S>& dxkv) {
  const int heads = static_cast<int>(cache.p.size());
  const Eigen::Index d = par.wq.cols();
  const Eigen::Index dk = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dk));

  grads.wo.noalias() += cache.o.transpose() * dy;
  Mat<S> do_ = dy * par.wo.transpose();

  Mat<S> dq(cache.q.rows(), d), dkm(cache.k.rows(), d), dv(cache.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    auto qh = cache.q.middleCols(h * dk, dk);
    auto kh = cache.k.middleCols(h * dk, dk);
    auto vh = cache.v.middleCols(h * dk, dk);
    const Mat<S>& probs = cache.p[static_cast<size_t>(h)];
    auto doh = do_.middleCols(h * dk, dk);

    Mat<S> dprobs = doh * vh.transpose();
    dv.middleCols(h * dk, dk).noalias() = probs.transpose() * doh;

    // softmax backward per row; masked entries carry p == 0 so they
    // contribute nothing.
    Mat<S> dscores(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      S inner = dprobs.row(i).dot(probs.row(i));
      dscores.row(i) =
          probs.row(i).cwiseProduct((dprobs.row(i).array() - inner).matrix());
    }
    dscores *= scale;

    dq.middleCols(h * dk, dk).noalias() = dscores * kh;
    dkm.middleCols(h * dk, dk).noalias() = dscores.transpose() * qh;
  }

  grads.wq.noalias() += cache.xq.transpose() * dq;
  grads.wk.noalias() += cache.xkv.transpose() * dkm;
  grads.wv.noalias() += cache.xkv.transpose() * dv;
  dxq.noalias() += dq * par.wq.transpose();
  dxkv.noalias() += dkm * par.wk.transpose();
  dxkv.noalias() += dv * par.wv.transpose();
}

// -------------------------------------------------------------------- ffn

template <typename S>
struct FfnParams {
  Mat<S> w1;  // d x dff
  Mat<S> b1;  // 1 x dff
  Mat<S> w2;  // dff x d
  Mat<S> b2;  // 1 x d
};

template <typename S>
struct FfnCache {
  Mat<S> x;  // input
  Mat<S> h;  // post-ReLU (and post-dropout) hidden
  DropoutCache<S> hdrop;
};

template <typename S>
Mat<S> ffn(const FfnParams<S>& p, const Mat<S>& x, S drop_rate,
           SplitMix64* rng, FfnCache<S>& cache) {
  cache.x = x;
  cache.h.noalias() = x * p.w1;
  cache.h.rowwise() += p.b1.row(0);
  cache.h = cache.h.cwiseMax(S(0));
  dropout_inplace(cache.h, drop_rate, rng, cache.hdrop);
  Mat<S> y = cache.h * p.w2;
  y.rowwise() += p.b2.row(0);
  return y;
}

template <typename S>
Mat<S> ffn_backward(const FfnParams<S>& p, const FfnCache<S>& cache,
                    const Mat<S>& dy, FfnParams<S>& grads) {
  grads.w2.noalias() += cache.h.transpose() * dy;
  grads.b2.row(0) += dy.colwise().sum();
  Mat<S> dh = dy * p.w2.transpose();
  dropout_backward_inplace(dh, cache.hdrop);
  // ReLU gate: h > 0 iff the pre-activation was positive (dropout zeros
  // stay zero either way).
  dh = (cache.h.array() > S(0)).template cast<S>().matrix().cwiseProduct(dh);
  grads.w1.noalias() += cache.x.transpose() * dh;
  grads.b1.row(0) += dh.colwise().sum();
  return dh * p.w1.transpose();
}

// ------------------------------------------------------------- positions

// Sinusoidal positional encoding, interleaved sin/cos.
template <typename S>
Mat<S> positional_encoding(Eigen::Index n, Eigen::Index d) {
  Mat<S> pe(n, d);
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    for (Eigen::Index i = 0; i < d; i += 2) {
      double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                             static_cast<double>(d));
      pe(pos, i) = static_cast<S>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < d) {
        pe(pos, i + 1) = static_cast<S>(std::cos(static_cast<double>(pos) * freq));
      }
    }
  }
  return pe;
}

// ------------------------------------------------- smoothed cross entropy

// Sum (not mean) of label-smoothed cross entropy over positions, with the
// gradient w.r.t. logits for that sum. The smoothed target puts 1-eps on
// the gold class and eps/V everywhere.
template <typename S>
S smoothed_cross_entropy(const Mat<S>& logits, const std::vector<int>& targets,
                         S smoothing, Mat<S>* dlogits) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index v = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != n) {
    throw std::invalid_argument("targets length must match logits rows");
  }
  for (int t : targets) {
    if (t < 0 || t >= static_cast<int>(v)) {
      throw std::out_of_range("target id " + std::to_string(t) +
                              " outside [0," + std::to_string(v) + ")");
    }
  }
  Mat<S> logp = log_softmax_rows(logits);
  const S uniform = smoothing / static_cast<S>(v);
  S loss = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss -= (S(1) - smoothing) * logp(i, targets[static_cast<size_t>(i)]);
    loss -= uniform * logp.row(i).sum();
  }
  if (dlogits) {
    *dlogits = logp.array().exp().matrix();  // softmax probabilities
    dlogits->array() -= uniform;
    for (Eigen::Index i = 0; i < n; ++i) {
      (*dlogits)(i, targets[static_cast<size_t>(i)]) -= S(1) - smoothing;
    }
  }
  return loss;
}

}  // namespace colactc
