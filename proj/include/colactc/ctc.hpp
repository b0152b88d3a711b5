#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "colactc/linalg.hpp"

namespace colactc {

// T x C per-frame log-probabilities over L coarse labels plus blank.
// Blank is the last class, index C-1 == L.
template <typename S>
struct LogProbLattice {
  Mat<S> logp;  // rows t = frames, cols c = classes

  Eigen::Index frames() const { return logp.rows(); }
  Eigen::Index classes() const { return logp.cols(); }
  Eigen::Index blank() const { return logp.cols() - 1; }
};

template <typename S>
struct CtcLoss {
  S nll = S(0);
  bool feasible = true;
};

// Merge consecutive duplicates, then drop blanks.
inline std::vector<int> collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int a : path) {
    if (a != prev && a != blank) out.push_back(a);
    prev = a;
  }
  return out;
}

// A label sequence fits in T frames iff T >= |z| + (# adjacent equal pairs).
inline bool ctc_feasible(Eigen::Index frames, const std::vector<int>& labels) {
  Eigen::Index need = static_cast<Eigen::Index>(labels.size());
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++need;
  }
  return frames >= need;
}

namespace detail {

// Blank-interleaved extended sequence: blank z0 blank z1 ... blank.
inline std::vector<int> extend_labels(const std::vector<int>& z, int blank) {
  std::vector<int> ext(2 * z.size() + 1, blank);
  for (size_t i = 0; i < z.size(); ++i) ext[2 * i + 1] = z[i];
  return ext;
}

template <typename S>
void check_lattice(const LogProbLattice<S>& lat, const std::vector<int>& z) {
  if (lat.frames() < 1 || lat.classes() < 2) {
    throw std::invalid_argument("lattice must have T >= 1 frames and C >= 2 classes");
  }
  for (int c : z) {
    if (c < 0 || c >= static_cast<int>(lat.blank())) {
      throw std::out_of_range("label id " + std::to_string(c) +
                              " out of range [0," + std::to_string(lat.blank()) + ")");
    }
  }
}

// Forward pass over the extended sequence. alpha(t, s) includes the
// emission at frame t. Returns the total log-likelihood.
template <typename S>
S ctc_forward(const LogProbLattice<S>& lat, const std::vector<int>& ext,
              Mat<S>* alpha_out) {
  const Eigen::Index T = lat.frames();
  const Eigen::Index n = static_cast<Eigen::Index>(ext.size());
  Mat<S> alpha = Mat<S>::Constant(T, n, kLogZero<S>);
  alpha(0, 0) = lat.logp(0, ext[0]);
  if (n > 1) alpha(0, 1) = lat.logp(0, ext[1]);
  const int blank = static_cast<int>(lat.blank());
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < n; ++s) {
      S a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]) {
        a = log_add(a, alpha(t - 1, s - 2));
      }
      alpha(t, s) = a + lat.logp(t, ext[s]);
    }
  }
  S total = alpha(T - 1, n - 1);
  if (n > 1) total = log_add(total, alpha(T - 1, n - 2));
  if (alpha_out) *alpha_out = std::move(alpha);
  return total;
}

}  // namespace detail

// Negative log marginal likelihood of label sequence z under the lattice,
// summing over all alignment paths that collapse to z. Infeasible pairs
// report +inf with the flag cleared; training decides whether to skip.
template <typename S>
CtcLoss<S> ctc_neg_log_likelihood(const LogProbLattice<S>& lat,
                                  const std::vector<int>& z) {
  detail::check_lattice(lat, z);
  if (!ctc_feasible(lat.frames(), z)) {
    return {std::numeric_limits<S>::infinity(), false};
  }
  auto ext = detail::extend_labels(z, static_cast<int>(lat.blank()));
  S total = detail::ctc_forward(lat, ext, static_cast<Mat<S>*>(nullptr));
  if (total <= kLogZero<S> / 2) {
    return {std::numeric_limits<S>::infinity(), true};
  }
  return {-total, true};
}

// Gradient of the negative log likelihood with respect to each logp
// entry, via forward-backward posterior occupancy:
//   d(-log P)/d logp(t,c) = -sum_{s: ext[s]=c} exp(alpha(t,s)+beta(t,s)-log P).
// The loss is returned alongside since both passes are needed anyway.
template <typename S>
S ctc_grad(const LogProbLattice<S>& lat, const std::vector<int>& z,
           Mat<S>& grad) {
  detail::check_lattice(lat, z);
  if (!ctc_feasible(lat.frames(), z)) {
    throw std::invalid_argument("infeasible (lattice too short for labels)");
  }
  const Eigen::Index T = lat.frames();
  const int blank = static_cast<int>(lat.blank());
  auto ext = detail::extend_labels(z, blank);
  const Eigen::Index n = static_cast<Eigen::Index>(ext.size());

  Mat<S> alpha;
  S total = detail::ctc_forward(lat, ext, &alpha);
  if (total <= kLogZero<S> / 2) {
    throw std::invalid_argument("all alignment paths have zero probability");
  }

  // beta(t, s) excludes the emission at frame t.
  Mat<S> beta = Mat<S>::Constant(T, n, kLogZero<S>);
  beta(T - 1, n - 1) = S(0);
  if (n > 1) beta(T - 1, n - 2) = S(0);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < n; ++s) {
      S b = beta(t + 1, s) + lat.logp(t + 1, ext[s]);
      if (s + 1 < n) {
        b = log_add(b, beta(t + 1, s + 1) + lat.logp(t + 1, ext[s + 1]));
      }
      if (s + 2 < n && ext[s + 2] != blank && ext[s + 2] != ext[s]) {
        b = log_add(b, beta(t + 1, s + 2) + lat.logp(t + 1, ext[s + 2]));
      }
      beta(t, s) = b;
    }
  }

  grad = Mat<S>::Zero(T, lat.classes());
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index s = 0; s < n; ++s) {
      S occ = alpha(t, s) + beta(t, s) - total;
      if (occ > kLogZero<S> / 2) {
        grad(t, ext[s]) -= std::exp(occ);
      }
    }
  }
  return -total;
}

// Exact enumeration over all C^T alignment paths; the oracle the DP is
// tested against. Guarded to C^T <= 10^6.
template <typename S>
S brute_force_nll(const LogProbLattice<S>& lat, const std::vector<int>& z) {
  detail::check_lattice(lat, z);
  const Eigen::Index T = lat.frames();
  const Eigen::Index C = lat.classes();
  double paths = std::pow(static_cast<double>(C), static_cast<double>(T));
  if (paths > 1e6) {
    throw std::invalid_argument("brute force guard exceeded: C^T > 1e6");
  }
  const int blank = static_cast<int>(lat.blank());
  std::vector<int> path(static_cast<size_t>(T), 0);
  S total = kLogZero<S>;
  for (;;) {
    if (collapse(path, blank) == z) {
      S lp = S(0);
      for (Eigen::Index t = 0; t < T; ++t) lp += lat.logp(t, path[static_cast<size_t>(t)]);
      total = log_add(total, lp);
    }
    // odometer increment
    Eigen::Index i = 0;
    while (i < T) {
      if (++path[static_cast<size_t>(i)] < C) break;
      path[static_cast<size_t>(i)] = 0;
      ++i;
    }
    if (i == T) break;
  }
  if (total <= kLogZero<S> / 2) return std::numeric_limits<S>::infinity();
  return -total;
}

// Per-frame argmax followed by collapse. Diagnostic only.
template <typename S>
std::vector<int> greedy_ctc_decode(const LogProbLattice<S>& lat) {
  std::vector<int> path(static_cast<size_t>(lat.frames()));
  for (Eigen::Index t = 0; t < lat.frames(); ++t) {
    Eigen::Index c;
    lat.logp.row(t).maxCoeff(&c);
    path[static_cast<size_t>(t)] = static_cast<int>(c);
  }
  return collapse(path, static_cast<int>(lat.blank()));
}

}  // namespace colactc
