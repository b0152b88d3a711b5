#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

namespace colactc {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// Log-zero sentinel. A large negative value instead of -inf keeps
// log-space arithmetic total: sums of sentinels stay representable and
// exp of them underflows cleanly to 0.
template <typename S>
inline constexpr S kLogZero = S(-1e30);

template <typename S>
inline S log_add(S a, S b) {
  if (a < b) std::swap(a, b);
  if (a <= kLogZero<S> / 2) return kLogZero<S>;
  return a + std::log1p(std::exp(b - a));
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  S m = v.maxCoeff();
  if (m <= kLogZero<S> / 2) return kLogZero<S>;
  return m + std::log((v.array() - m).exp().sum());
}

// Row-wise log-softmax.
template <typename S>
Mat<S> log_softmax_rows(const Mat<S>& logits) {
  Mat<S> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    S m = logits.row(i).maxCoeff();
    S lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

template <typename S>
Mat<S> softmax_rows(const Mat<S>& logits) {
  Mat<S> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    S m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

// Cosine similarity of two vectors, guarded against zero norms.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& a,
                                 const Eigen::MatrixBase<DerivedB>& b) {
  using S = typename DerivedA::Scalar;
  S na = a.norm();
  S nb = b.norm();
  if (na <= S(0) || nb <= S(0)) return S(0);
  return a.dot(b) / (na * nb);
}

}  // namespace colactc
