#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mcpsd/core.hpp"
#include "mcpsd/sampler.hpp"

namespace mcpsd {

// Lag-0 sample correlations of the delayed channels. raw holds one complex
// entry per measurement row (the data are real, so imaginary parts vanish);
// u is the stacked real form matching psiTilde: all real parts first, then
// the imaginary parts of the cross rows (identically zero for the EQUAL row,
// which is therefore dropped).
struct CorrelationVector {
  Eigen::VectorXd u;
  Eigen::VectorXcd raw;
};

inline CorrelationVector assembleU(const DelayedSampleSet& set,
                                   const PairOrdering& ordering) {
  const int M = set.M();
  if (M < 2) throw std::invalid_argument("assembleU: need at least 2 samples per channel");
  const int q = set.pattern.q();
  const int R = ordering.rows();
  if (R != q * (q - 1) / 2 + 1)
    throw std::invalid_argument("assembleU: ordering does not match channel count");

  Eigen::VectorXcd raw(R);
  double equal = 0.0;
  for (int a = 0; a < q; ++a) equal += set.channels.row(a).squaredNorm() / M;
  raw(0) = equal / q;
  for (int i = 1; i < R; ++i) {
    const auto [a, b] = ordering.pairs[i];
    raw(i) = set.channels.row(a).dot(set.channels.row(b)) / M;
  }

  Eigen::VectorXd u(2 * R - 1);
  u.head(R) = raw.real();
  u.tail(R - 1).setZero();
  return CorrelationVector{std::move(u), std::move(raw)};
}

enum class SolverMethod { LS, NNLS };

struct SolverReport {
  PsdEstimate estimate;
  SolverMethod method = SolverMethod::LS;
  double residualNorm = 0.0;
  int iterations = 0;     // NNLS only
  int activeSetSize = 0;  // NNLS only
};

struct RankDeficient : std::runtime_error {
  RankDeficient()
      : std::runtime_error("stacked measurement matrix is rank deficient; "
                           "least-squares recovery is not unique") {}
};

struct MaxIterationsExceeded : std::runtime_error {
  int iterations;
  explicit MaxIterationsExceeded(int iters)
      : std::runtime_error("NNLS active-set solver exceeded " +
                           std::to_string(iters) + " iterations"),
        iterations(iters) {}
};

namespace detail {

inline std::vector<double> toStdVector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

// Unconstrained least squares via SVD with an explicit rank check. May
// return negative entries; callers wanting non-negativity use solveNNLS.
inline SolverReport solveLS(const MeasurementSystem& system,
                            const CorrelationVector& corr, double rateHz = 1.0) {
  const Eigen::MatrixXd& A = system.psiTilde;
  if (corr.u.size() != A.rows())
    throw std::invalid_argument("solveLS: measurement size mismatch");
  const int L = system.subbands();

  // JacobiSVD, not BDCSVD: the stacked matrices have tightly clustered
  // singular values, which Eigen 3.4.0's divide-and-conquer kernel can
  // silently miscompute (U*S*V^T != A)
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  if (rank < L) throw RankDeficient();

  SolverReport rep;
  rep.method = SolverMethod::LS;
  if (corr.u.isZero(0.0)) {
    rep.estimate = PsdEstimate{std::vector<double>(L, 0.0), rateHz, L};
    return rep;
  }
  const Eigen::VectorXd x = svd.solve(corr.u);
  rep.residualNorm = (A * x - corr.u).norm();
  rep.estimate = PsdEstimate{detail::toStdVector(x), rateHz, L};
  return rep;
}

// Non-negative least squares by the Lawson-Hanson active-set method:
// repeatedly admit the variable with the largest positive gradient, solve
// the unconstrained subproblem on the passive set by QR, and step back to
// the feasible boundary when the subproblem leaves the positive orthant.
// Deterministic: gradient ties admit the lowest index.
inline SolverReport solveNNLS(const MeasurementSystem& system,
                              const CorrelationVector& corr, double rateHz = 1.0,
                              int maxIterations = 0) {
  const Eigen::MatrixXd& A = system.psiTilde;
  if (corr.u.size() != A.rows())
    throw std::invalid_argument("solveNNLS: measurement size mismatch");
  const int L = system.subbands();
  if (maxIterations <= 0) maxIterations = 10 * L;

  SolverReport rep;
  rep.method = SolverMethod::NNLS;
  if (corr.u.isZero(0.0)) {
    rep.estimate = PsdEstimate{std::vector<double>(L, 0.0), rateHz, L};
    return rep;
  }

  const Eigen::VectorXd& u = corr.u;
  const double dualTol = 1e-10 * (A.transpose() * u).lpNorm<Eigen::Infinity>();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(L);
  std::vector<char> passive(L, 0);
  std::vector<int> pidx;
  Eigen::VectorXd w = A.transpose() * u;
  int iters = 0;

  while (true) {
    int best = -1;
    double bestGrad = dualTol;
    for (int j = 0; j < L; ++j)
      if (!passive[j] && w(j) > bestGrad) {
        bestGrad = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[best] = 1;
    pidx.push_back(best);

    while (!pidx.empty()) {
      if (++iters > maxIterations) throw MaxIterationsExceeded(iters - 1);

      const int p = static_cast<int>(pidx.size());
      Eigen::MatrixXd Ap(A.rows(), p);
      for (int k = 0; k < p; ++k) Ap.col(k) = A.col(pidx[k]);
      const Eigen::VectorXd s = Ap.colPivHouseholderQr().solve(u);

      double smin = std::numeric_limits<double>::infinity();
      for (int k = 0; k < p; ++k) smin = std::min(smin, s(k));
      if (smin > 0.0) {
        for (int k = 0; k < p; ++k) x(pidx[k]) = s(k);
        break;
      }

      double alpha = 1.0;
      for (int k = 0; k < p; ++k)
        if (s(k) <= 0.0) {
          const double xj = x(pidx[k]);
          alpha = std::min(alpha, xj / (xj - s(k)));
        }
      alpha = std::max(alpha, 0.0);
      double xmax = 0.0;
      for (int k = 0; k < p; ++k) {
        const int j = pidx[k];
        x(j) += alpha * (s(k) - x(j));
        xmax = std::max(xmax, x(j));
      }
      const double clipTol = 1e-12 * xmax;
      std::vector<int> kept;
      kept.reserve(pidx.size());
      for (int j : pidx) {
        if (x(j) <= clipTol) {
          x(j) = 0.0;
          passive[j] = 0;
        } else {
          kept.push_back(j);
        }
      }
      pidx.swap(kept);
    }
    w = A.transpose() * (u - A * x);
  }

  rep.residualNorm = (A * x - u).norm();
  rep.iterations = iters;
  rep.activeSetSize = static_cast<int>(pidx.size());
  rep.estimate = PsdEstimate{detail::toStdVector(x), rateHz, L};
  return rep;
}

// Asymptotic variance of a lag-0 sample correlation computed from N samples
// of sequences with cross-correlation rSeq. rSeq is centered: odd length,
// lag 0 in the middle; lags beyond the data window are truncated.
inline double predictVariance(const std::vector<double>& rSeq, int N) {
  if (N < 1) throw std::invalid_argument("predictVariance: N must be >= 1");
  if (rSeq.empty() || rSeq.size() % 2 == 0)
    throw std::invalid_argument("predictVariance: rSeq must have odd length (centered at lag 0)");
  const int mmax = static_cast<int>(rSeq.size() - 1) / 2;
  const int lim = std::min(mmax, N - 1);
  double s = 0.0;
  for (int m = -lim; m <= lim; ++m) {
    const double r = rSeq[m + mmax];
    s += (1.0 - std::abs(m) / static_cast<double>(N)) * r * r;
  }
  return 2.0 / N * s;
}

// Expected value of the lag-0 cross-correlation of two filtered channels
// after N-sample averaging; the triangular factor is the finite-sample
// window of the correlation estimator.
template <typename F>
inline double predictBias(F&& trueCrossCorr, const std::vector<double>& tapsA,
                          const std::vector<double>& tapsB, int N) {
  if (N < 1) throw std::invalid_argument("predictBias: N must be >= 1");
  if (tapsA.empty() || tapsB.empty())
    throw std::invalid_argument("predictBias: empty filter taps");
  double s = 0.0;
  for (std::size_t m = 0; m < tapsA.size(); ++m) {
    for (std::size_t l = 0; l < tapsB.size(); ++l) {
      const double tri =
          1.0 - std::abs(static_cast<double>(m) - static_cast<double>(l)) / N;
      if (tri <= 0.0) continue;
      const long lag = static_cast<long>(l) - static_cast<long>(m);
      s += tapsA[m] * tapsB[l] * trueCrossCorr(lag) * tri;
    }
  }
  return s;
}

}  // namespace mcpsd
