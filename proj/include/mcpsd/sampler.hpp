#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpsd/convolve.hpp"
#include "mcpsd/core.hpp"
#include "mcpsd/synth.hpp"

namespace mcpsd {

// Channel matrix of raw coset samples: channels(i, n) = x[n*L + c_i].
struct CosetSampleSet {
  SamplingPattern pattern;
  int N = 0;
  Eigen::MatrixXd channels;
  double rateHz = 1.0;
};

// Channels after fractional-delay filtering, trimmed by `guard` samples on
// both ends so every channel covers the same interior sample indices.
struct DelayedSampleSet {
  SamplingPattern pattern;
  int guard = 0;
  Eigen::MatrixXd channels;
  double rateHz = 1.0;

  int M() const { return static_cast<int>(channels.cols()); }
};

struct InsufficientSignal : std::runtime_error {
  std::size_t requiredLength;
  explicit InsufficientSignal(std::size_t required)
      : std::runtime_error("signal too short: coset extraction needs " +
                           std::to_string(required) + " samples"),
        requiredLength(required) {}
};

inline CosetSampleSet cosetSample(const NyquistSignal& signal,
                                  const SamplingPattern& pattern, int N) {
  if (N < 1) throw std::invalid_argument("cosetSample: N must be >= 1");
  const int L = pattern.L;
  const int q = pattern.q();
  const std::size_t required = static_cast<std::size_t>(N - 1) * L +
                               pattern.offsets.back() + 1;
  if (signal.samples.size() < required) throw InsufficientSignal(required);

  Eigen::MatrixXd y(q, N);
  for (int i = 0; i < q; ++i) {
    const int c = pattern.offsets[i];
    for (int n = 0; n < N; ++n)
      y(i, n) = signal.samples[static_cast<std::size_t>(n) * L + c];
  }
  return CosetSampleSet{pattern, N, std::move(y), signal.rateHz};
}

// Hann-windowed sinc approximating a delay of `delta` sample periods,
// support k in [-K, K].
inline std::vector<double> fractionalDelayTaps(double delta, int K) {
  if (K < 1) throw std::invalid_argument("fractionalDelayTaps: K must be >= 1");
  std::vector<double> h(2 * K + 1);
  for (int k = -K; k <= K; ++k) {
    const double x = k - delta;
    const double px = std::numbers::pi * x;
    const double s = x == 0.0 ? 1.0 : std::sin(px) / px;
    const double w =
        std::abs(x) < K + 1 ? 0.5 * (1.0 + std::cos(std::numbers::pi * x / (K + 1)))
                            : 0.0;
    h[k + K] = s * w;
  }
  return h;
}

// Delays channel i by c_i/L channel periods (the c_i/W-second coset offset
// expressed at the channel rate), then trims K samples from both ends of
// every channel so the remaining interior is free of filter edge effects.
inline DelayedSampleSet fractionalDelay(const CosetSampleSet& set, int K = 64) {
  const int N = set.N;
  const int M = N - 2 * K;
  if (M < 1)
    throw std::invalid_argument("fractionalDelay: N too short for trimming (need N > 2K)");
  const int q = set.pattern.q();
  const int L = set.pattern.L;

  Eigen::MatrixXd z(q, M);
  std::vector<double> row(N);
  for (int i = 0; i < q; ++i) {
    const int c = set.pattern.offsets[i];
    if (c == 0) {
      z.row(i) = set.channels.row(i).segment(K, M);
      continue;
    }
    for (int n = 0; n < N; ++n) row[n] = set.channels(i, n);
    const std::vector<double> filtered =
        convolveValid(row, fractionalDelayTaps(static_cast<double>(c) / L, K));
    for (int n = 0; n < M; ++n) z(i, n) = filtered[n];
  }
  return DelayedSampleSet{set.pattern, K, std::move(z), set.rateHz};
}

}  // namespace mcpsd
