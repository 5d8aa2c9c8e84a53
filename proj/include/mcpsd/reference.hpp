#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mcpsd/core.hpp"
#include "mcpsd/synth.hpp"

namespace mcpsd {

// Nyquist-rate Welch estimate at subband resolution: non-overlapping
// rectangular segments of length exactly L, so DFT bins map one-to-one onto
// the subbands and the output is directly comparable to a PsdEstimate.
inline PsdEstimate welchSubbands(const NyquistSignal& signal, int L) {
  if (L < 2 || L % 2 != 0)
    throw std::invalid_argument("welchSubbands: L must be an even integer >= 2");
  const std::size_t nseg = signal.samples.size() / static_cast<std::size_t>(L);
  if (nseg < 2)
    throw std::invalid_argument("welchSubbands: signal too short (need >= 2*L samples)");

  Eigen::FFT<double> fft;
  std::vector<double> seg(L);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> binPower(L, 0.0);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double* base = signal.samples.data() + s * L;
    std::copy(base, base + L, seg.begin());
    fft.fwd(spectrum, seg);
    for (int k = 0; k < L; ++k) binPower[k] += std::norm(spectrum[k]);
  }
  const double scale = 1.0 / (static_cast<double>(nseg) * L * L);

  std::vector<double> values(L);
  for (int l = 0; l < L; ++l) {
    const int m = subbandIndex(l, L);
    values[l] = binPower[((m % L) + L) % L] * scale;
  }
  return PsdEstimate{std::move(values), signal.rateHz, L};
}

struct ErrorMetrics {
  double normalizedSquaredError = 0.0;  // ||est - ref||^2 / ||ref||^2
  double maxAbsError = 0.0;
  double totalPowerError = 0.0;  // |sum(est) - sum(ref)| / |sum(ref)|
};

inline ErrorMetrics metrics(const PsdEstimate& estimate, const PsdEstimate& reference) {
  if (estimate.values.size() != reference.values.size())
    throw std::invalid_argument("metrics: estimate/reference length mismatch");
  double err2 = 0.0, ref2 = 0.0, maxAbs = 0.0, sumEst = 0.0, sumRef = 0.0;
  for (std::size_t i = 0; i < estimate.values.size(); ++i) {
    const double d = estimate.values[i] - reference.values[i];
    err2 += d * d;
    ref2 += reference.values[i] * reference.values[i];
    maxAbs = std::max(maxAbs, std::abs(d));
    sumEst += estimate.values[i];
    sumRef += reference.values[i];
  }
  ErrorMetrics m;
  m.maxAbsError = maxAbs;
  if (ref2 > 0.0)
    m.normalizedSquaredError = err2 / ref2;
  else
    m.normalizedSquaredError = err2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  if (sumRef != 0.0)
    m.totalPowerError = std::abs(sumEst - sumRef) / std::abs(sumRef);
  else
    m.totalPowerError = sumEst != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return m;
}

}  // namespace mcpsd
