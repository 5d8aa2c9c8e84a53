#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mcpsd/convolve.hpp"
#include "mcpsd/core.hpp"
#include "mcpsd/rng.hpp"

namespace mcpsd {

enum class ProcessKind { White, MaWithLines, SparseMultiband, Notched };

// Sinusoidal component: amplitude and normalized radian frequency in (0, pi).
struct SpectralLine {
  double amplitude = 0.0;
  double omega = 0.0;
};

// Frequency band in Hz; edges (center +- width/2) must lie within [0, W/2].
struct BandHz {
  double centerHz = 0.0;
  double widthHz = 0.0;
};

struct ProcessSpec {
  ProcessKind kind = ProcessKind::White;
  double variance = 1.0;           // White, and the MA/Notched driving noise
  std::vector<double> maCoeffs;    // MaWithLines
  std::vector<SpectralLine> lines;
  double rateHz = 1.0;             // two-sided bandwidth W of the Nyquist grid
  std::vector<BandHz> bands;       // active bands (sparse) or stop bands
  int synthesisTaps = 513;         // FIR length of the shaping filters (odd)
};

inline void validateProcess(const ProcessSpec& spec) {
  if (spec.rateHz <= 0.0)
    throw std::invalid_argument("process: rateHz must be positive");
  switch (spec.kind) {
    case ProcessKind::White:
      if (spec.variance <= 0.0)
        throw std::invalid_argument("process: variance must be positive");
      break;
    case ProcessKind::MaWithLines:
      if (spec.maCoeffs.empty())
        throw std::invalid_argument("process: MA coefficients required");
      if (spec.variance <= 0.0)
        throw std::invalid_argument("process: variance must be positive");
      for (const auto& ln : spec.lines) {
        if (ln.amplitude < 0.0)
          throw std::invalid_argument("process: line amplitude must be >= 0");
        if (!(ln.omega > 0.0 && ln.omega < std::numbers::pi))
          throw std::invalid_argument("process: line frequency must lie in (0, pi)");
      }
      break;
    case ProcessKind::SparseMultiband:
    case ProcessKind::Notched:
      if (spec.bands.empty())
        throw std::invalid_argument("process: at least one band required");
      if (spec.synthesisTaps < 513 || spec.synthesisTaps % 2 == 0)
        throw std::invalid_argument("process: synthesisTaps must be odd and >= 513");
      for (const auto& b : spec.bands) {
        if (b.widthHz <= 0.0)
          throw std::invalid_argument("process: band width must be positive");
        const double lo = b.centerHz - b.widthHz / 2.0;
        const double hi = b.centerHz + b.widthHz / 2.0;
        if (lo < 0.0 || hi > spec.rateHz / 2.0)
          throw std::invalid_argument("process: band edges must lie within [0, W/2]");
      }
      break;
  }
}

inline ProcessSpec whiteProcess(double variance, double rateHz = 1.0) {
  ProcessSpec s;
  s.kind = ProcessKind::White;
  s.variance = variance;
  s.rateHz = rateHz;
  validateProcess(s);
  return s;
}

inline ProcessSpec maProcessWithLines(std::vector<double> coeffs,
                                      std::vector<SpectralLine> lines,
                                      double variance = 1.0,
                                      double rateHz = 1.0) {
  ProcessSpec s;
  s.kind = ProcessKind::MaWithLines;
  s.maCoeffs = std::move(coeffs);
  s.lines = std::move(lines);
  s.variance = variance;
  s.rateHz = rateHz;
  validateProcess(s);
  return s;
}

inline ProcessSpec sparseMultibandProcess(double rateHz, std::vector<BandHz> bands,
                                          int taps = 513) {
  ProcessSpec s;
  s.kind = ProcessKind::SparseMultiband;
  s.rateHz = rateHz;
  s.bands = std::move(bands);
  s.synthesisTaps = taps;
  validateProcess(s);
  return s;
}

inline ProcessSpec notchedProcess(double rateHz, std::vector<BandHz> stopBands,
                                  int taps = 2049) {
  ProcessSpec s;
  s.kind = ProcessKind::Notched;
  s.rateHz = rateHz;
  s.bands = std::move(stopBands);
  s.synthesisTaps = taps;
  validateProcess(s);
  return s;
}

struct NyquistSignal {
  std::vector<double> samples;
  double rateHz = 1.0;
};

// Linear-phase Hamming-windowed sinc bandpass with unit passband gain over
// the angular band (loRad, hiRad), 0 <= loRad < hiRad <= pi, odd tap count.
inline std::vector<double> bandpassFir(double loRad, double hiRad, int taps) {
  if (taps < 3 || taps % 2 == 0)
    throw std::invalid_argument("bandpassFir: taps must be odd and >= 3");
  if (!(loRad >= 0.0 && loRad < hiRad && hiRad <= std::numbers::pi))
    throw std::invalid_argument("bandpassFir: need 0 <= lo < hi <= pi");
  const int M = (taps - 1) / 2;
  std::vector<double> h(taps);
  auto sinc = [](double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; };
  for (int k = -M; k <= M; ++k) {
    const double ideal =
        (hiRad * sinc(hiRad * k) - loRad * sinc(loRad * k)) / std::numbers::pi;
    const double window = 0.54 + 0.46 * std::cos(std::numbers::pi * k / M);
    h[k + M] = ideal * window;
  }
  return h;
}

inline std::vector<double> bandstopFir(double loRad, double hiRad, int taps) {
  std::vector<double> h = bandpassFir(loRad, hiRad, taps);
  for (double& v : h) v = -v;
  h[(taps - 1) / 2] += 1.0;
  return h;
}

// Zero-mean WSS realization on the Nyquist grid, deterministic given seed.
// Shaping filters consume (taps - 1) extra driving samples so every output
// sample is past the filter transient.
inline NyquistSignal generate(const ProcessSpec& spec, std::size_t length,
                              std::uint64_t seed) {
  validateProcess(spec);
  if (length < 1) throw std::invalid_argument("generate: length must be >= 1");
  const double sigma = std::sqrt(spec.variance);
  std::vector<double> out;

  switch (spec.kind) {
    case ProcessKind::White: {
      Rng rng = Rng::substream(seed, 0);
      out.resize(length);
      for (auto& v : out) v = sigma * rng.normal();
      break;
    }
    case ProcessKind::MaWithLines: {
      Rng rng = Rng::substream(seed, 0);
      std::vector<double> noise(length + spec.maCoeffs.size() - 1);
      for (auto& v : noise) v = sigma * rng.normal();
      out = convolveValid(noise, spec.maCoeffs);
      Rng phaseRng = Rng::substream(seed, 1);
      for (const auto& ln : spec.lines) {
        const double phi = 2.0 * std::numbers::pi * phaseRng.uniform01();
        for (std::size_t n = 0; n < length; ++n)
          out[n] += ln.amplitude * std::cos(ln.omega * n + phi);
      }
      break;
    }
    case ProcessKind::SparseMultiband: {
      out.assign(length, 0.0);
      std::vector<double> noise(length + spec.synthesisTaps - 1);
      for (std::size_t b = 0; b < spec.bands.size(); ++b) {
        const auto& band = spec.bands[b];
        const double lo =
            2.0 * std::numbers::pi * (band.centerHz - band.widthHz / 2.0) / spec.rateHz;
        const double hi =
            2.0 * std::numbers::pi * (band.centerHz + band.widthHz / 2.0) / spec.rateHz;
        Rng rng = Rng::substream(seed, b);
        for (auto& v : noise) v = rng.normal();
        const std::vector<double> shaped =
            convolveValid(noise, bandpassFir(lo, hi, spec.synthesisTaps));
        for (std::size_t n = 0; n < length; ++n) out[n] += shaped[n];
      }
      break;
    }
    case ProcessKind::Notched: {
      Rng rng = Rng::substream(seed, 0);
      std::vector<double> x(length + spec.bands.size() * (spec.synthesisTaps - 1));
      for (auto& v : x) v = sigma * rng.normal();
      for (const auto& band : spec.bands) {
        const double lo =
            2.0 * std::numbers::pi * (band.centerHz - band.widthHz / 2.0) / spec.rateHz;
        const double hi =
            2.0 * std::numbers::pi * (band.centerHz + band.widthHz / 2.0) / spec.rateHz;
        x = convolveValid(x, bandstopFir(lo, hi, spec.synthesisTaps));
      }
      out = std::move(x);
      break;
    }
  }
  return NyquistSignal{std::move(out), spec.rateHz};
}

// Subband containing normalized frequency omega: intervals are
// ((2m-1)pi/L, (2m+1)pi/L], closed on top.
inline int containingSubband(double omega, int L) {
  return static_cast<int>(std::ceil(L * omega / (2.0 * std::numbers::pi) - 0.5));
}

// Column of subband index m with mod-L wrap (m = -L/2 aliases to +L/2).
inline int columnOfSubband(int m, int L) {
  int mm = ((m % L) + L) % L;
  if (mm > L / 2) mm -= L;
  return mm + L / 2 - 1;
}

inline double intervalOverlap(double lo1, double hi1, double lo2, double hi2) {
  return std::max(0.0, std::min(hi1, hi2) - std::max(lo1, lo2));
}

// Overlap of [lo, hi] with [a, b] on the unit circle (2*pi-periodic copies).
inline double wrappedOverlap(double lo, double hi, double a, double b) {
  double s = 0.0;
  for (int k = -1; k <= 1; ++k) {
    const double shift = 2.0 * std::numbers::pi * k;
    s += intervalOverlap(lo, hi, a + shift, b + shift);
  }
  return s;
}

// Analytic total power of the process (integral of its PSD).
inline double totalPower(const ProcessSpec& spec) {
  validateProcess(spec);
  switch (spec.kind) {
    case ProcessKind::White:
      return spec.variance;
    case ProcessKind::MaWithLines: {
      double p = 0.0;
      for (double h : spec.maCoeffs) p += h * h;
      p *= spec.variance;
      for (const auto& ln : spec.lines) p += ln.amplitude * ln.amplitude / 2.0;
      return p;
    }
    case ProcessKind::SparseMultiband: {
      double p = 0.0;
      for (const auto& b : spec.bands) p += 2.0 * b.widthHz / spec.rateHz;
      return p;
    }
    case ProcessKind::Notched: {
      double stopped = 0.0;
      for (const auto& b : spec.bands) stopped += 2.0 * b.widthHz / spec.rateHz;
      return spec.variance * (1.0 - stopped);
    }
  }
  return 0.0;
}

// Exact subband powers of the analytic PSD. Filtered-noise kinds use the
// ideal indicator spectrum of their band layout; MA spectra are integrated
// by adaptive quadrature; sinusoidal lines deposit A^2/4 into each of the
// +-frequency subbands.
inline PsdEstimate truePsd(const ProcessSpec& spec, int L, double W) {
  validateProcess(spec);
  if (L < 2 || L % 2 != 0)
    throw std::invalid_argument("truePsd: L must be an even integer >= 2");
  if (W <= 0.0) throw std::invalid_argument("truePsd: W must be positive");
  const bool intrinsicRate = spec.kind == ProcessKind::SparseMultiband ||
                             spec.kind == ProcessKind::Notched;
  if (intrinsicRate && std::abs(W - spec.rateHz) > 1e-9 * spec.rateHz)
    throw std::invalid_argument("truePsd: W must match the process rate");

  const double pi = std::numbers::pi;
  std::vector<double> values(L, 0.0);

  switch (spec.kind) {
    case ProcessKind::White: {
      for (auto& v : values) v = spec.variance / L;
      break;
    }
    case ProcessKind::MaWithLines: {
      auto psd = [&](double w) {
        std::complex<double> H(0.0, 0.0);
        for (std::size_t k = 0; k < spec.maCoeffs.size(); ++k)
          H += spec.maCoeffs[k] * std::polar(1.0, -w * static_cast<double>(k));
        return spec.variance * std::norm(H);
      };
      for (int l = 0; l < L; ++l) {
        const int m = subbandIndex(l, L);
        const double a = (2.0 * m - 1.0) * pi / L;
        const double b = (2.0 * m + 1.0) * pi / L;
        values[l] = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                        psd, a, b, 12, 1e-11) /
                    (2.0 * pi);
      }
      for (const auto& ln : spec.lines) {
        const int m = containingSubband(ln.omega, L);
        const double p = ln.amplitude * ln.amplitude / 4.0;
        values[columnOfSubband(m, L)] += p;
        values[columnOfSubband(-m, L)] += p;
      }
      break;
    }
    case ProcessKind::SparseMultiband:
    case ProcessKind::Notched: {
      for (int l = 0; l < L; ++l) {
        const int m = subbandIndex(l, L);
        const double a = (2.0 * m - 1.0) * pi / L;
        const double b = (2.0 * m + 1.0) * pi / L;
        double inBands = 0.0;
        for (const auto& band : spec.bands) {
          const double lo = 2.0 * pi * (band.centerHz - band.widthHz / 2.0) / spec.rateHz;
          const double hi = 2.0 * pi * (band.centerHz + band.widthHz / 2.0) / spec.rateHz;
          inBands += wrappedOverlap(lo, hi, a, b) + wrappedOverlap(-hi, -lo, a, b);
        }
        if (spec.kind == ProcessKind::SparseMultiband)
          values[l] = inBands / (2.0 * pi);
        else
          values[l] = spec.variance * ((b - a) - inBands) / (2.0 * pi);
      }
      break;
    }
  }
  return PsdEstimate{std::move(values), W, L};
}

}  // namespace mcpsd
