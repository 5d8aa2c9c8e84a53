#pragma once

#include <algorithm>
#include <complex>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mcpsd {

// Multi-coset sampling pattern: q distinct channel offsets inside one period
// of L Nyquist slots. Offsets are kept sorted ascending; the average sampling
// rate relative to Nyquist is q/L.
struct SamplingPattern {
  int L = 0;
  std::vector<int> offsets;

  int q() const { return static_cast<int>(offsets.size()); }
};

inline void validatePattern(const SamplingPattern& pattern) {
  if (pattern.L < 2 || pattern.L % 2 != 0)
    throw std::invalid_argument("pattern: L must be an even integer >= 2");
  if (pattern.offsets.size() < 2)
    throw std::invalid_argument("pattern: need at least 2 channels");
  if (static_cast<int>(pattern.offsets.size()) > pattern.L)
    throw std::invalid_argument("pattern: more channels than slots");
  for (int c : pattern.offsets)
    if (c < 0 || c >= pattern.L)
      throw std::invalid_argument("pattern: offset " + std::to_string(c) +
                                  " outside [0, L)");
  if (!std::is_sorted(pattern.offsets.begin(), pattern.offsets.end()))
    throw std::invalid_argument("pattern: offsets must be sorted ascending");
  if (std::adjacent_find(pattern.offsets.begin(), pattern.offsets.end()) !=
      pattern.offsets.end())
    throw std::invalid_argument("pattern: duplicate offsets");
}

inline SamplingPattern makePattern(int L, std::vector<int> offsets) {
  std::sort(offsets.begin(), offsets.end());
  SamplingPattern p{L, std::move(offsets)};
  validatePattern(p);
  return p;
}

// Row bookkeeping for correlation measurements. Entry 0 is the aggregated
// equal-channel autocorrelation row (sentinel pair {-1,-1}, difference 0);
// the rest are the cross-channel pairs (a, b) with a < b in lexicographic
// order, carrying differences c_a - c_b (negative, since offsets are sorted).
struct PairOrdering {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> differences;

  int rows() const { return static_cast<int>(pairs.size()); }
  bool isEqualRow(int i) const { return pairs[i].first < 0; }
};

inline PairOrdering makeOrdering(const SamplingPattern& pattern) {
  const int q = pattern.q();
  PairOrdering ord;
  ord.pairs.reserve(1 + q * (q - 1) / 2);
  ord.differences.reserve(1 + q * (q - 1) / 2);
  ord.pairs.emplace_back(-1, -1);
  ord.differences.push_back(0);
  for (int a = 0; a < q; ++a)
    for (int b = a + 1; b < q; ++b) {
      ord.pairs.emplace_back(a, b);
      ord.differences.push_back(pattern.offsets[a] - pattern.offsets[b]);
    }
  return ord;
}

// Complex measurement matrix and its real stacked form. psi has
// R = q(q-1)/2 + 1 rows over the L spectral subbands; psiTilde stacks the
// real parts of all rows above the imaginary parts of the cross rows (the
// EQUAL row's identically-zero imaginary part is dropped), giving
// q(q-1) + 1 real rows.
struct MeasurementSystem {
  SamplingPattern pattern;
  PairOrdering ordering;
  Eigen::MatrixXcd psi;
  Eigen::MatrixXd psiTilde;

  int subbands() const { return pattern.L; }
  int complexRows() const { return static_cast<int>(psi.rows()); }
  int stackedRows() const { return static_cast<int>(psiTilde.rows()); }
};

// Subband index for column l: m ranges over -L/2+1 .. L/2.
inline int subbandIndex(int l, int L) { return -L / 2 + 1 + l; }

inline double subbandLowHz(int m, int L, double W) {
  return (2.0 * m - 1.0) * W / (2.0 * L);
}

inline double subbandHighHz(int m, int L, double W) {
  return (2.0 * m + 1.0) * W / (2.0 * L);
}

// Frequency bounds of the subband held in column l.
inline std::pair<double, double> subbandBounds(int l, int L, double W) {
  if (l < 0 || l >= L)
    throw std::out_of_range("subbandBounds: column index outside [0, L)");
  const int m = subbandIndex(l, L);
  return {subbandLowHz(m, L, W), subbandHighHz(m, L, W)};
}

inline MeasurementSystem buildMeasurementSystem(const SamplingPattern& pattern) {
  validatePattern(pattern);
  const int L = pattern.L;
  PairOrdering ord = makeOrdering(pattern);
  const int R = ord.rows();

  Eigen::MatrixXcd psi(R, L);
  psi.row(0).setOnes();
  for (int i = 1; i < R; ++i) {
    const int delta = ord.differences[i];
    for (int l = 0; l < L; ++l) {
      const double m = subbandIndex(l, L);
      const double phase = -2.0 * std::numbers::pi / L * delta * m;
      psi(i, l) = std::complex<double>(std::cos(phase), std::sin(phase));
    }
  }

  Eigen::MatrixXd psiTilde(2 * R - 1, L);
  psiTilde.topRows(R) = psi.real();
  if (R > 1) psiTilde.bottomRows(R - 1) = psi.bottomRows(R - 1).imag();

  return MeasurementSystem{pattern, std::move(ord), std::move(psi),
                           std::move(psiTilde)};
}

// The pattern lacks a channel pair separated by the reported offset
// difference, so the corresponding trigonometric rows cannot be formed.
struct MissingDifference : std::runtime_error {
  int difference;
  explicit MissingDifference(int d)
      : std::runtime_error("pattern covers no channel pair with offset difference " +
                           std::to_string(d)),
        difference(d) {}
};

// Real 2s x L matrix whose row pair (2t, 2t+1) holds the cosine and sine
// rows at offset difference t, indexed by subband position n = 0..L-1 (the
// trigonometric arguments are periodic mod L, so n and the centered index
// m_l differ only by a column reindexing). Row 1 (sine at difference 0) is
// identically zero. Requires the pattern to cover every difference 0..s-1;
// throws MissingDifference at the first gap.
inline Eigen::MatrixXd buildPartialDftA(const SamplingPattern& pattern, int s) {
  validatePattern(pattern);
  const int L = pattern.L;
  if (s < 1 || 2 * s > L)
    throw std::invalid_argument("buildPartialDftA: s must satisfy 1 <= s <= L/2");

  std::set<int> diffs;
  const int q = pattern.q();
  for (int a = 0; a < q; ++a)
    for (int b = a + 1; b < q; ++b)
      diffs.insert(pattern.offsets[b] - pattern.offsets[a]);
  for (int t = 1; t < s; ++t)
    if (!diffs.count(t)) throw MissingDifference(t);

  Eigen::MatrixXd A(2 * s, L);
  for (int t = 0; t < s; ++t) {
    for (int n = 0; n < L; ++n) {
      const double phase = 2.0 * std::numbers::pi * t * n / L;
      A(2 * t, n) = std::cos(phase);
      A(2 * t + 1, n) = std::sin(phase);
    }
  }
  return A;
}

// Power spectral density over the L coarse subbands of a band-limited
// process with two-sided bandwidth W Hz. values[l] is the band power of
// subband m = subbandIndex(l, L).
struct PsdEstimate {
  std::vector<double> values;
  double W = 1.0;
  int L = 0;

  double resolutionHz() const { return W / L; }
  // Height of the piecewise-constant spectral density over subband l.
  double densityHeight(int l) const { return L / W * values.at(l); }
};

enum class Regime { Overdetermined, Underdetermined };

// Overdetermined recovery regime: the stacked system has at least as many
// rows as subbands.
inline bool overdetermined(int q, int L) { return q * (q - 1) + 1 >= L; }

struct TradeoffReport {
  int L = 0;
  double W = 0.0;
  std::optional<int> q;                // channel count under evaluation
  std::optional<int> s;                // sparsity target
  int minQNoncompressive = 0;          // smallest q with q(q-1)+1 >= L
  std::optional<int> minQCompressive;  // smallest q with q(q-1)+1 >= 2s
  double resolutionHz = 0.0;           // subband width W/L
  double noncompressiveRateHz = 0.0;   // minQNoncompressive * W / L
  std::optional<double> compressiveRateHz;
  std::optional<double> avgRateHz;     // q * W / L when q is given
  std::optional<Regime> regime;        // overdetermined iff q(q-1)+1 >= L
};

inline int smallestQWithRows(int rows) {
  int q = 2;
  while (q * (q - 1) + 1 < rows) ++q;
  return q;
}

inline TradeoffReport tradeoff(int L, double W,
                               std::optional<int> sparsity = std::nullopt,
                               std::optional<int> channels = std::nullopt) {
  if (L < 2 || L % 2 != 0)
    throw std::invalid_argument("tradeoff: L must be an even integer >= 2");
  if (W <= 0.0) throw std::invalid_argument("tradeoff: W must be positive");
  TradeoffReport r;
  r.L = L;
  r.W = W;
  r.resolutionHz = W / L;
  r.minQNoncompressive = smallestQWithRows(L);
  r.noncompressiveRateHz = r.minQNoncompressive * W / L;
  if (sparsity) {
    if (*sparsity < 1)
      throw std::invalid_argument("tradeoff: sparsity must be >= 1");
    r.s = *sparsity;
    r.minQCompressive = smallestQWithRows(2 * *sparsity);
    r.compressiveRateHz = *r.minQCompressive * W / L;
  }
  if (channels) {
    if (*channels < 2)
      throw std::invalid_argument("tradeoff: channel count must be >= 2");
    r.q = *channels;
    r.avgRateHz = *channels * W / L;
    r.regime = overdetermined(*channels, L) ? Regime::Overdetermined
                                            : Regime::Underdetermined;
  }
  return r;
}

}  // namespace mcpsd
