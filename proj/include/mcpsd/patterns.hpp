#pragma once

#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mcpsd/core.hpp"
#include "mcpsd/rng.hpp"

namespace mcpsd {

struct GolombRuler {
  int order = 0;
  std::vector<int> marks;

  int length() const { return marks.back() - marks.front(); }
};

// Tabulated minimum-length rulers. Optimal rulers are only known up to
// order 26, hence the table bound.
inline const GolombRuler& golombRuler(int order) {
  static const std::vector<GolombRuler> table = {
      {2, {0, 1}},
      {3, {0, 1, 3}},
      {4, {0, 1, 4, 6}},
      {5, {0, 1, 4, 9, 11}},
      {6, {0, 1, 4, 10, 12, 17}},
      {7, {1, 3, 4, 11, 17, 22, 26}},
      {8, {0, 1, 4, 9, 15, 22, 32, 34}},
      {9, {0, 1, 5, 12, 25, 27, 35, 41, 44}},
      {10, {1, 2, 7, 11, 24, 27, 35, 42, 54, 56}},
      {11, {0, 1, 4, 13, 28, 33, 47, 54, 64, 70, 72}},
      {12, {0, 2, 6, 24, 29, 40, 43, 55, 68, 75, 76, 85}},
      {13, {0, 2, 5, 25, 37, 43, 59, 70, 85, 89, 98, 99, 106}},
      {14, {0, 4, 6, 20, 35, 52, 59, 77, 78, 86, 89, 99, 122, 127}},
      {15, {0, 4, 20, 30, 57, 59, 62, 76, 100, 111, 123, 136, 144, 145, 151}},
      {16, {0, 1, 4, 11, 26, 32, 56, 68, 76, 115, 117, 134, 150, 163, 168, 177}},
      {17, {0, 5, 7, 17, 52, 56, 67, 80, 81, 100, 122, 138, 159, 165, 168, 191, 199}},
      {18, {0, 2, 10, 22, 53, 56, 82, 83, 89, 98, 130, 148, 153, 167, 188, 192, 205, 216}},
      {19, {0, 1, 6, 25, 32, 72, 100, 108, 120, 130, 153, 169, 187, 190, 204, 231, 233, 242, 246}},
      {20, {0, 1, 8, 11, 68, 77, 94, 116, 121, 156, 158, 179, 194, 208, 212, 228, 240, 253, 259, 283}},
      {21, {0, 2, 24, 56, 77, 82, 83, 95, 129, 144, 179, 186, 195, 255, 265, 285, 293, 296, 310, 329, 333}},
      {22, {0, 1, 9, 14, 43, 70, 106, 122, 124, 128, 159, 179, 204, 223, 253, 263, 270, 291, 330, 341, 353, 356}},
      {23, {0, 3, 7, 17, 61, 66, 91, 99, 114, 159, 171, 199, 200, 226, 235, 246, 277, 316, 329, 348, 350, 366, 372}},
      {24, {0, 9, 33, 37, 38, 97, 122, 129, 140, 142, 152, 191, 205, 208, 252, 278, 286, 326, 332, 353, 368, 384, 403, 425}},
      {25, {0, 12, 29, 39, 72, 91, 146, 157, 160, 161, 166, 191, 207, 214, 258, 290, 316, 354, 372, 394, 396, 431, 459, 467, 480}},
      {26, {0, 1, 33, 83, 104, 110, 124, 163, 185, 200, 203, 249, 251, 258, 314, 318, 343, 356, 386, 430, 440, 456, 464, 475, 487, 492}},
  };
  if (order < 2 || order > 26)
    throw std::invalid_argument("golombRuler: tabulated orders are 2..26");
  return table[order - 2];
}

// Ruler marks used verbatim as channel offsets (no re-basing); requires the
// largest mark to fit inside one period of L slots.
inline SamplingPattern rulerPattern(int order, int L) {
  const GolombRuler& r = golombRuler(order);
  if (r.marks.back() >= L)
    throw std::invalid_argument("rulerPattern: order-" + std::to_string(order) +
                                " ruler does not fit in L=" + std::to_string(L));
  return makePattern(L, r.marks);
}

// q distinct offsets drawn uniformly from [0, L) via partial Fisher-Yates.
inline SamplingPattern randomPattern(int L, int q, std::uint64_t seed) {
  if (q < 2 || q > L)
    throw std::invalid_argument("randomPattern: need 2 <= q <= L");
  Rng rng = Rng::substream(seed, 0);
  std::vector<int> slots(L);
  std::iota(slots.begin(), slots.end(), 0);
  std::vector<int> offsets(q);
  for (int i = 0; i < q; ++i) {
    const int j = i + rng.uniformInt(L - i);
    std::swap(slots[i], slots[j]);
    offsets[i] = slots[i];
  }
  return makePattern(L, std::move(offsets));
}

struct PatternDiagnostics {
  bool fullRank = false;
  int rank = 0;
  double conditionNumber = std::numeric_limits<double>::infinity();
  int stackedRows = 0;
  double rowRatio = 0.0;  // stacked rows / L; >= 1 is necessary for full rank
};

inline PatternDiagnostics diagnose(const MeasurementSystem& system) {
  // JacobiSVD for the same reason as solveLS: BDCSVD in Eigen 3.4.0 gets
  // clustered singular values wrong, skewing rank and condition reports
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(system.psiTilde);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double tol = 1e-10 * smax;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;

  PatternDiagnostics d;
  d.rank = rank;
  d.stackedRows = system.stackedRows();
  d.rowRatio = static_cast<double>(d.stackedRows) / system.subbands();
  d.fullRank = rank == system.subbands();
  if (d.fullRank) d.conditionNumber = smax / sv(sv.size() - 1);
  return d;
}

struct SweepPoint {
  int q = 0;
  int successes = 0;
  int trials = 0;
};

// Fraction of random patterns whose stacked matrix reaches full column rank,
// per channel count. Exposes the sharp feasibility threshold near
// q(q-1)+1 = L.
inline std::vector<SweepPoint> thresholdSweep(int L, int qMin, int qMax,
                                              int trials, std::uint64_t seed) {
  if (qMin < 2 || qMax < qMin || qMax > L)
    throw std::invalid_argument("thresholdSweep: need 2 <= qMin <= qMax <= L");
  if (trials < 1) throw std::invalid_argument("thresholdSweep: trials >= 1");
  std::vector<SweepPoint> out;
  std::uint64_t stream = 0;
  for (int q = qMin; q <= qMax; ++q) {
    SweepPoint pt{q, 0, trials};
    for (int t = 0; t < trials; ++t) {
      SamplingPattern pat = randomPattern(L, q, substreamSeed(seed, stream++));
      if (diagnose(buildMeasurementSystem(pat)).fullRank) ++pt.successes;
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace mcpsd
