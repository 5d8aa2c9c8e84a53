#include <catch2/catch_amalgamated.hpp>

#include <mcpsd/core.hpp>
#include <mcpsd/estimator.hpp>
#include <mcpsd/patterns.hpp>
#include <mcpsd/reference.hpp>
#include <mcpsd/rng.hpp>
#include <mcpsd/sampler.hpp>
#include <mcpsd/synth.hpp>

#include <cmath>
#include <complex>
#include <set>
#include <vector>

using namespace mcpsd;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

CorrelationVector syntheticCorrelation(const MeasurementSystem& sys,
                                       const Eigen::VectorXd& v) {
  CorrelationVector corr;
  corr.u = sys.psiTilde * v;
  corr.raw = sys.psi * v.cast<std::complex<double>>();
  return corr;
}

Eigen::VectorXd seededNonneg(int L, uint64_t seed, double floor = 0.0) {
  auto rng = Rng::substream(seed, 0);
  Eigen::VectorXd v(L);
  for (int i = 0; i < L; ++i) v(i) = floor + rng.uniform01();
  return v;
}

std::complex<double> tapResponse(const std::vector<double>& h, double omega) {
  std::complex<double> acc{0.0, 0.0};
  for (size_t k = 0; k < h.size(); ++k)
    acc += h[k] * std::exp(std::complex<double>(0.0, -omega * static_cast<double>(k)));
  return acc;
}

}  // namespace

TEST_CASE("correlation assembly from aligned channels", "[estimator]") {
  auto pattern = makePattern(12, {0, 3, 5});
  auto ord = makeOrdering(pattern);

  SECTION("constant channels give unit correlations") {
    DelayedSampleSet set{pattern, 2, Eigen::MatrixXd::Ones(3, 8), 1.0};
    auto corr = assembleU(set, ord);
    REQUIRE(corr.raw.size() == 4);
    REQUIRE(corr.u.size() == 7);
    for (int i = 0; i < 4; ++i) {
      REQUIRE(corr.raw(i).real() == Approx(1.0));
      REQUIRE(corr.raw(i).imag() == 0.0);
    }
    for (int i = 4; i < 7; ++i) REQUIRE(corr.u(i) == 0.0);
  }

  SECTION("leading entry averages the channel powers") {
    Eigen::MatrixXd z(3, 6);
    z.row(0).setConstant(2.0);   // power 4
    z.row(1).setConstant(4.0);   // power 16
    z.row(2).setConstant(-1.0);  // power 1
    DelayedSampleSet set{pattern, 1, z, 1.0};
    auto corr = assembleU(set, ord);
    REQUIRE(corr.u(0) == Approx((4.0 + 16.0 + 1.0) / 3.0));
  }

  SECTION("orthogonal channels produce zero cross terms") {
    auto p2 = makePattern(8, {0, 4});
    Eigen::MatrixXd z(2, 4);
    z.row(0) << 1, 1, -1, -1;
    z.row(1) << 1, -1, 1, -1;
    DelayedSampleSet set{p2, 1, z, 1.0};
    auto corr = assembleU(set, makeOrdering(p2));
    REQUIRE(corr.u(0) == Approx(1.0));
    REQUIRE(corr.u(1) == Approx(0.0).margin(1e-15));
  }

  SECTION("needs at least two aligned samples") {
    DelayedSampleSet set{pattern, 1, Eigen::MatrixXd::Ones(3, 1), 1.0};
    REQUIRE_THROWS_AS(assembleU(set, ord), std::invalid_argument);
  }

  SECTION("ordering must match the channel count") {
    auto other = makeOrdering(makePattern(12, {0, 5}));
    DelayedSampleSet set{pattern, 1, Eigen::MatrixXd::Ones(3, 8), 1.0};
    REQUIRE_THROWS_AS(assembleU(set, other), std::invalid_argument);
  }
}

TEST_CASE("unconstrained solve recovers consistent band powers exactly",
          "[estimator]") {
  auto sys = buildMeasurementSystem(rulerPattern(10, 64));
  auto v = seededNonneg(64, 11, 0.05);
  auto rep = solveLS(sys, syntheticCorrelation(sys, v), 4.0);
  REQUIRE(rep.method == SolverMethod::LS);
  REQUIRE(rep.estimate.W == Approx(4.0));
  REQUIRE(rep.estimate.L == 64);
  double worst = 0.0;
  for (int l = 0; l < 64; ++l)
    worst = std::max(worst, std::abs(rep.estimate.values[static_cast<size_t>(l)] - v(l)));
  REQUIRE(worst < 1e-8);
  REQUIRE(rep.residualNorm < 1e-8);

  SECTION("signed targets are reproduced too: no positivity constraint") {
    Eigen::VectorXd signedV = v.array() - 0.6;
    auto rep2 = solveLS(sys, syntheticCorrelation(sys, signedV));
    bool sawNegative = false;
    for (int l = 0; l < 64; ++l) {
      REQUIRE(rep2.estimate.values[static_cast<size_t>(l)] ==
              Approx(signedV(l)).margin(1e-8));
      if (rep2.estimate.values[static_cast<size_t>(l)] < 0.0) sawNegative = true;
    }
    REQUIRE(sawNegative);
  }
}

TEST_CASE("unconstrained solve rejects singular systems", "[estimator]") {
  auto sys = buildMeasurementSystem(makePattern(16, {0, 7}));
  CorrelationVector corr;
  corr.u = Eigen::VectorXd::Ones(sys.stackedRows());
  corr.raw = Eigen::VectorXcd::Ones(sys.complexRows());
  REQUIRE_THROWS_AS(solveLS(sys, corr), RankDeficient);
}

TEST_CASE("zero correlations give zero spectra", "[estimator]") {
  auto sys = buildMeasurementSystem(rulerPattern(10, 64));
  CorrelationVector corr;
  corr.u = Eigen::VectorXd::Zero(sys.stackedRows());
  corr.raw = Eigen::VectorXcd::Zero(sys.complexRows());
  for (auto method : {SolverMethod::LS, SolverMethod::NNLS}) {
    auto rep = method == SolverMethod::LS ? solveLS(sys, corr) : solveNNLS(sys, corr);
    for (double val : rep.estimate.values) REQUIRE(val == 0.0);
    REQUIRE(rep.residualNorm == 0.0);
  }
}

TEST_CASE("nonnegative solve recovers sparse spectra from few channels",
          "[estimator]") {
  // 43 stacked rows against 128 unknowns: far underdetermined, yet a
  // 12-sparse nonnegative target is identified exactly
  auto sys = buildMeasurementSystem(rulerPattern(7, 128));
  REQUIRE(sys.stackedRows() == 43);
  auto rng = Rng::substream(404, 0);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(128);
  std::set<int> support;
  while (support.size() < 12) support.insert(static_cast<int>(rng.uniformInt(128)));
  for (int idx : support) v(idx) = 0.1 + 1.9 * rng.uniform01();

  auto rep = solveNNLS(sys, syntheticCorrelation(sys, v), 2e9);
  REQUIRE(rep.method == SolverMethod::NNLS);
  double worst = 0.0;
  for (int l = 0; l < 128; ++l)
    worst = std::max(worst, std::abs(rep.estimate.values[static_cast<size_t>(l)] - v(l)));
  REQUIRE(worst < 1e-6);
  REQUIRE(rep.iterations >= 12);
  REQUIRE(rep.activeSetSize >= 12);

  SECTION("iteration budget is enforced") {
    try {
      solveNNLS(sys, syntheticCorrelation(sys, v), 2e9, 1);
      FAIL("expected MaxIterationsExceeded");
    } catch (const MaxIterationsExceeded& e) {
      REQUIRE(e.iterations == 1);
    }
  }
}

TEST_CASE("nonnegative solve clips where the unconstrained one goes negative",
          "[estimator]") {
  auto sys = buildMeasurementSystem(rulerPattern(10, 64));
  Eigen::VectorXd v = seededNonneg(64, 21).array() - 0.5;  // mixed signs
  auto corr = syntheticCorrelation(sys, v);
  auto ls = solveLS(sys, corr);
  auto nnls = solveNNLS(sys, corr);
  for (double val : nnls.estimate.values) REQUIRE(val >= 0.0);
  REQUIRE(ls.residualNorm < 1e-10);
  REQUIRE(nnls.residualNorm > ls.residualNorm);
  REQUIRE(nnls.residualNorm > 0.1);  // some mass is genuinely unreachable
}

TEST_CASE("both solvers agree when positivity is inactive", "[estimator]") {
  // white input keeps every recovered band power strictly positive, so the
  // constrained solution coincides with the unconstrained one
  auto pattern = randomPattern(16, 6, 3);
  auto sys = buildMeasurementSystem(pattern);
  REQUIRE(diagnose(sys).fullRank);
  auto sig = generate(whiteProcess(1.0), 2000 * 16 + 16, 9);
  auto corr = assembleU(fractionalDelay(cosetSample(sig, pattern, 2000), 20),
                        makeOrdering(pattern));
  auto ls = solveLS(sys, corr);
  auto nnls = solveNNLS(sys, corr);
  for (int l = 0; l < 16; ++l) {
    REQUIRE(ls.estimate.values[static_cast<size_t>(l)] > 0.0);
    REQUIRE(nnls.estimate.values[static_cast<size_t>(l)] ==
            Approx(ls.estimate.values[static_cast<size_t>(l)]).margin(1e-10));
  }
}

TEST_CASE("pipeline estimate tracks a flat spectrum", "[estimator]") {
  auto pattern = randomPattern(16, 6, 3);
  auto sys = buildMeasurementSystem(pattern);
  auto spec = whiteProcess(2.0);
  auto sig = generate(spec, 2000 * 16 + 16, 31);
  auto corr = assembleU(fractionalDelay(cosetSample(sig, pattern, 2000), 20),
                        makeOrdering(pattern));
  auto rep = solveLS(sys, corr, 1.0);
  auto truth = truePsd(spec, 16, 1.0);
  auto m = metrics(rep.estimate, truth);
  REQUIRE(m.normalizedSquaredError < 0.05);
  REQUIRE(m.totalPowerError < 0.03);
}

TEST_CASE("variance prediction for lag-0 sample correlations", "[estimator]") {
  SECTION("uncorrelated sequence") {
    REQUIRE(predictVariance({2.0}, 50) == Approx(2.0 * 4.0 / 50.0));
  }
  SECTION("hand-computed short correlation") {
    // (2/10) * [1*2^2 + 2*(1 - 1/10)*(-1)^2] = 1.16
    REQUIRE(predictVariance({-1.0, 2.0, -1.0}, 10) == Approx(1.16));
  }
  SECTION("lags beyond the window are dropped") {
    std::vector<double> r(21, 1.0);  // lags -10..10
    // N=5 keeps |m| <= 4: 2/5 * sum_{|m|<=4} (1-|m|/5) = 2/5 * (1 + 2*(0.8+0.6+0.4+0.2))
    REQUIRE(predictVariance(r, 5) == Approx(0.4 * (1.0 + 2.0 * 2.0)));
  }
  SECTION("scaling with the averaging length") {
    std::vector<double> r = {0.3, -1.0, 4.0, -1.0, 0.3};
    REQUIRE(predictVariance(r, 40000) == Approx(predictVariance(r, 4000) / 10.0)
                .epsilon(1e-3));
  }
  SECTION("input validation") {
    REQUIRE_THROWS_AS(predictVariance({1.0, 2.0}, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(predictVariance({1.0}, 0), std::invalid_argument);
  }
}

TEST_CASE("bias prediction matches a frequency-domain evaluation for a tone",
          "[estimator]") {
  const double omega = 0.37 * kPi;
  const double power = 2.0;  // A^2/2
  auto hA = fractionalDelayTaps(0.3, 12);
  auto hB = fractionalDelayTaps(0.7, 12);
  auto r = [&](long k) { return power * std::cos(omega * static_cast<double>(k)); };
  const double predicted = predictBias(r, hA, hB, 1'000'000'000);
  const double viaResponse =
      power * (tapResponse(hA, omega) * std::conj(tapResponse(hB, omega))).real();
  REQUIRE(predicted == Approx(viaResponse).epsilon(1e-6));
}

TEST_CASE("bias prediction equals the mean of tap-weighted sample correlations",
          "[estimator]") {
  // Monte Carlo: draw channel pairs whose cross-correlation is known, build
  // the biased lag estimates over a short window, weight them by the two tap
  // sets, and compare the empirical mean with the closed form.
  const int K = 8, N = 16;
  const int L = 8, cb = 4;
  const std::vector<double> h = {1, 2, 0, -2, -1};
  // autocorrelation of h: lags 0..4
  const std::vector<double> rx = {10, 4, -4, -4, -1};
  auto rxAt = [&](long j) {
    const long a = std::labs(j);
    return a <= 4 ? rx[static_cast<size_t>(a)] : 0.0;
  };
  // channel-domain cross-correlation of y_a(n) = x(nL), y_b(n) = x(nL + cb):
  // r_ab(k) = E[y_a(n+k) y_b(n)] = r_x(kL - cb)
  auto rab = [&](long k) { return rxAt(k * L - cb); };

  auto hA = fractionalDelayTaps(0.0, K);
  auto hB = fractionalDelayTaps(0.5, K);
  const double predicted = predictBias(rab, hA, hB, N);
  REQUIRE(std::abs(predicted) > 0.5);  // non-trivial target

  const int trials = 40000;
  const int span = static_cast<int>(hA.size());  // 17 taps
  double mean = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto sig = generate(maProcessWithLines(h, {}), (N + span) * L + cb + 1,
                        1000 + static_cast<uint64_t>(t));
    // y_a(n), y_b(n) for n = 0..N+span-1 (extra tail for positive lags)
    std::vector<double> ya(N + span), yb(N + span);
    for (int n = 0; n < N + span; ++n) {
      ya[static_cast<size_t>(n)] = sig.samples[static_cast<size_t>(n * L)];
      yb[static_cast<size_t>(n)] = sig.samples[static_cast<size_t>(n * L + cb)];
    }
    // biased sample correlation over the N-sample window:
    // rhat(tau) = (1/N) sum y_a(n+tau) y_b(n) over in-window products
    std::vector<double> rhat(static_cast<size_t>(2 * span - 1), 0.0);
    for (int tau = -(span - 1); tau <= span - 1; ++tau) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        const int na = n + tau;
        if (na < 0 || na >= N) continue;
        acc += ya[static_cast<size_t>(na)] * yb[static_cast<size_t>(n)];
      }
      rhat[static_cast<size_t>(tau + span - 1)] = acc / N;
    }
    double stat = 0.0;
    for (int m = 0; m < span; ++m)
      for (int l = 0; l < span; ++l)
        stat += hA[static_cast<size_t>(m)] * hB[static_cast<size_t>(l)] *
                rhat[static_cast<size_t>(l - m + span - 1)];
    mean += stat;
  }
  mean /= trials;
  REQUIRE(mean == Approx(predicted).epsilon(0.05));
}
