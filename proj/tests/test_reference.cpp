#include <catch2/catch_amalgamated.hpp>

#include <mcpsd/reference.hpp>
#include <mcpsd/synth.hpp>

#include <cmath>
#include <numeric>
#include <vector>

using namespace mcpsd;
using Catch::Approx;

namespace {

constexpr double kPi = 3.14159265358979323846;

PsdEstimate meanWelch(const ProcessSpec& spec, int L, int samples, int seeds) {
  PsdEstimate mean;
  for (int seed = 1; seed <= seeds; ++seed) {
    auto est = welchSubbands(generate(spec, samples, static_cast<uint64_t>(seed)), L);
    if (mean.values.empty()) {
      mean = est;
    } else {
      for (size_t l = 0; l < mean.values.size(); ++l)
        mean.values[l] += est.values[l];
    }
  }
  for (double& v : mean.values) v /= seeds;
  return mean;
}

}  // namespace

TEST_CASE("segment-averaged periodogram of deterministic tones", "[reference]") {
  // full-amplitude tone on an exact bin: all its power lands in one band on
  // each side of the axis, with nothing anywhere else
  const int L = 64;
  NyquistSignal sig;
  sig.rateHz = 1.0;
  sig.samples.resize(64 * 1000);
  for (size_t n = 0; n < sig.samples.size(); ++n)
    sig.samples[n] = std::cos(2.0 * kPi * 16.0 * static_cast<double>(n) / 64.0);
  auto est = welchSubbands(sig, L);
  REQUIRE(est.L == 64);
  REQUIRE(est.values.size() == 64);
  const int colPos = columnOfSubband(16, L);
  const int colNeg = columnOfSubband(-16, L);
  REQUIRE(est.values[static_cast<size_t>(colPos)] == Approx(0.25).margin(1e-12));
  REQUIRE(est.values[static_cast<size_t>(colNeg)] == Approx(0.25).margin(1e-12));
  for (int l = 0; l < 64; ++l) {
    if (l == colPos || l == colNeg) continue;
    REQUIRE(est.values[static_cast<size_t>(l)] < 1e-20);
  }
  const double total = std::accumulate(est.values.begin(), est.values.end(), 0.0);
  REQUIRE((est.values[static_cast<size_t>(colPos)] +
           est.values[static_cast<size_t>(colNeg)]) /
              total >
          0.99);
}

TEST_CASE("segment-averaged periodogram input validation", "[reference]") {
  NyquistSignal sig;
  sig.samples.assign(100, 0.0);
  REQUIRE_THROWS_AS(welchSubbands(sig, 63), std::invalid_argument);
  sig.samples.assign(127, 0.0);  // fewer than two 64-sample segments
  REQUIRE_THROWS_AS(welchSubbands(sig, 64), std::invalid_argument);
  sig.samples.assign(128, 0.0);
  REQUIRE_NOTHROW(welchSubbands(sig, 64));
}

TEST_CASE("reference matches nominal band powers for a flat spectrum",
          "[reference]") {
  auto spec = whiteProcess(1.0);
  auto est = meanWelch(spec, 64, 1'000'000, 10);
  auto truth = truePsd(spec, 64, 1.0);
  for (int l = 0; l < 64; ++l) {
    INFO("band column " << l);
    REQUIRE(est.values[static_cast<size_t>(l)] ==
            Approx(truth.values[static_cast<size_t>(l)]).epsilon(0.05));
  }
}

TEST_CASE("reference matches nominal band powers for shaped noise",
          "[reference]") {
  // Gently sloped spectrum: the length-L smoothing kernel's resolution bias
  // (~|S''|/L per band) stays well under the 5% tolerance everywhere, so
  // every band is comparable. Steeper spectra are validated against nominal
  // powers with a fine-resolution estimator in the synthesis tests instead,
  // where the kernel bias does not apply.
  auto spec = maProcessWithLines({1.0, 0.4}, {});
  auto est = meanWelch(spec, 64, 1'000'000, 10);
  auto truth = truePsd(spec, 64, 1.0);
  for (int l = 0; l < 64; ++l) {
    INFO("band column " << l);
    REQUIRE(est.values[static_cast<size_t>(l)] ==
            Approx(truth.values[static_cast<size_t>(l)]).epsilon(0.05));
  }
}

TEST_CASE("reference conserves total power for steep spectra", "[reference]") {
  // Per-band values of a steep spectrum carry resolution bias at this
  // segment length, but the band sum is an unbiased lag-0 estimate.
  auto spec = maProcessWithLines({1, 2, 0, -2, -1}, {});
  auto est = meanWelch(spec, 64, 1'000'000, 10);
  const double total =
      std::accumulate(est.values.begin(), est.values.end(), 0.0);
  REQUIRE(total == Approx(totalPower(spec)).epsilon(0.01));
}

TEST_CASE("reference matches nominal band powers with bin-centered tones",
          "[reference]") {
  // tones on exact segment bins do not leak, so every band is checkable
  auto spec = maProcessWithLines({1.0}, {{2.0, 0.5 * kPi}, {2.0, 0.75 * kPi}});
  auto est = meanWelch(spec, 64, 1'000'000, 10);
  auto truth = truePsd(spec, 64, 1.0);
  for (int l = 0; l < 64; ++l) {
    INFO("band column " << l);
    REQUIRE(est.values[static_cast<size_t>(l)] ==
            Approx(truth.values[static_cast<size_t>(l)]).epsilon(0.05));
  }
}

TEST_CASE("narrow occupied bands leave empty bands clean", "[reference]") {
  // 2 MHz islands centered in their subbands, synthesized with long filters:
  // out-of-band reference power stays below 1% of the peak
  auto spec = sparseMultibandProcess(2e9, {{312.5e6, 2e6}, {687.5e6, 2e6}}, 2049);
  auto sig = generate(spec, 1 << 21, 5);
  auto est = welchSubbands(sig, 128);
  auto truth = truePsd(spec, 128, 2e9);
  const double peak = *std::max_element(est.values.begin(), est.values.end());
  for (int l = 0; l < 128; ++l) {
    if (truth.values[static_cast<size_t>(l)] > 0.0) continue;
    INFO("band column " << l);
    REQUIRE(est.values[static_cast<size_t>(l)] <= 0.01 * peak);
  }
  // and the occupied bands hold nearly all the power
  const double total = std::accumulate(est.values.begin(), est.values.end(), 0.0);
  double occupied = 0.0;
  for (int l = 0; l < 128; ++l)
    if (truth.values[static_cast<size_t>(l)] > 0.0)
      occupied += est.values[static_cast<size_t>(l)];
  REQUIRE(occupied / total > 0.95);
}

TEST_CASE("error metrics", "[reference]") {
  PsdEstimate ref;
  ref.values = {1.0, 2.0, 3.0, 4.0};
  ref.W = 1.0;
  ref.L = 4;

  SECTION("identical estimates score zero") {
    auto m = metrics(ref, ref);
    REQUIRE(m.normalizedSquaredError == 0.0);
    REQUIRE(m.maxAbsError == 0.0);
    REQUIRE(m.totalPowerError == 0.0);
  }
  SECTION("doubling gives unit normalized error") {
    PsdEstimate est = ref;
    for (double& v : est.values) v *= 2.0;
    auto m = metrics(est, ref);
    REQUIRE(m.normalizedSquaredError == Approx(1.0));
    REQUIRE(m.maxAbsError == Approx(4.0));
    REQUIRE(m.totalPowerError == Approx(1.0));
  }
  SECTION("single-band deviation") {
    PsdEstimate est = ref;
    est.values[2] += 0.5;
    auto m = metrics(est, ref);
    REQUIRE(m.normalizedSquaredError == Approx(0.25 / 30.0));
    REQUIRE(m.maxAbsError == Approx(0.5));
    REQUIRE(m.totalPowerError == Approx(0.05));
  }
  SECTION("length mismatch throws") {
    PsdEstimate est = ref;
    est.values.pop_back();
    REQUIRE_THROWS_AS(metrics(est, ref), std::invalid_argument);
  }
  SECTION("zero reference edge cases") {
    PsdEstimate zero = ref;
    for (double& v : zero.values) v = 0.0;
    auto same = metrics(zero, zero);
    REQUIRE(same.normalizedSquaredError == 0.0);
    REQUIRE(same.totalPowerError == 0.0);
    auto off = metrics(ref, zero);
    REQUIRE(std::isinf(off.normalizedSquaredError));
  }
}
