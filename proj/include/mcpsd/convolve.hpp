#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace mcpsd {

// Linear convolution restricted to fully overlapped outputs (length
// x.size() - h.size() + 1). Short kernels run the direct sum; long kernels
// switch to FFT overlap-save, which is what makes multi-thousand-tap
// shaping filters affordable on multi-megasample records.
inline std::vector<double> convolveValid(const std::vector<double>& x,
                                         const std::vector<double>& h) {
  const std::size_t n = x.size();
  const std::size_t m = h.size();
  if (m == 0) throw std::invalid_argument("convolveValid: empty kernel");
  if (n < m) throw std::invalid_argument("convolveValid: signal shorter than kernel");
  const std::size_t outLen = n - m + 1;
  std::vector<double> out(outLen);

  if (m <= 64) {
    for (std::size_t t = 0; t < outLen; ++t) {
      double acc = 0.0;
      const std::size_t base = t + m - 1;
      for (std::size_t k = 0; k < m; ++k) acc += h[k] * x[base - k];
      out[t] = acc;
    }
    return out;
  }

  std::size_t fftLen = 1;
  while (fftLen < 8 * m) fftLen <<= 1;
  const std::size_t step = fftLen - (m - 1);

  Eigen::FFT<double> fft;
  std::vector<double> hp(fftLen, 0.0);
  std::copy(h.begin(), h.end(), hp.begin());
  std::vector<std::complex<double>> H;
  fft.fwd(H, hp);

  std::vector<double> block(fftLen);
  std::vector<std::complex<double>> X, Y(fftLen);
  std::vector<double> yblk;
  std::size_t produced = 0;
  std::size_t p = 0;
  while (produced < outLen) {
    for (std::size_t i = 0; i < fftLen; ++i) {
      const std::size_t idx = p + i;
      block[i] = idx < n ? x[idx] : 0.0;
    }
    fft.fwd(X, block);
    for (std::size_t i = 0; i < fftLen; ++i) Y[i] = X[i] * H[i];
    fft.inv(yblk, Y);
    for (std::size_t i = m - 1; i < fftLen && produced < outLen; ++i)
      out[produced++] = yblk[i];
    p += step;
  }
  return out;
}

}  // namespace mcpsd
