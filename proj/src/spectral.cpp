#include "pbshm/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "pbshm/error.hpp"

namespace pbshm::spectral {

std::vector<double> dft_packed(std::span<const double> record) {
  const auto n = record.size();
  if (n < 2 || n % 2 != 0) fail(ErrorKind::operator_contract, "dft needs an even record length, got " + std::to_string(n));
  Eigen::FFT<double> fft;
  std::vector<double> in(record.begin(), record.end());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  std::vector<double> packed(n);
  packed[0] = out[0].real();
  packed[1] = out[n / 2].real();
  for (std::size_t q = 1; q < n / 2; ++q) {
    packed[2 * q] = out[q].real();
    packed[2 * q + 1] = out[q].imag();
  }
  return packed;
}

std::vector<double> packed_power(std::span<const double> packed) {
  const auto n = packed.size();
  std::vector<double> power(n / 2 + 1);
  power[0] = packed[0] * packed[0];
  power[n / 2] = packed[1] * packed[1];
  for (std::size_t q = 1; q < n / 2; ++q) power[q] = packed[2 * q] * packed[2 * q] + packed[2 * q + 1] * packed[2 * q + 1];
  return power;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::vector<double> welch_psd(std::span<const double> record, std::size_t n_w, double fs) {
  if (n_w < 4 || n_w % 2 != 0) fail(ErrorKind::operator_contract, "welch window length must be even and >= 4");
  if (record.size() < n_w)
    fail(ErrorKind::operator_contract, "welch window " + std::to_string(n_w) + " longer than record " +
                                           std::to_string(record.size()));
  if (!(fs > 0.0)) fail(ErrorKind::operator_contract, "welch needs a positive sampling frequency");
  const auto window = hann(n_w);
  double window_power = 0.0;
  for (double w : window) window_power += w * w;
  const std::size_t step = n_w / 2;
  const std::size_t segments = (record.size() - n_w) / step + 1;

  Eigen::FFT<double> fft;
  std::vector<double> segment(n_w);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> psd(n_w / 2 + 1, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t i = 0; i < n_w; ++i) segment[i] = record[s * step + i] * window[i];
    fft.fwd(spectrum, segment);
    for (std::size_t q = 0; q <= n_w / 2; ++q) psd[q] += std::norm(spectrum[q]);
  }
  const double scale = 1.0 / (fs * window_power * static_cast<double>(segments));
  for (std::size_t q = 0; q <= n_w / 2; ++q) {
    const bool edge = q == 0 || q == n_w / 2;
    psd[q] *= edge ? scale : 2.0 * scale;
  }
  return psd;
}

std::vector<double> modal_peaks(std::span<const double> spectrum, std::size_t count, double fs, std::size_t n_w,
                                std::size_t min_separation) {
  const auto len = spectrum.size();
  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < len; ++i)
    if (spectrum[i] > spectrum[i - 1] && spectrum[i] >= spectrum[i + 1]) maxima.push_back(i);
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&](std::size_t a, std::size_t b) { return spectrum[a] > spectrum[b]; });

  std::vector<std::size_t> chosen;
  for (auto i : maxima) {
    if (chosen.size() == count) break;
    const bool clear = std::all_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
      return (i > c ? i - c : c - i) >= min_separation;
    });
    if (clear) chosen.push_back(i);
  }

  const double bin_hz = fs / static_cast<double>(n_w);
  std::vector<double> freqs;
  for (auto i : chosen) {
    const double left = spectrum[i - 1];
    const double mid = spectrum[i];
    const double right = spectrum[i + 1];
    const double curvature = left - 2.0 * mid + right;
    double offset = curvature != 0.0 ? 0.5 * (left - right) / curvature : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    freqs.push_back((static_cast<double>(i) + offset) * bin_hz);
  }
  std::sort(freqs.begin(), freqs.end());
  freqs.insert(freqs.begin(), count - freqs.size(), 0.0);
  return freqs;
}

}  // namespace pbshm::spectral
