#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pbshm::spectral {

/// Real DFT of an even-length record in packed form (length N):
///   [Re X0, Re X(N/2), Re X1, Im X1, ..., Re X(N/2-1), Im X(N/2-1)]
/// X0 and X(N/2) are real for real input, so this is an exact isomorphism
/// R^N -> C^(N/2) with no lost information.
std::vector<double> dft_packed(std::span<const double> record);

/// |X_q|^2 for q = 0 .. N/2 recovered from the packed layout.
std::vector<double> packed_power(std::span<const double> packed);

/// Periodic Hann window of length n.
std::vector<double> hann(std::size_t n);

/// One-sided Welch power spectral density: Hann window, 50% overlap,
/// density scaling (units^2/Hz). Output length n_w/2 + 1.
std::vector<double> welch_psd(std::span<const double> record, std::size_t n_w, double fs);

/// Frequencies (Hz, ascending) of the `count` largest local maxima of a
/// one-sided spectrum whose bin spacing is fs/n_w. Peaks must be at least
/// `min_separation` bins apart; equal heights go to the lower frequency.
/// Each peak is refined by three-point quadratic interpolation. Missing
/// peaks (flat spectra) are reported as 0 Hz.
std::vector<double> modal_peaks(std::span<const double> spectrum, std::size_t count, double fs, std::size_t n_w,
                                std::size_t min_separation = 2);

}  // namespace pbshm::spectral
