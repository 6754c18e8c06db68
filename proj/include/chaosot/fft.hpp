#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace chaosot {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n) noexcept;

/// In-place iterative radix-2 FFT. `inverse` applies the 1/n normalisation.
void fft_inplace(std::vector<Complex>& data, bool inverse);

/// Forward DFT of a real signal, bins 0..m/2. X_k = sum_i x_i exp(-2 pi i k i / m).
std::vector<Complex> fft_real(std::span<const double> x);

/// Inverse of fft_real. Imaginary parts of bin 0 and the Nyquist bin are
/// discarded so the result is exactly real. `imag_residue`, when given,
/// receives the largest imaginary part seen before truncation.
std::vector<double> ifft_real(std::span<const Complex> spectrum, std::size_t m, double* imag_residue = nullptr);

/// |X_k|^2 over all m bins (conjugate pairs counted separately).
std::vector<double> energy_spectrum(std::span<const double> x);

}  // namespace chaosot
