#include "chaosot/fft.hpp"

#include <algorithm>
#include <cmath>

#include "chaosot/error.hpp"

namespace chaosot {

bool is_power_of_two(std::size_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw DimensionError("fft: length " + std::to_string(n) + " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles from the exact angle rather than by repeated multiplication.
      const double ang = sign * 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(len);
      const Complex w(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& c : a) c *= inv;
  }
}

std::vector<Complex> fft_real(std::span<const double> x) {
  const std::size_t m = x.size();
  if (!is_power_of_two(m)) throw DimensionError("fft_real: length " + std::to_string(m) + " is not a power of two");
  std::vector<Complex> a(x.begin(), x.end());
  fft_inplace(a, false);
  a.resize(m / 2 + 1);
  return a;
}

std::vector<double> ifft_real(std::span<const Complex> spectrum, std::size_t m, double* imag_residue) {
  if (!is_power_of_two(m)) throw DimensionError("ifft_real: length " + std::to_string(m) + " is not a power of two");
  if (spectrum.size() != m / 2 + 1) throw DimensionError("ifft_real: expected m/2+1 bins");
  std::vector<Complex> a(m);
  a[0] = Complex(spectrum[0].real(), 0.0);
  for (std::size_t k = 1; k < m / 2; ++k) {
    a[k] = spectrum[k];
    a[m - k] = std::conj(spectrum[k]);
  }
  if (m > 1) a[m / 2] = Complex(spectrum[m / 2].real(), 0.0);
  fft_inplace(a, true);
  std::vector<double> out(m);
  double residue = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = a[i].real();
    residue = std::max(residue, std::abs(a[i].imag()));
  }
  if (imag_residue) *imag_residue = residue;
  return out;
}

std::vector<double> energy_spectrum(std::span<const double> x) {
  const std::size_t m = x.size();
  if (m == 0) throw DimensionError("energy_spectrum: empty signal");
  if (!is_power_of_two(m)) {
    // Direct DFT for grids such as m = 20 that the radix-2 path cannot take.
    std::vector<double> e(m);
    for (std::size_t k = 0; k < m; ++k) {
      Complex acc(0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double ang = -2.0 * M_PI * static_cast<double>((k * i) % m) / static_cast<double>(m);
        acc += x[i] * Complex(std::cos(ang), std::sin(ang));
      }
      e[k] = std::norm(acc);
    }
    return e;
  }
  const auto half = fft_real(x);
  std::vector<double> e(m);
  for (std::size_t k = 0; k <= m / 2; ++k) e[k] = std::norm(half[k]);
  for (std::size_t k = m / 2 + 1; k < m; ++k) e[k] = e[m - k];
  return e;
}

}  // namespace chaosot
