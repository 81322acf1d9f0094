// fft.hpp — Radix-2 FFT, window functions, and spectral peak estimation.

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace qmelt::fft {

using Complex = std::complex<double>;

// In-place iterative radix-2 Cooley-Tukey; size must be a power of two.
void transform(std::vector<Complex>& data);

std::size_t next_pow2(std::size_t n);

enum class Window { Rectangular, Hann };

// w[k] for k = 0..n-1; Hann is the periodic raised cosine.
std::vector<double> make_window(Window w, std::size_t n);

// One-sided peak description on a uniform frequency grid.
struct Peak {
    double frequency = 0.0;  // sub-bin interpolated [rad/time]
    double magnitude = 0.0;  // interpolated |S|
    std::size_t bin = 0;     // index of the local maximum
};

// Power spectrum of a complex signal sampled at spacing dt:
//   S(omega_k) = |sum_n x[n] w[n] exp(-i omega_k n dt)|^2,  omega_k = 2 pi k / (N dt)
// with the window applied before zero-padding to a power of two. Frequencies
// cover the full two-sided axis in (-pi/dt, pi/dt], returned in ascending order.
struct Spectrum {
    std::vector<double> frequency;  // ascending, two-sided [rad/time]
    std::vector<double> magnitude;  // |S| (not squared)
    double bin_width = 0.0;         // grid spacing [rad/time] (after padding)
    double resolution = 0.0;        // 2 pi / record length, pre-padding
};

Spectrum power_spectrum(std::span<const Complex> signal, double dt,
                        Window window = Window::Hann, std::size_t pad_to = 0);

// Local maxima above rel_floor * max(magnitude), refined by a three-point
// log-parabola; returned sorted by magnitude, strongest first. Maxima closer
// than min_separation to a stronger peak are discarded (window sidelobes of a
// strong carrier would otherwise register); min_separation <= 0 defaults to
// eight resolution widths.
std::vector<Peak> find_peaks(const Spectrum& spec, double rel_floor = 1e-3,
                             std::size_t max_peaks = 64, double min_separation = 0.0);

// Minimal number of base frequencies generating the peak set: every peak must
// match sum_i n_i g_i with small integers n_i, and each unexplained frequency
// opens a new generator (strongest peaks first). Periodic motion needs one
// generator, quasiperiodic two-frequency motion needs two.
int count_fundamentals(const std::vector<Peak>& peaks, double tol,
                       int max_harmonic = 8, std::size_t max_peaks = 12);

}  // namespace qmelt::fft
