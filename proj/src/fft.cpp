#include "qmelt/fft.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qmelt::fft {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void transform(std::vector<Complex>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("fft::transform: size must be a power of two");
    }
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const Complex wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    if (w == Window::Hann) {
        for (std::size_t k = 0; k < n; ++k) {
            out[k] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n));
        }
    }
    return out;
}

Spectrum power_spectrum(std::span<const Complex> signal, double dt, Window window,
                        std::size_t pad_to) {
    if (signal.size() < 4) throw std::invalid_argument("power_spectrum: signal too short");
    if (dt <= 0.0) throw std::invalid_argument("power_spectrum: dt must be positive");

    const std::size_t n = signal.size();
    const std::size_t m = pad_to ? next_pow2(std::max(pad_to, n)) : next_pow2(n);
    const auto win = make_window(window, n);

    std::vector<Complex> buf(m, Complex(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) buf[k] = signal[k] * win[k];
    transform(buf);

    Spectrum spec;
    spec.bin_width = 2.0 * M_PI / (static_cast<double>(m) * dt);
    spec.resolution = 2.0 * M_PI / (static_cast<double>(n) * dt);
    spec.frequency.resize(m);
    spec.magnitude.resize(m);
    // unwrap to ascending two-sided axis: bins m/2..m-1 are negative frequencies
    const std::size_t half = m / 2;
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t src = (k + half) % m;
        const double f = (static_cast<double>(k) - static_cast<double>(half)) * spec.bin_width;
        spec.frequency[k] = f;
        spec.magnitude[k] = std::abs(buf[src]);
    }
    return spec;
}

std::vector<Peak> find_peaks(const Spectrum& spec, double rel_floor, std::size_t max_peaks,
                             double min_separation) {
    const auto& mag = spec.magnitude;
    if (mag.size() < 3) return {};
    const double peak_max = *std::max_element(mag.begin(), mag.end());
    if (peak_max <= 0.0) return {};
    const double floor = rel_floor * peak_max;
    if (min_separation <= 0.0) {
        min_separation = 8.0 * (spec.resolution > 0.0 ? spec.resolution : spec.bin_width);
    }

    std::vector<Peak> maxima;
    for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
        if (mag[k] < floor) continue;
        if (!(mag[k] >= mag[k - 1] && mag[k] > mag[k + 1])) continue;
        Peak p;
        p.bin = k;
        // three-point log-parabola refinement
        const double eps = 1e-300;
        const double l = std::log(mag[k - 1] + eps);
        const double c = std::log(mag[k] + eps);
        const double r = std::log(mag[k + 1] + eps);
        const double denom = l - 2.0 * c + r;
        double delta = 0.0;
        if (denom < 0.0) delta = 0.5 * (l - r) / denom;
        delta = std::clamp(delta, -0.5, 0.5);
        p.frequency = spec.frequency[k] + delta * spec.bin_width;
        p.magnitude = std::exp(c - 0.25 * (l - r) * delta);
        maxima.push_back(p);
    }
    std::sort(maxima.begin(), maxima.end(),
              [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });

    std::vector<Peak> peaks;
    for (const Peak& p : maxima) {
        bool shadowed = false;
        for (const Peak& kept : peaks) {
            if (std::abs(p.frequency - kept.frequency) < min_separation) {
                shadowed = true;
                break;
            }
        }
        if (!shadowed) peaks.push_back(p);
        if (peaks.size() >= max_peaks) break;
    }
    return peaks;
}

namespace {

// Can offset be written as sum_i n_i * gen_i with |n_i| <= max_n? Depth-first
// over the (at most three) generators.
bool representable(double offset, const std::vector<double>& gens, int max_n, double tol,
                   std::size_t idx = 0) {
    if (idx == gens.size()) return std::abs(offset) <= tol;
    for (int n = -max_n; n <= max_n; ++n) {
        if (representable(offset - n * gens[idx], gens, max_n, tol, idx + 1)) return true;
    }
    return false;
}

}  // namespace

int count_fundamentals(const std::vector<Peak>& peaks, double tol, int max_harmonic,
                       std::size_t max_peaks) {
    if (peaks.empty()) return 0;
    const std::size_t n = std::min(max_peaks, peaks.size());
    std::vector<double> gens;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = peaks[i].frequency;
        if (std::abs(f) <= tol) continue;  // DC line carries no frequency
        if (representable(f, gens, max_harmonic, tol)) continue;
        gens.push_back(std::abs(f));
        if (gens.size() >= 3) break;  // anything beyond two is already "many"
    }
    return static_cast<int>(gens.size());
}

}  // namespace qmelt::fft
