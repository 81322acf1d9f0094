// meanfield.hpp — Deterministic Gross-Pitaevskii dynamics of the two coupled
// cavities: fixed-step RK4 integration, Benettin Lyapunov spectra, power
// spectra and attractor classification, and the frequency sweep.

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qmelt/fft.hpp"
#include "qmelt/model.hpp"

namespace qmelt::meanfield {

using Complex = std::complex<double>;

struct FieldState {
    Complex alpha1{0.0, 0.0};
    Complex alpha2{0.0, 0.0};
};

// Drift of the mean-field equations:
//   d a1/dt = -i [ (w1 + i g1/2 + (U1 - i eta1)|a1|^2) a1 - 2 J a1* a2 ] - (k1/2) a1
//   d a2/dt = -i [ (w2 + i g2/2 + (U2 - i eta2)|a2|^2) a2 -   J a1^2   ] - (k2/2) a2
FieldState gpe_drift(const FieldState& state, const model::ModelParams& params);

// Action of the drift's real-linear Jacobian on a tangent vector. The map is
// linear over R, not C (conjugates enter through the Kerr and tunneling
// terms), which is why the tangent space is four-dimensional real.
FieldState gpe_tangent(const FieldState& state, const FieldState& tangent,
                       const model::ModelParams& params);

struct Trajectory {
    std::vector<double> times;
    std::vector<FieldState> states;
    model::ModelParams params;
};

inline constexpr double kDivergenceThreshold = 1e6;

// Raised when |alpha| crosses the divergence threshold during integration.
struct DivergenceError : std::runtime_error {
    double blow_up_time;
    explicit DivergenceError(double t)
        : std::runtime_error("mean-field integration diverged at t = " + std::to_string(t)),
          blow_up_time(t) {}
};

struct IntegrateOptions {
    double dt = 1e-3;
    double t_end = 1e4;
    std::size_t sample_stride = 10;  // store every n-th step
};

// Classical RK4 with fixed step; samples at t = 0 and every stride-th step.
Trajectory integrate_gpe(const FieldState& initial, const model::ModelParams& params,
                         const IntegrateOptions& opts);

struct LyapunovOptions {
    double dt = 1e-3;
    double transient_time = 100.0;    // discarded before accumulation
    double renorm_interval = 0.1;     // time between re-orthonormalizations
    double total_time = 1e4;          // accumulation window after transient
    double convergence_tol = 5e-3;    // residual above this flags non-convergence
};

struct LyapunovSpectrum {
    std::array<double, 4> exponents{};  // descending
    double convergence_error = 0.0;     // half-sample split residual
    bool converged = true;
};

// Benettin's method: the four-dimensional real tangent frame is evolved with
// the trajectory using the analytic Jacobian and re-orthonormalized at fixed
// intervals; exponents are the time averages of the log stretch factors.
LyapunovSpectrum lyapunov_spectrum(const model::ModelParams& params, const FieldState& initial,
                                   const LyapunovOptions& opts);

struct SpectrumOptions {
    double transient_time = 50.0;  // discarded before the transform
    fft::Window window = fft::Window::Hann;
};

// Windowed discrete Fourier magnitude of alpha_mode(t) past the transient.
// mode is 1 or 2. Throws if fewer than 64 post-transient samples remain.
fft::Spectrum power_spectrum(const Trajectory& traj, int mode,
                             const SpectrumOptions& opts = {});

enum class AttractorClass { FixedPoint, LimitCycle, LimitTorus, Irregular };

std::string to_string(AttractorClass c);

struct Classification {
    AttractorClass kind = AttractorClass::Irregular;
    int zero_exponents = 0;
    int spectral_fundamentals = 0;
    bool cross_check_ok = true;
    std::string diagnostics;
};

// Counts near-zero Lyapunov exponents (|lambda| < zero_tol): 0 fixed point,
// 1 limit cycle, 2 limit torus; any positive exponent is irregular. The
// spectral fundamental count is a cross-check only; a mismatch downgrades
// the result to Irregular with diagnostics.
Classification classify_attractor(const std::vector<fft::Peak>& peaks, double peak_tol,
                                  const LyapunovSpectrum& lyapunov, double zero_tol = 5e-3);

struct SweepPoint {
    double omega = 0.0;
    fft::Spectrum spectrum;          // normalized to unit peak
    std::vector<fft::Peak> peaks;
    Classification classification;
    LyapunovSpectrum lyapunov;
    std::optional<std::string> error;  // per-point failure, sweep continues
};

struct SweepOptions {
    FieldState initial{Complex(0.05, 0.0), Complex(0.05, 0.0)};
    IntegrateOptions integrate{1e-3, 1e4, 10};
    LyapunovOptions lyapunov{};
    SpectrumOptions spectrum{};
    double zero_tol = 5e-3;
    int threads = 0;  // 0: hardware concurrency
};

// Independent classified run per frequency; the template's omega values are
// overwritten by the grid entries, everything else is shared.
std::vector<SweepPoint> sweep_omega(const std::vector<double>& omega_grid,
                                    const model::ModelParams& params_template,
                                    const SweepOptions& opts);

}  // namespace qmelt::meanfield
