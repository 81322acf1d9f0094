// twa.hpp — Truncated-Wigner ensemble engine: Wigner sampling of the initial
// coherent state, Ito Euler-Maruyama integration of the Langevin equations
// with multiplicative noise, and streamed Weyl-symbol reductions.
//
// All fields are the rescaled (tilde) amplitudes; occupations per scaling
// parameter are |alpha~|^2. Every trajectory owns a counter-based random
// stream keyed by (master_seed, trajectory index), and reductions are merged
// in fixed block order, so results are bit-identical for any thread count.

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "qmelt/meanfield.hpp"
#include "qmelt/model.hpp"
#include "qmelt/rng.hpp"

namespace qmelt::twa {

using Complex = std::complex<double>;
using meanfield::FieldState;

// Unit-variance complex Gaussian increments for one step, before the sqrt(dt)
// scaling: chi drives the additive pump noise, xi the multiplicative
// two-photon-loss noise.
struct NoiseDraw {
    Complex chi1{0.0, 0.0}, chi2{0.0, 0.0};
    Complex xi1{0.0, 0.0}, xi2{0.0, 0.0};
};

inline NoiseDraw draw_noise(rng::GaussianStream& stream) {
    NoiseDraw n;
    n.chi1 = stream.complex_normal();
    n.chi2 = stream.complex_normal();
    n.xi1 = stream.complex_normal();
    n.xi2 = stream.complex_normal();
    return n;
}

enum class Scheme { EulerMaruyama, Heun };

struct EnsembleConfig {
    std::size_t n_traj = 30000;
    double aleph = 1.0;
    Complex alpha0{0.05, 0.0};  // coherent seed for both modes
    double dt = 1e-3;
    double t_end = 100.0;
    std::size_t sample_stride = 100;  // reductions every stride-th step
    std::uint64_t master_seed = 1;

    bool noise_enabled = true;  // disables both initial spread and dynamical noise
    Scheme scheme = Scheme::EulerMaruyama;
    double divergence_threshold = 1e3;

    // two-time correlation taps: conj(a1(t0+tau)) a1(t0), averaged over
    // trajectories and n_t0 reference times spaced dt0 apart
    double corr_t0 = -1.0;  // < 0 disables taps
    double corr_tau_max = 0.0;
    std::size_t corr_stride = 50;  // tau grid in units of dt
    std::size_t corr_n_t0 = 1;
    double corr_dt0 = 0.5;

    std::vector<double> snapshot_times;  // full field snapshots at these times
    bool store_fields = false;           // keep every sampled state per trajectory

    int threads = 0;  // 0: hardware concurrency

    void validate(const model::TildeParams& params) const;
};

struct Ensemble {
    EnsembleConfig config;
    model::TildeParams params;

    std::vector<double> times;  // reduction sample times
    // streamed sums over live trajectories, one entry per sample time
    std::vector<Complex> sum_alpha1, sum_alpha2;
    std::vector<double> sum_n1, sum_n2;       // |a1|^2, |a2|^2
    std::vector<double> min_n1, max_n1;       // mode-1 occupation envelope
    std::vector<Complex> sum_phase1;          // e^{i arg a1}
    std::vector<std::size_t> alive;           // live-trajectory count

    // correlation taps (empty when disabled)
    std::vector<double> corr_taus;
    std::vector<Complex> corr_sum;
    std::vector<std::size_t> corr_count;
    double corr_t0 = -1.0;

    // snapshots[k][traj]; diverged trajectories hold NaN fields
    std::vector<std::vector<FieldState>> snapshots;
    std::vector<double> snapshot_times;

    // optional full storage: fields[traj][sample]
    std::vector<std::vector<FieldState>> fields;

    std::size_t n_traj = 0;
    std::size_t diverged_count = 0;
};

// Wigner sampling of the two-mode coherent seed:
//   a~_k(0) = alpha0 + zeta_k / sqrt(2 aleph)
FieldState sample_initial(const EnsembleConfig& config, rng::GaussianStream& stream);

// Deterministic part of the Langevin equations, including the quantum drift
// correction (|a~|^2 - 1/aleph) and optional single-photon damping.
FieldState twa_drift(const FieldState& s, const model::TildeParams& p, double aleph);

// One stochastic step. Noise enters rotated by -i alongside the drift; the
// multiplicative amplitude is evaluated at the pre-step field (Ito point).
FieldState twa_step(const FieldState& s, const model::TildeParams& p, double aleph, double dt,
                    const NoiseDraw& noise, Scheme scheme = Scheme::EulerMaruyama);

// Integrate the full ensemble. Throws std::runtime_error if more than 1% of
// trajectories diverge (dt too large for the chosen aleph).
Ensemble run_ensemble(const EnsembleConfig& config, const model::TildeParams& params);

// Weyl-ordered monomial (a_i^dagger)^n (a_j)^m averaged over trajectories.
// The streamed reductions cover 1, a_k, and |a_k|^2; other monomials need
// store_fields.
struct Monomial {
    int dagger_power = 0;
    int dagger_mode = 1;
    int power = 0;
    int mode = 1;
};

std::vector<Complex> weyl_expectation(const Ensemble& ens, const Monomial& obs);

// Mode occupation per aleph: Weyl |a~|^2, minus 1/(2 aleph) when the caller
// asks for normal ordering.
std::vector<double> occupation(const Ensemble& ens, int mode, bool normal_order = false);

struct Envelope {
    std::vector<double> times, minimum, maximum, mean;
};

// Pointwise extrema and mean of the mode-1 occupation across trajectories.
Envelope occupation_envelope(const Ensemble& ens);

// Resultant mean phasor of mode 1, sum e^{i theta_n} / alive, per sample time.
std::vector<Complex> phase_resultant(const Ensemble& ens);

}  // namespace qmelt::twa
