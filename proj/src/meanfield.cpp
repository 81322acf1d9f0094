#include "qmelt/meanfield.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace qmelt::meanfield {

namespace {

constexpr Complex kI{0.0, 1.0};

inline bool diverged(const FieldState& s) {
    return !(std::norm(s.alpha1) < kDivergenceThreshold * kDivergenceThreshold &&
             std::norm(s.alpha2) < kDivergenceThreshold * kDivergenceThreshold);
}

inline FieldState axpy(const FieldState& a, double c, const FieldState& b) {
    return {a.alpha1 + c * b.alpha1, a.alpha2 + c * b.alpha2};
}

}  // namespace

FieldState gpe_drift(const FieldState& s, const model::ModelParams& p) {
    const Complex a1 = s.alpha1, a2 = s.alpha2;
    const double n1 = std::norm(a1), n2 = std::norm(a2);
    const Complex c1(p.omega[0], 0.5 * p.pump[0]);
    const Complex c2(p.omega[1], 0.5 * p.pump[1]);
    const Complex u1(p.kerr[0], -p.two_photon_loss[0]);
    const Complex u2(p.kerr[1], -p.two_photon_loss[1]);
    FieldState d;
    d.alpha1 = -kI * ((c1 + u1 * n1) * a1 - 2.0 * p.tunnel * std::conj(a1) * a2) -
               0.5 * p.one_photon_loss[0] * a1;
    d.alpha2 = -kI * ((c2 + u2 * n2) * a2 - p.tunnel * a1 * a1) -
               0.5 * p.one_photon_loss[1] * a2;
    return d;
}

FieldState gpe_tangent(const FieldState& s, const FieldState& v, const model::ModelParams& p) {
    const Complex a1 = s.alpha1, a2 = s.alpha2;
    const Complex d1 = v.alpha1, d2 = v.alpha2;
    const Complex c1(p.omega[0], 0.5 * p.pump[0]);
    const Complex c2(p.omega[1], 0.5 * p.pump[1]);
    const Complex u1(p.kerr[0], -p.two_photon_loss[0]);
    const Complex u2(p.kerr[1], -p.two_photon_loss[1]);
    const double J = p.tunnel;

    FieldState out;
    out.alpha1 = (-kI * (c1 + 2.0 * u1 * std::norm(a1)) - 0.5 * p.one_photon_loss[0]) * d1 +
                 (-kI * (u1 * a1 * a1 - 2.0 * J * a2)) * std::conj(d1) +
                 (2.0 * kI * J * std::conj(a1)) * d2;
    out.alpha2 = (2.0 * kI * J * a1) * d1 +
                 (-kI * (c2 + 2.0 * u2 * std::norm(a2)) - 0.5 * p.one_photon_loss[1]) * d2 +
                 (-kI * u2 * a2 * a2) * std::conj(d2);
    return out;
}

namespace {

inline FieldState rk4_step(const FieldState& s, const model::ModelParams& p, double dt) {
    const FieldState k1 = gpe_drift(s, p);
    const FieldState k2 = gpe_drift(axpy(s, 0.5 * dt, k1), p);
    const FieldState k3 = gpe_drift(axpy(s, 0.5 * dt, k2), p);
    const FieldState k4 = gpe_drift(axpy(s, dt, k3), p);
    FieldState out = s;
    out.alpha1 += dt / 6.0 * (k1.alpha1 + 2.0 * k2.alpha1 + 2.0 * k3.alpha1 + k4.alpha1);
    out.alpha2 += dt / 6.0 * (k1.alpha2 + 2.0 * k2.alpha2 + 2.0 * k3.alpha2 + k4.alpha2);
    return out;
}

}  // namespace

Trajectory integrate_gpe(const FieldState& initial, const model::ModelParams& params,
                         const IntegrateOptions& opts) {
    if (opts.dt <= 0.0 || opts.t_end <= 0.0) {
        throw std::invalid_argument("integrate_gpe: dt and t_end must be positive");
    }
    params.validate();
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(opts.t_end / opts.dt));
    const std::size_t stride = std::max<std::size_t>(1, opts.sample_stride);

    Trajectory traj;
    traj.params = params;
    traj.times.reserve(n_steps / stride + 2);
    traj.states.reserve(n_steps / stride + 2);
    traj.times.push_back(0.0);
    traj.states.push_back(initial);

    FieldState s = initial;
    for (std::size_t i = 1; i <= n_steps; ++i) {
        s = rk4_step(s, params, opts.dt);
        if (diverged(s)) throw DivergenceError(static_cast<double>(i) * opts.dt);
        if (i % stride == 0) {
            traj.times.push_back(static_cast<double>(i) * opts.dt);
            traj.states.push_back(s);
        }
    }
    return traj;
}

namespace {

// Tangent frame: four vectors, each a complex pair; R^4 inner product.
using Frame = std::array<FieldState, 4>;

inline double dot_r4(const FieldState& u, const FieldState& v) {
    return u.alpha1.real() * v.alpha1.real() + u.alpha1.imag() * v.alpha1.imag() +
           u.alpha2.real() * v.alpha2.real() + u.alpha2.imag() * v.alpha2.imag();
}

// Modified Gram-Schmidt; returns the four stretch norms.
std::array<double, 4> orthonormalize(Frame& f) {
    std::array<double, 4> norms{};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < i; ++j) {
            const double proj = dot_r4(f[i], f[j]);
            f[i].alpha1 -= proj * f[j].alpha1;
            f[i].alpha2 -= proj * f[j].alpha2;
        }
        const double nrm = std::sqrt(dot_r4(f[i], f[i]));
        norms[i] = nrm;
        const double inv = 1.0 / nrm;
        f[i].alpha1 *= inv;
        f[i].alpha2 *= inv;
    }
    return norms;
}

// One RK4 step of the state together with the tangent frame.
void rk4_step_with_tangents(FieldState& s, Frame& f, const model::ModelParams& p, double dt) {
    const FieldState k1 = gpe_drift(s, p);
    const FieldState s2 = axpy(s, 0.5 * dt, k1);
    const FieldState k2 = gpe_drift(s2, p);
    const FieldState s3 = axpy(s, 0.5 * dt, k2);
    const FieldState k3 = gpe_drift(s3, p);
    const FieldState s4 = axpy(s, dt, k3);
    const FieldState k4 = gpe_drift(s4, p);

    for (auto& v : f) {
        const FieldState m1 = gpe_tangent(s, v, p);
        const FieldState m2 = gpe_tangent(s2, axpy(v, 0.5 * dt, m1), p);
        const FieldState m3 = gpe_tangent(s3, axpy(v, 0.5 * dt, m2), p);
        const FieldState m4 = gpe_tangent(s4, axpy(v, dt, m3), p);
        v.alpha1 += dt / 6.0 * (m1.alpha1 + 2.0 * m2.alpha1 + 2.0 * m3.alpha1 + m4.alpha1);
        v.alpha2 += dt / 6.0 * (m1.alpha2 + 2.0 * m2.alpha2 + 2.0 * m3.alpha2 + m4.alpha2);
    }
    FieldState out = s;
    out.alpha1 += dt / 6.0 * (k1.alpha1 + 2.0 * k2.alpha1 + 2.0 * k3.alpha1 + k4.alpha1);
    out.alpha2 += dt / 6.0 * (k1.alpha2 + 2.0 * k2.alpha2 + 2.0 * k3.alpha2 + k4.alpha2);
    s = out;
}

}  // namespace

LyapunovSpectrum lyapunov_spectrum(const model::ModelParams& params, const FieldState& initial,
                                   const LyapunovOptions& opts) {
    if (opts.dt <= 0.0 || opts.total_time <= 0.0 || opts.renorm_interval <= 0.0) {
        throw std::invalid_argument("lyapunov_spectrum: times must be positive");
    }
    params.validate();

    FieldState s = initial;
    const std::size_t transient_steps =
        static_cast<std::size_t>(std::llround(opts.transient_time / opts.dt));
    for (std::size_t i = 0; i < transient_steps; ++i) {
        s = rk4_step(s, params, opts.dt);
        if (diverged(s)) throw DivergenceError(static_cast<double>(i) * opts.dt);
    }

    Frame frame{FieldState{Complex(1, 0), Complex(0, 0)}, FieldState{Complex(0, 1), Complex(0, 0)},
                FieldState{Complex(0, 0), Complex(1, 0)}, FieldState{Complex(0, 0), Complex(0, 1)}};

    const std::size_t steps_per_interval =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opts.renorm_interval / opts.dt)));
    const std::size_t n_intervals = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(opts.total_time / opts.renorm_interval)));
    const double interval_time = static_cast<double>(steps_per_interval) * opts.dt;

    std::array<double, 4> log_sum{};        // full window
    std::array<double, 4> log_sum_half{};   // second half only
    const std::size_t half_start = n_intervals / 2;

    for (std::size_t k = 0; k < n_intervals; ++k) {
        for (std::size_t i = 0; i < steps_per_interval; ++i) {
            rk4_step_with_tangents(s, frame, params, opts.dt);
        }
        if (diverged(s)) {
            throw DivergenceError(opts.transient_time +
                                  static_cast<double>(k + 1) * interval_time);
        }
        const auto norms = orthonormalize(frame);
        for (int j = 0; j < 4; ++j) {
            const double l = std::log(norms[j]);
            log_sum[j] += l;
            if (k >= half_start) log_sum_half[j] += l;
        }
    }

    const double t_total = static_cast<double>(n_intervals) * interval_time;
    const double t_half = static_cast<double>(n_intervals - half_start) * interval_time;

    LyapunovSpectrum out;
    double max_resid = 0.0;
    for (int j = 0; j < 4; ++j) {
        out.exponents[j] = log_sum[j] / t_total;
        const double half_est = log_sum_half[j] / t_half;
        max_resid = std::max(max_resid, 0.5 * std::abs(half_est - out.exponents[j]));
    }
    std::sort(out.exponents.begin(), out.exponents.end(), std::greater<>());
    out.convergence_error = max_resid;
    out.converged = max_resid <= opts.convergence_tol;
    return out;
}

fft::Spectrum power_spectrum(const Trajectory& traj, int mode, const SpectrumOptions& opts) {
    if (mode != 1 && mode != 2) throw std::invalid_argument("power_spectrum: mode must be 1 or 2");
    if (traj.times.size() < 2) throw std::invalid_argument("power_spectrum: trajectory too short");

    const auto begin_it =
        std::lower_bound(traj.times.begin(), traj.times.end(), opts.transient_time);
    const std::size_t first = static_cast<std::size_t>(begin_it - traj.times.begin());
    if (traj.times.size() - first < 64) {
        throw std::invalid_argument("power_spectrum: fewer than 64 samples past the transient");
    }
    const double dt = traj.times[first + 1] - traj.times[first];

    std::vector<Complex> sig(traj.times.size() - first);
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const auto& st = traj.states[first + i];
        sig[i] = (mode == 1) ? st.alpha1 : st.alpha2;
    }
    return fft::power_spectrum(sig, dt, opts.window);
}

std::string to_string(AttractorClass c) {
    switch (c) {
        case AttractorClass::FixedPoint: return "fixed_point";
        case AttractorClass::LimitCycle: return "limit_cycle";
        case AttractorClass::LimitTorus: return "limit_torus";
        case AttractorClass::Irregular: return "irregular";
    }
    return "irregular";
}

Classification classify_attractor(const std::vector<fft::Peak>& peaks, double peak_tol,
                                  const LyapunovSpectrum& lyapunov, double zero_tol) {
    Classification out;
    out.spectral_fundamentals = fft::count_fundamentals(peaks, peak_tol);

    int zeros = 0;
    bool positive = false;
    for (double l : lyapunov.exponents) {
        if (std::abs(l) < zero_tol) {
            ++zeros;
        } else if (l > 0.0) {
            positive = true;
        }
    }
    out.zero_exponents = zeros;

    if (positive) {
        out.kind = AttractorClass::Irregular;
        out.diagnostics = "positive Lyapunov exponent";
        return out;
    }
    switch (zeros) {
        case 0: out.kind = AttractorClass::FixedPoint; break;
        case 1: out.kind = AttractorClass::LimitCycle; break;
        case 2: out.kind = AttractorClass::LimitTorus; break;
        default:
            out.kind = AttractorClass::Irregular;
            out.diagnostics = "more than two near-zero exponents";
            return out;
    }

    const int expected =
        (out.kind == AttractorClass::FixedPoint) ? 0 : (out.kind == AttractorClass::LimitCycle ? 1 : 2);
    if (out.spectral_fundamentals != expected) {
        out.cross_check_ok = false;
        out.diagnostics = "Lyapunov count " + std::to_string(zeros) + " vs spectral fundamentals " +
                          std::to_string(out.spectral_fundamentals);
        out.kind = AttractorClass::Irregular;
    }
    return out;
}

std::vector<SweepPoint> sweep_omega(const std::vector<double>& omega_grid,
                                    const model::ModelParams& params_template,
                                    const SweepOptions& opts) {
    if (omega_grid.empty()) throw std::invalid_argument("sweep_omega: empty grid");

    std::vector<SweepPoint> points(omega_grid.size());
    const unsigned hw = std::thread::hardware_concurrency();
    const unsigned n_threads = opts.threads > 0 ? static_cast<unsigned>(opts.threads)
                                                : std::max(1u, hw);

    auto run_point = [&](std::size_t idx) {
        SweepPoint& pt = points[idx];
        pt.omega = omega_grid[idx];
        model::ModelParams p = params_template;
        p.omega = {pt.omega, pt.omega};
        try {
            Trajectory traj = integrate_gpe(opts.initial, p, opts.integrate);
            pt.spectrum = power_spectrum(traj, 1, opts.spectrum);
            double m = 0.0;
            for (double v : pt.spectrum.magnitude) m = std::max(m, v);
            if (m > 0.0) {
                for (double& v : pt.spectrum.magnitude) v /= m;
            }
            pt.peaks = fft::find_peaks(pt.spectrum);
            pt.lyapunov = lyapunov_spectrum(p, opts.initial, opts.lyapunov);
            pt.classification = classify_attractor(pt.peaks, 3.0 * pt.spectrum.resolution,
                                                   pt.lyapunov, opts.zero_tol);
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
    };

    if (n_threads <= 1 || points.size() == 1) {
        for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
    } else {
        std::vector<std::thread> workers;
        std::atomic<std::size_t> next{0};
        for (unsigned t = 0; t < n_threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1)) {
                    run_point(i);
                }
            });
        }
        for (auto& w : workers) w.join();
    }
    return points;
}

}  // namespace qmelt::meanfield
