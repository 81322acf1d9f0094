#include "qmelt/twa.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace qmelt::twa {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline bool bad(const FieldState& s, double threshold) {
    return !(std::norm(s.alpha1) < threshold * threshold &&
             std::norm(s.alpha2) < threshold * threshold);
}

// Additive noise amplitude per mode: pump plus the optional single-photon
// channel, sqrt((gamma + kappa (1 + 2 n_th)) / (2 aleph)).
inline double additive_amp(const model::TildeParams& p, double aleph, int k) {
    const double rate = p.pump[k] + p.one_photon_loss[k] * (1.0 + 2.0 * p.thermal_occupation);
    return std::sqrt(rate / (2.0 * aleph));
}

}  // namespace

void EnsembleConfig::validate(const model::TildeParams& params) const {
    params.validate();
    if (n_traj < 1) throw std::invalid_argument("ensemble: n_traj must be >= 1");
    if (!(dt > 0.0) || !(t_end > 0.0)) {
        throw std::invalid_argument("ensemble: dt and t_end must be positive");
    }
    const double eta = std::max(params.two_photon_loss[0], params.two_photon_loss[1]);
    if (eta * dt > 1e-2 + 1e-12) {
        throw std::invalid_argument("ensemble: eta * dt must not exceed 1e-2");
    }
    if (!(aleph > 0.0)) throw std::invalid_argument("ensemble: aleph must be positive");
    if (sample_stride < 1) throw std::invalid_argument("ensemble: sample_stride must be >= 1");
    if (corr_t0 >= 0.0) {
        if (corr_stride < 1) throw std::invalid_argument("ensemble: corr_stride must be >= 1");
        if (!(corr_tau_max > 0.0)) {
            throw std::invalid_argument("ensemble: corr_tau_max must be positive");
        }
        if (corr_t0 + corr_tau_max > t_end + 1e-12) {
            throw std::invalid_argument("ensemble: correlation window exceeds t_end");
        }
        const double tap_dt = static_cast<double>(corr_stride) * dt;
        auto on_grid = [&](double t) {
            const double ratio = t / tap_dt;
            return std::abs(ratio - std::round(ratio)) < 1e-9;
        };
        if (!on_grid(corr_t0)) {
            throw std::invalid_argument("ensemble: corr_t0 must be a multiple of corr_stride * dt");
        }
        if (corr_n_t0 > 1) {
            if (!on_grid(corr_dt0)) {
                throw std::invalid_argument(
                    "ensemble: corr_dt0 must be a multiple of corr_stride * dt");
            }
            if (corr_t0 + corr_dt0 * static_cast<double>(corr_n_t0 - 1) + corr_tau_max >
                t_end + 1e-12) {
                throw std::invalid_argument("ensemble: correlation references exceed t_end");
            }
        }
    }
    for (double ts : snapshot_times) {
        if (ts < 0.0 || ts > t_end + 1e-12) {
            throw std::invalid_argument("ensemble: snapshot time outside run window");
        }
    }
}

FieldState sample_initial(const EnsembleConfig& config, rng::GaussianStream& stream) {
    FieldState s{config.alpha0, config.alpha0};
    if (config.noise_enabled) {
        const double w = 1.0 / std::sqrt(2.0 * config.aleph);
        s.alpha1 += w * stream.complex_normal();
        s.alpha2 += w * stream.complex_normal();
    }
    return s;
}

FieldState twa_drift(const FieldState& s, const model::TildeParams& p, double aleph) {
    const Complex a1 = s.alpha1, a2 = s.alpha2;
    const double inv_aleph = 1.0 / aleph;
    const Complex c1(p.omega[0], 0.5 * p.pump[0]);
    const Complex c2(p.omega[1], 0.5 * p.pump[1]);
    const Complex u1(p.kerr[0], -p.two_photon_loss[0]);
    const Complex u2(p.kerr[1], -p.two_photon_loss[1]);
    FieldState d;
    d.alpha1 = -kI * ((c1 + u1 * (std::norm(a1) - inv_aleph)) * a1 -
                      2.0 * p.tunnel * std::conj(a1) * a2) -
               0.5 * p.one_photon_loss[0] * a1;
    d.alpha2 = -kI * ((c2 + u2 * (std::norm(a2) - inv_aleph)) * a2 - p.tunnel * a1 * a1) -
               0.5 * p.one_photon_loss[1] * a2;
    return d;
}

namespace {

// -i * (additive + multiplicative) noise increment per sqrt(dt), at state s.
inline FieldState noise_increment(const FieldState& s, const model::TildeParams& p, double aleph,
                                  const NoiseDraw& n) {
    const double add1 = additive_amp(p, aleph, 0);
    const double add2 = additive_amp(p, aleph, 1);
    const double mul1 = std::sqrt(2.0 * p.two_photon_loss[0] * std::norm(s.alpha1) / aleph);
    const double mul2 = std::sqrt(2.0 * p.two_photon_loss[1] * std::norm(s.alpha2) / aleph);
    FieldState out;
    out.alpha1 = -kI * (add1 * n.chi1 + mul1 * n.xi1);
    out.alpha2 = -kI * (add2 * n.chi2 + mul2 * n.xi2);
    return out;
}

}  // namespace

FieldState twa_step(const FieldState& s, const model::TildeParams& p, double aleph, double dt,
                    const NoiseDraw& noise, Scheme scheme) {
    const double rdt = std::sqrt(dt);
    const FieldState f0 = twa_drift(s, p, aleph);
    const FieldState g0 = noise_increment(s, p, aleph, noise);

    FieldState pred;
    pred.alpha1 = s.alpha1 + dt * f0.alpha1 + rdt * g0.alpha1;
    pred.alpha2 = s.alpha2 + dt * f0.alpha2 + rdt * g0.alpha2;
    if (scheme == Scheme::EulerMaruyama) return pred;

    // Stochastic Heun: average drift and diffusion between the two endpoints.
    const FieldState f1 = twa_drift(pred, p, aleph);
    const FieldState g1 = noise_increment(pred, p, aleph, noise);
    FieldState out;
    out.alpha1 = s.alpha1 + 0.5 * dt * (f0.alpha1 + f1.alpha1) + 0.5 * rdt * (g0.alpha1 + g1.alpha1);
    out.alpha2 = s.alpha2 + 0.5 * dt * (f0.alpha2 + f1.alpha2) + 0.5 * rdt * (g0.alpha2 + g1.alpha2);
    return out;
}

namespace {

struct TapPlan {
    bool enabled = false;
    std::vector<std::size_t> ref_steps;
    std::size_t stride = 1;
    std::size_t n_tau = 0;  // tau indices run 0..n_tau inclusive
};

struct RunPlan {
    std::size_t n_steps = 0;
    std::vector<std::size_t> sample_steps;              // ascending, starts at 0
    std::vector<std::size_t> snapshot_steps;            // aligned with config.snapshot_times
    std::vector<std::pair<std::size_t, std::size_t>> snapshot_order;  // (step, index), sorted
    TapPlan taps;
};

RunPlan make_plan(const EnsembleConfig& c) {
    RunPlan plan;
    plan.n_steps = static_cast<std::size_t>(std::llround(c.t_end / c.dt));
    for (std::size_t i = 0; i <= plan.n_steps; i += c.sample_stride) plan.sample_steps.push_back(i);
    for (std::size_t k = 0; k < c.snapshot_times.size(); ++k) {
        const auto step = static_cast<std::size_t>(std::llround(c.snapshot_times[k] / c.dt));
        plan.snapshot_steps.push_back(step);
        plan.snapshot_order.emplace_back(step, k);
    }
    std::sort(plan.snapshot_order.begin(), plan.snapshot_order.end());
    if (c.corr_t0 >= 0.0) {
        plan.taps.enabled = true;
        plan.taps.stride = c.corr_stride;
        plan.taps.n_tau =
            static_cast<std::size_t>(std::floor(c.corr_tau_max / (c.dt * static_cast<double>(c.corr_stride)) + 1e-9));
        for (std::size_t j = 0; j < std::max<std::size_t>(1, c.corr_n_t0); ++j) {
            const double t0j = c.corr_t0 + c.corr_dt0 * static_cast<double>(j);
            plan.taps.ref_steps.push_back(static_cast<std::size_t>(std::llround(t0j / c.dt)));
        }
    }
    return plan;
}

// Per-block accumulation buffers, merged into the ensemble in block order.
struct BlockPartial {
    std::vector<Complex> sum_alpha1, sum_alpha2, sum_phase1;
    std::vector<double> sum_n1, sum_n2, min_n1, max_n1;
    std::vector<std::size_t> alive;
    std::vector<Complex> corr_sum;
    std::vector<std::size_t> corr_count;
    std::size_t diverged = 0;

    BlockPartial(std::size_t n_samples, std::size_t n_taus)
        : sum_alpha1(n_samples), sum_alpha2(n_samples), sum_phase1(n_samples),
          sum_n1(n_samples), sum_n2(n_samples),
          min_n1(n_samples, std::numeric_limits<double>::infinity()),
          max_n1(n_samples, -std::numeric_limits<double>::infinity()), alive(n_samples),
          corr_sum(n_taus), corr_count(n_taus) {}
};

class OrderedMerger {
public:
    template <typename F>
    void merge(std::size_t block, F&& apply) {
        std::unique_lock lk(mutex_);
        cv_.wait(lk, [&] { return next_ == block; });
        apply();
        ++next_;
        cv_.notify_all();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t next_ = 0;
};

}  // namespace

Ensemble run_ensemble(const EnsembleConfig& config, const model::TildeParams& params) {
    config.validate(params);
    const RunPlan plan = make_plan(config);
    const std::size_t n_samples = plan.sample_steps.size();
    const std::size_t n_taus = plan.taps.enabled ? plan.taps.n_tau + 1 : 0;

    Ensemble ens;
    ens.config = config;
    ens.params = params;
    ens.n_traj = config.n_traj;
    ens.times.resize(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        ens.times[k] = static_cast<double>(plan.sample_steps[k]) * config.dt;
    }
    ens.sum_alpha1.resize(n_samples);
    ens.sum_alpha2.resize(n_samples);
    ens.sum_phase1.resize(n_samples);
    ens.sum_n1.resize(n_samples);
    ens.sum_n2.resize(n_samples);
    ens.min_n1.assign(n_samples, std::numeric_limits<double>::infinity());
    ens.max_n1.assign(n_samples, -std::numeric_limits<double>::infinity());
    ens.alive.resize(n_samples);
    if (plan.taps.enabled) {
        ens.corr_t0 = config.corr_t0;
        ens.corr_taus.resize(n_taus);
        for (std::size_t q = 0; q < n_taus; ++q) {
            ens.corr_taus[q] =
                static_cast<double>(q * plan.taps.stride) * config.dt;
        }
        ens.corr_sum.resize(n_taus);
        ens.corr_count.resize(n_taus);
    }
    ens.snapshot_times.resize(plan.snapshot_steps.size());
    ens.snapshots.resize(plan.snapshot_steps.size());
    for (std::size_t k = 0; k < plan.snapshot_steps.size(); ++k) {
        ens.snapshot_times[k] = static_cast<double>(plan.snapshot_steps[k]) * config.dt;
        ens.snapshots[k].assign(config.n_traj, FieldState{{kNaN, kNaN}, {kNaN, kNaN}});
    }
    if (config.store_fields) {
        ens.fields.assign(config.n_traj,
                          std::vector<FieldState>(n_samples, FieldState{{kNaN, kNaN}, {kNaN, kNaN}}));
    }

    constexpr std::size_t kBlock = 64;
    const std::size_t n_blocks = (config.n_traj + kBlock - 1) / kBlock;

    auto run_block = [&](std::size_t block, BlockPartial& part) {
        const std::size_t t_begin = block * kBlock;
        const std::size_t t_end_idx = std::min(config.n_traj, t_begin + kBlock);
        std::vector<Complex> refs(plan.taps.ref_steps.size());

        for (std::size_t traj = t_begin; traj < t_end_idx; ++traj) {
            rng::GaussianStream stream(config.master_seed, traj);
            FieldState s = sample_initial(config, stream);
            bool diverged = false;
            std::size_t sample_cursor = 0;
            std::size_t snap_cursor = 0;

            auto process = [&](std::size_t step) {
                if (plan.taps.enabled && step % plan.taps.stride == 0) {
                    for (std::size_t j = 0; j < plan.taps.ref_steps.size(); ++j) {
                        const std::size_t r = plan.taps.ref_steps[j];
                        if (step == r) refs[j] = s.alpha1;
                        if (step >= r) {
                            const std::size_t q = (step - r) / plan.taps.stride;
                            if (q <= plan.taps.n_tau) {
                                part.corr_sum[q] += std::conj(s.alpha1) * refs[j];
                                ++part.corr_count[q];
                            }
                        }
                    }
                }
                if (sample_cursor < plan.sample_steps.size() &&
                    plan.sample_steps[sample_cursor] == step) {
                    const std::size_t k = sample_cursor++;
                    part.sum_alpha1[k] += s.alpha1;
                    part.sum_alpha2[k] += s.alpha2;
                    const double n1 = std::norm(s.alpha1);
                    const double n2 = std::norm(s.alpha2);
                    part.sum_n1[k] += n1;
                    part.sum_n2[k] += n2;
                    part.min_n1[k] = std::min(part.min_n1[k], n1);
                    part.max_n1[k] = std::max(part.max_n1[k], n1);
                    const double mag = std::abs(s.alpha1);
                    if (mag > 0.0) part.sum_phase1[k] += s.alpha1 / mag;
                    ++part.alive[k];
                    if (config.store_fields) ens.fields[traj][k] = s;
                }
                while (snap_cursor < plan.snapshot_order.size() &&
                       plan.snapshot_order[snap_cursor].first == step) {
                    ens.snapshots[plan.snapshot_order[snap_cursor].second][traj] = s;
                    ++snap_cursor;
                }
            };

            process(0);
            for (std::size_t i = 1; i <= plan.n_steps && !diverged; ++i) {
                NoiseDraw draw;
                if (config.noise_enabled) draw = draw_noise(stream);
                s = twa_step(s, params, config.aleph, config.dt, draw, config.scheme);
                if (bad(s, config.divergence_threshold)) {
                    diverged = true;
                    ++part.diverged;
                    break;
                }
                process(i);
            }
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = config.threads > 0
                                   ? static_cast<unsigned>(config.threads)
                                   : std::min<unsigned>(hw, static_cast<unsigned>(n_blocks));

    OrderedMerger merger;
    auto merge_block = [&](std::size_t block, const BlockPartial& part) {
        merger.merge(block, [&] {
            for (std::size_t k = 0; k < n_samples; ++k) {
                ens.sum_alpha1[k] += part.sum_alpha1[k];
                ens.sum_alpha2[k] += part.sum_alpha2[k];
                ens.sum_phase1[k] += part.sum_phase1[k];
                ens.sum_n1[k] += part.sum_n1[k];
                ens.sum_n2[k] += part.sum_n2[k];
                ens.min_n1[k] = std::min(ens.min_n1[k], part.min_n1[k]);
                ens.max_n1[k] = std::max(ens.max_n1[k], part.max_n1[k]);
                ens.alive[k] += part.alive[k];
            }
            for (std::size_t q = 0; q < n_taus; ++q) {
                ens.corr_sum[q] += part.corr_sum[q];
                ens.corr_count[q] += part.corr_count[q];
            }
            ens.diverged_count += part.diverged;
        });
    };

    if (n_threads <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            BlockPartial part(n_samples, n_taus);
            run_block(b, part);
            merge_block(b, part);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (unsigned t = 0; t < n_threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) {
                    BlockPartial part(n_samples, n_taus);
                    run_block(b, part);
                    merge_block(b, part);
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    if (static_cast<double>(ens.diverged_count) >
        0.01 * static_cast<double>(config.n_traj)) {
        throw std::runtime_error("run_ensemble: more than 1% of trajectories diverged (" +
                                 std::to_string(ens.diverged_count) + " of " +
                                 std::to_string(config.n_traj) + "); reduce dt");
    }
    return ens;
}

std::vector<Complex> weyl_expectation(const Ensemble& ens, const Monomial& obs) {
    if (ens.n_traj == 0 || ens.times.empty()) {
        throw std::invalid_argument("weyl_expectation: empty ensemble");
    }
    const std::size_t n = ens.times.size();
    std::vector<Complex> out(n);

    auto from_sums = [&](auto&& get) {
        for (std::size_t k = 0; k < n; ++k) {
            const double denom = static_cast<double>(ens.alive[k]);
            out[k] = denom > 0.0 ? get(k) / denom : Complex(kNaN, kNaN);
        }
    };

    const bool is_one = obs.dagger_power == 0 && obs.power == 0;
    if (is_one) {
        std::fill(out.begin(), out.end(), Complex(1.0, 0.0));
        return out;
    }
    if (!ens.fields.empty()) {
        for (std::size_t k = 0; k < n; ++k) {
            Complex acc(0.0, 0.0);
            std::size_t count = 0;
            for (std::size_t t = 0; t < ens.fields.size(); ++t) {
                const FieldState& s = ens.fields[t][k];
                if (std::isnan(s.alpha1.real())) continue;
                const Complex ad = (obs.dagger_mode == 1) ? s.alpha1 : s.alpha2;
                const Complex a = (obs.mode == 1) ? s.alpha1 : s.alpha2;
                Complex term(1.0, 0.0);
                for (int p = 0; p < obs.dagger_power; ++p) term *= std::conj(ad);
                for (int p = 0; p < obs.power; ++p) term *= a;
                acc += term;
                ++count;
            }
            out[k] = count ? acc / static_cast<double>(count) : Complex(kNaN, kNaN);
        }
        return out;
    }
    // streamed cases
    if (obs.dagger_power == 0 && obs.power == 1) {
        from_sums([&](std::size_t k) { return obs.mode == 1 ? ens.sum_alpha1[k] : ens.sum_alpha2[k]; });
        return out;
    }
    if (obs.dagger_power == 1 && obs.power == 0) {
        from_sums([&](std::size_t k) {
            return std::conj(obs.dagger_mode == 1 ? ens.sum_alpha1[k] : ens.sum_alpha2[k]);
        });
        return out;
    }
    if (obs.dagger_power == 1 && obs.power == 1 && obs.dagger_mode == obs.mode) {
        from_sums([&](std::size_t k) {
            return Complex(obs.mode == 1 ? ens.sum_n1[k] : ens.sum_n2[k], 0.0);
        });
        return out;
    }
    throw std::invalid_argument(
        "weyl_expectation: monomial not covered by streamed reductions; run with store_fields");
}

std::vector<double> occupation(const Ensemble& ens, int mode, bool normal_order) {
    if (ens.n_traj == 0 || ens.times.empty()) {
        throw std::invalid_argument("occupation: empty ensemble");
    }
    if (mode != 1 && mode != 2) throw std::invalid_argument("occupation: mode must be 1 or 2");
    const auto& sums = (mode == 1) ? ens.sum_n1 : ens.sum_n2;
    std::vector<double> out(ens.times.size());
    const double shift = normal_order ? 0.5 / ens.config.aleph : 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double denom = static_cast<double>(ens.alive[k]);
        out[k] = denom > 0.0 ? sums[k] / denom - shift : kNaN;
    }
    return out;
}

Envelope occupation_envelope(const Ensemble& ens) {
    if (ens.n_traj == 0 || ens.times.empty()) {
        throw std::invalid_argument("occupation_envelope: empty ensemble");
    }
    Envelope env;
    env.times = ens.times;
    env.minimum = ens.min_n1;
    env.maximum = ens.max_n1;
    env.mean = occupation(ens, 1, false);
    return env;
}

std::vector<Complex> phase_resultant(const Ensemble& ens) {
    if (ens.n_traj == 0 || ens.times.empty()) {
        throw std::invalid_argument("phase_resultant: empty ensemble");
    }
    std::vector<Complex> out(ens.times.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double denom = static_cast<double>(ens.alive[k]);
        out[k] = denom > 0.0 ? ens.sum_phase1[k] / denom : Complex(kNaN, kNaN);
    }
    return out;
}

}  // namespace qmelt::twa
