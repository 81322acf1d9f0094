#include "qmelt/melting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qmelt::melting {

double circular_variance(std::span<const double> angles) {
    if (angles.empty()) throw std::invalid_argument("circular_variance: no angles");
    Complex sum(0.0, 0.0);
    for (double th : angles) sum += Complex(std::cos(th), std::sin(th));
    return 1.0 - std::abs(sum) / static_cast<double>(angles.size());
}

namespace {

std::vector<double> unwrap(std::span<const double> wrapped) {
    std::vector<double> out(wrapped.begin(), wrapped.end());
    for (std::size_t i = 1; i < out.size(); ++i) {
        double d = out[i] - out[i - 1];
        while (d > M_PI) {
            out[i] -= 2.0 * M_PI;
            d = out[i] - out[i - 1];
        }
        while (d < -M_PI) {
            out[i] += 2.0 * M_PI;
            d = out[i] - out[i - 1];
        }
    }
    return out;
}

}  // namespace

VarianceSeries circular_variance_series(const twa::Ensemble& ens, Centering centering) {
    if (ens.n_traj == 0 || ens.times.empty()) {
        throw std::invalid_argument("circular_variance_series: empty ensemble");
    }
    VarianceSeries out;
    out.times = ens.times;
    out.R.resize(ens.times.size());
    std::vector<double> wrapped(ens.times.size());

    if (centering == Centering::Origin) {
        const auto resultant = twa::phase_resultant(ens);
        for (std::size_t k = 0; k < resultant.size(); ++k) {
            out.R[k] = 1.0 - std::abs(resultant[k]);
            wrapped[k] = std::arg(resultant[k]);
        }
    } else {
        if (ens.fields.empty()) {
            throw std::invalid_argument(
                "circular_variance_series: centroid centering needs store_fields");
        }
        for (std::size_t k = 0; k < ens.times.size(); ++k) {
            Complex centroid(0.0, 0.0);
            std::size_t alive = 0;
            for (const auto& traj : ens.fields) {
                if (std::isnan(traj[k].alpha1.real())) continue;
                centroid += traj[k].alpha1;
                ++alive;
            }
            if (alive < 2) {
                throw std::runtime_error("circular_variance_series: fewer than two live trajectories");
            }
            centroid /= static_cast<double>(alive);
            Complex sum(0.0, 0.0);
            for (const auto& traj : ens.fields) {
                if (std::isnan(traj[k].alpha1.real())) continue;
                const Complex rel = traj[k].alpha1 - centroid;
                const double mag = std::abs(rel);
                if (mag > 0.0) sum += rel / mag;
            }
            out.R[k] = 1.0 - std::abs(sum) / static_cast<double>(alive);
            wrapped[k] = std::arg(sum);
        }
    }
    out.mean_angle = unwrap(wrapped);
    return out;
}

double estimate_period(std::span<const double> times, std::span<const double> mean_angle) {
    if (times.size() != mean_angle.size() || times.size() < 16) {
        throw std::invalid_argument("estimate_period: series too short");
    }
    const double dt = times[1] - times[0];
    const auto unwrapped = unwrap(mean_angle);

    // remove the secular drift so the oscillatory part dominates the spectrum
    std::vector<double> tv(times.begin(), times.end());
    const spectra::LinearFit trend = spectra::linear_fit(tv, unwrapped);
    std::vector<fft::Complex> residual(unwrapped.size());
    for (std::size_t i = 0; i < unwrapped.size(); ++i) {
        residual[i] = unwrapped[i] - trend.intercept - trend.slope * times[i];
    }

    const auto spec = fft::power_spectrum(residual, dt);
    const auto peaks = fft::find_peaks(spec, 1e-3, 8);

    // significance: the top non-DC peak must stand clear of the spectral floor
    double floor = 0.0;
    for (double m : spec.magnitude) floor += m;
    floor /= static_cast<double>(spec.magnitude.size());
    for (const auto& p : peaks) {
        if (std::abs(p.frequency) < 2.0 * spec.resolution) continue;  // DC / drift remnant
        if (p.magnitude > 10.0 * floor) return 2.0 * M_PI / std::abs(p.frequency);
    }
    throw std::runtime_error(
        "estimate_period: no significant oscillation peak; supply the period directly");
}

AveragedSeries period_average(std::span<const double> times, std::span<const double> values,
                              double period) {
    if (times.size() != values.size() || times.empty()) {
        throw std::invalid_argument("period_average: size mismatch");
    }
    if (!(period >= 0.0)) throw std::invalid_argument("period_average: negative period");
    AveragedSeries out;
    const double dt = times.size() > 1 ? times[1] - times[0] : 0.0;
    if (period <= dt || times.size() == 1) {
        out.times.assign(times.begin(), times.end());
        out.values.assign(values.begin(), values.end());
        return out;
    }

    // trapezoid with linear interpolation at the fractional window edges
    auto value_at = [&](double t) {
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - times.begin());
        hi = std::clamp<std::size_t>(hi, 1, times.size() - 1);
        const std::size_t lo = hi - 1;
        const double w = (t - times[lo]) / (times[hi] - times[lo]);
        return values[lo] + w * (values[hi] - values[lo]);
    };

    const double half = 0.5 * period;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double a = times[i] - half;
        const double b = times[i] + half;
        if (a < times.front() - 1e-12 || b > times.back() + 1e-12) continue;  // trimmed
        double integral = 0.0;
        double prev_t = a;
        double prev_v = value_at(a);
        const auto begin_it = std::lower_bound(times.begin(), times.end(), a);
        for (auto it = begin_it; it != times.end() && *it < b; ++it) {
            if (*it <= prev_t) continue;
            const double v = values[static_cast<std::size_t>(it - times.begin())];
            integral += 0.5 * (prev_v + v) * (*it - prev_t);
            prev_t = *it;
            prev_v = v;
        }
        integral += 0.5 * (prev_v + value_at(b)) * (b - prev_t);
        out.times.push_back(times[i]);
        out.values.push_back(integral / period);
    }
    return out;
}

RelaxationFit fit_relaxation(std::span<const double> x, std::span<const double> r,
                             const RelaxationWindow& window) {
    if (x.size() != r.size()) throw std::invalid_argument("fit_relaxation: size mismatch");
    std::vector<double> xs, rs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < window.x_min) continue;
        if (r[i] > window.value_max) continue;
        if (r[i] < -1e-9 || r[i] > 1.0 + 1e-9) {
            throw std::invalid_argument("fit_relaxation: R outside [0, 1]");
        }
        xs.push_back(x[i]);
        rs.push_back(std::clamp(r[i], 0.0, 1.0));
    }
    if (xs.size() < 5) throw std::invalid_argument("fit_relaxation: fewer than five usable points");

    // init from the log-linearized model, then Gauss-Newton on delta
    double delta = 0.0;
    std::size_t n_init = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] > 0.0 && rs[i] < 1.0) {
            delta += -std::log1p(-rs[i]) / xs[i];
            ++n_init;
        }
    }
    delta = n_init ? delta / static_cast<double>(n_init) : 0.0;

    for (int iter = 0; iter < 100; ++iter) {
        double jtj = 0.0, jtr = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double e = std::exp(-delta * xs[i]);
            const double jac = xs[i] * e;
            jtj += jac * jac;
            jtr += jac * (rs[i] - (1.0 - e));
        }
        if (jtj == 0.0) break;
        const double step = jtr / jtj;
        delta += step;
        if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(delta))) break;
    }

    RelaxationFit fit;
    fit.delta = delta;
    fit.n_used = xs.size();
    double ssr = 0.0, jtj = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = std::exp(-delta * xs[i]);
        const double res = rs[i] - (1.0 - e);
        ssr += res * res;
        jtj += xs[i] * e * xs[i] * e;
    }
    if (xs.size() > 1 && jtj > 0.0) {
        fit.delta_err = std::sqrt(ssr / static_cast<double>(xs.size() - 1) / jtj);
    }

    // non-monotonicity: the largest drawdown of R against the local noise scale
    double run_max = rs.front(), drawdown = 0.0;
    double noise2 = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        run_max = std::max(run_max, rs[i]);
        drawdown = std::max(drawdown, run_max - rs[i]);
        const double d = rs[i] - rs[i - 1];
        noise2 += d * d;
    }
    const double noise = std::sqrt(noise2 / (2.0 * static_cast<double>(xs.size() - 1)));
    fit.non_monotone = drawdown > 5.0 * std::max(noise, 1e-12);
    return fit;
}

RatePowerLaw fit_rate_power_law(std::span<const double> x, std::span<const double> delta) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(delta[i] > 0.0)) {
            throw std::invalid_argument("fit_rate_power_law: inputs must be positive");
        }
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(delta[i]));
    }
    if (lx.size() < 2) throw std::invalid_argument("fit_rate_power_law: need >= 2 points");
    const spectra::LinearFit f = spectra::linear_fit(lx, ly);
    RatePowerLaw out;
    out.d = f.slope;
    out.c = std::exp(f.intercept);
    out.d_err = f.slope_err;
    out.c_err = out.c * f.intercept_err;
    out.n_points = lx.size();
    return out;
}

// mean pairwise L2 distance over the curves' common support
double curve_family_distance(const std::vector<Curve>& curves) {
    if (curves.size() < 2) return 0.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& c : curves) {
        if (c.x.empty()) throw std::invalid_argument("collapse: empty curve");
        lo = std::max(lo, c.x.front());
        hi = std::min(hi, c.x.back());
    }
    if (!(hi > lo)) {
        throw std::runtime_error("collapse: rescaled curves share no common support (overlap [" +
                                 std::to_string(lo) + ", " + std::to_string(hi) + "])");
    }
    auto sample = [](const Curve& c, double xq) {
        const auto it = std::upper_bound(c.x.begin(), c.x.end(), xq);
        std::size_t hi_idx = std::clamp<std::size_t>(
            static_cast<std::size_t>(it - c.x.begin()), 1, c.x.size() - 1);
        const std::size_t lo_idx = hi_idx - 1;
        const double w = (xq - c.x[lo_idx]) / (c.x[hi_idx] - c.x[lo_idx]);
        return c.y[lo_idx] + w * (c.y[hi_idx] - c.y[lo_idx]);
    };

    constexpr int kGrid = 64;
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        for (std::size_t j = i + 1; j < curves.size(); ++j) {
            double acc = 0.0;
            for (int g = 0; g < kGrid; ++g) {
                const double xq = lo + (hi - lo) * static_cast<double>(g) / (kGrid - 1);
                const double d = sample(curves[i], xq) - sample(curves[j], xq);
                acc += d * d;
            }
            total += std::sqrt(acc / kGrid);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

namespace {

Curve rescale_x(const Curve& c, double factor) {
    Curve out = c;
    for (double& v : out.x) v *= factor;
    return out;
}

}  // namespace

CollapseResult collapse(const std::vector<Curve>& r_vs_time,
                        const std::vector<Curve>& r_vs_inv_aleph, const CollapseOptions& opts) {
    if (r_vs_time.size() < 3 || r_vs_inv_aleph.size() < 3) {
        throw std::invalid_argument("collapse: need at least three curves per family");
    }

    CollapseResult out;

    // rates along t at fixed aleph: delta_t(aleph_j) = c1 aleph^(-d1)
    std::vector<double> alephs, deltas_t;
    for (const auto& c : r_vs_time) {
        const RelaxationFit f = fit_relaxation(c.x, c.y, opts.time_window);
        alephs.push_back(c.label);
        deltas_t.push_back(f.delta);
    }
    // rates along 1/aleph at fixed t: delta_a(t_j) = c2 t^(+d2)
    std::vector<double> t_refs, deltas_a;
    for (const auto& c : r_vs_inv_aleph) {
        const RelaxationFit f = fit_relaxation(c.x, c.y, opts.aleph_window);
        t_refs.push_back(c.label);
        deltas_a.push_back(f.delta);
    }
    out.delta_t = deltas_t;
    out.delta_aleph = deltas_a;

    const RatePowerLaw law1 = fit_rate_power_law(alephs, deltas_t);
    const RatePowerLaw law2 = fit_rate_power_law(t_refs, deltas_a);
    out.d1 = -law1.d;  // decay toward the classical limit
    out.c1 = law1.c;
    out.d2 = law2.d;
    out.c2 = law2.c;

    out.alpha = std::pow(out.c1 / out.c2, 1.0 / out.d2);
    out.beta = -out.d1 / out.d2;

    const double aleph0 = opts.aleph0 > 0.0 ? opts.aleph0
                                            : *std::min_element(alephs.begin(), alephs.end());
    const double t0 = opts.t0 > 0.0 ? opts.t0 : *std::min_element(t_refs.begin(), t_refs.end());
    out.k1 = std::pow(out.c1 / out.c2, out.d2 / out.d1 - 1.0) * std::pow(t0, out.d2) /
             std::pow(aleph0, out.d1);
    out.k2 = -out.d2 / out.d1;

    out.quality_before =
        0.5 * (curve_family_distance(r_vs_time) + curve_family_distance(r_vs_inv_aleph));

    for (std::size_t j = 0; j < r_vs_time.size(); ++j) {
        out.rescaled_time_curves.push_back(
            rescale_x(r_vs_time[j], std::pow(alephs[j] / aleph0, out.d1)));
    }
    for (std::size_t j = 0; j < r_vs_inv_aleph.size(); ++j) {
        out.rescaled_aleph_curves.push_back(
            rescale_x(r_vs_inv_aleph[j], std::pow(t_refs[j] / t0, out.d2)));
    }
    out.quality_after = 0.5 * (curve_family_distance(out.rescaled_time_curves) +
                               curve_family_distance(out.rescaled_aleph_curves));

    for (const auto& c : out.rescaled_time_curves) {
        Curve u = c;
        for (double& v : u.x) v = out.k1 * std::pow(v, out.k2);
        if (!u.x.empty() && u.x.front() > u.x.back()) {
            std::reverse(u.x.begin(), u.x.end());
            std::reverse(u.y.begin(), u.y.end());
        }
        out.universal_time_curves.push_back(std::move(u));
    }
    return out;
}

}  // namespace qmelt::melting
