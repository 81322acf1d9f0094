#include "qmelt/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qmelt::spectra {

CorrelationSeries two_time_correlation(const twa::Ensemble& ens, double transient_floor) {
    if (ens.corr_t0 < 0.0 || ens.corr_taus.empty()) {
        throw std::invalid_argument("two_time_correlation: ensemble ran without correlation taps");
    }
    CorrelationSeries out;
    out.t0 = ens.corr_t0;
    out.taus = ens.corr_taus;
    out.values.resize(ens.corr_sum.size());
    std::size_t min_count = ens.corr_count.empty() ? 0 : ens.corr_count[0];
    for (std::size_t q = 0; q < out.values.size(); ++q) {
        if (ens.corr_count[q] == 0) {
            throw std::runtime_error("two_time_correlation: no surviving trajectories at tau = " +
                                     std::to_string(out.taus[q]));
        }
        out.values[q] = ens.corr_sum[q] / static_cast<double>(ens.corr_count[q]);
        min_count = std::min(min_count, ens.corr_count[q]);
    }
    const std::size_t refs = std::max<std::size_t>(1, ens.config.corr_n_t0);
    out.n_traj = min_count / refs;
    out.t0_in_transient = ens.corr_t0 < transient_floor;
    return out;
}

Spectrogram spectrogram(const CorrelationSeries& corr, const SpectrogramOptions& opts) {
    if (corr.taus.size() < 4) throw std::invalid_argument("spectrogram: correlation too short");
    const double dtau = corr.taus[1] - corr.taus[0];
    const auto frame_len = static_cast<std::size_t>(std::llround(opts.window_width / dtau));
    if (frame_len < 4) throw std::invalid_argument("spectrogram: window shorter than four samples");
    if (frame_len > corr.taus.size()) {
        throw std::invalid_argument("spectrogram: window longer than the correlation series");
    }
    const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opts.hop / dtau)));
    const auto win = fft::make_window(opts.window, frame_len);
    const std::size_t padded = fft::next_pow2(frame_len * std::max<std::size_t>(1, opts.pad_factor));

    Spectrogram spec;
    spec.window = opts.window;
    spec.window_width = static_cast<double>(frame_len) * dtau;
    spec.bin_width = 2.0 * M_PI / (static_cast<double>(padded) * dtau);
    spec.resolution = 2.0 * M_PI / spec.window_width;
    const std::size_t half = padded / 2;
    spec.frequency.resize(padded);
    for (std::size_t k = 0; k < padded; ++k) {
        spec.frequency[k] = (static_cast<double>(k) - static_cast<double>(half)) * spec.bin_width;
    }

    std::vector<fft::Complex> buf;
    for (std::size_t start = 0; start + frame_len <= corr.taus.size(); start += hop) {
        buf.assign(padded, fft::Complex(0.0, 0.0));
        for (std::size_t i = 0; i < frame_len; ++i) {
            buf[i] = corr.values[start + i] * win[i];
        }
        fft::transform(buf);
        const double tau_start = corr.taus[start];
        std::vector<double> mag(padded);
        std::vector<Complex> resp(padded);
        for (std::size_t k = 0; k < padded; ++k) {
            const std::size_t src = (k + half) % padded;
            // restore the absolute lag phase so the response is the one-sided
            // transform of the full series
            const double phase = -spec.frequency[k] * tau_start;
            const Complex rot(std::cos(phase), std::sin(phase));
            resp[k] = 2.0 * dtau * buf[src] * rot;
            mag[k] = std::abs(resp[k]);
        }
        spec.frame_times.push_back(tau_start + 0.5 * spec.window_width);
        spec.magnitude.push_back(std::move(mag));
        spec.response.push_back(std::move(resp));
    }
    if (spec.frame_times.empty()) {
        throw std::invalid_argument("spectrogram: no complete frame fits the series");
    }
    return spec;
}

namespace {

std::vector<fft::Peak> frame_peaks(const Spectrogram& spec, std::size_t frame,
                                   std::size_t max_peaks) {
    fft::Spectrum s;
    s.frequency = spec.frequency;
    s.magnitude = spec.magnitude[frame];
    s.bin_width = spec.bin_width;
    s.resolution = spec.resolution;
    // sidelobe guard: one mainlobe width
    return fft::find_peaks(s, 1e-3, max_peaks, 2.0 * spec.resolution);
}

}  // namespace

std::vector<PeakTrack> track_peaks(const Spectrogram& spec, std::size_t n_peaks,
                                   double gate_bins) {
    if (spec.frame_times.size() < 2) {
        throw std::invalid_argument("track_peaks: need at least two frames");
    }
    const double gate = gate_bins * spec.resolution;

    std::vector<PeakTrack> tracks;
    const auto first = frame_peaks(spec, 0, n_peaks);
    for (const auto& p : first) {
        PeakTrack t;
        t.frequency = p.frequency;
        t.times.push_back(spec.frame_times[0]);
        t.amplitude.push_back(p.magnitude);
        t.frequencies.push_back(p.frequency);
        tracks.push_back(std::move(t));
    }
    if (tracks.empty()) throw std::runtime_error("track_peaks: no peaks in the first frame");

    for (std::size_t f = 1; f < spec.frame_times.size(); ++f) {
        const auto peaks = frame_peaks(spec, f, n_peaks + 2);
        std::vector<bool> taken(peaks.size(), false);
        for (auto& track : tracks) {
            double best = gate;
            std::size_t best_idx = peaks.size();
            for (std::size_t i = 0; i < std::min(peaks.size(), n_peaks + 2); ++i) {
                const double d = std::abs(peaks[i].frequency - track.frequency);
                if (d < best) {
                    if (taken[i]) {
                        track.merge_flagged = true;
                        continue;
                    }
                    best = d;
                    best_idx = i;
                }
            }
            if (best_idx < peaks.size()) {
                taken[best_idx] = true;
                track.times.push_back(spec.frame_times[f]);
                track.amplitude.push_back(peaks[best_idx].magnitude);
                track.frequencies.push_back(peaks[best_idx].frequency);
                // running mean keeps the gate centered
                double mean = 0.0;
                for (double v : track.frequencies) mean += v;
                track.frequency = mean / static_cast<double>(track.frequencies.size());
            }
        }
    }

    for (auto& track : tracks) {
        double var = 0.0;
        for (double v : track.frequencies) {
            var += (v - track.frequency) * (v - track.frequency);
        }
        track.frequency_std =
            track.frequencies.size() > 1
                ? std::sqrt(var / static_cast<double>(track.frequencies.size() - 1))
                : 0.0;
    }
    return tracks;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("linear_fit: need >= 2 points");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / static_cast<double>(n);
    double st2 = 0, slope = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = x[i] - mx;
        st2 += t * t;
        slope += t * y[i];
    }
    if (st2 == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissa");
    slope /= st2;
    const double intercept = (sy - sx * slope) / static_cast<double>(n);

    LinearFit fit;
    fit.slope = slope;
    fit.intercept = intercept;
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - intercept - slope * x[i];
        ssr += r * r;
    }
    if (n > 2) {
        const double sig2 = ssr / static_cast<double>(n - 2);
        fit.slope_err = std::sqrt(sig2 / st2);
        fit.intercept_err = std::sqrt(sig2 * (1.0 / static_cast<double>(n) + mx * mx / st2));
        fit.residual_rms = std::sqrt(sig2);
    }
    return fit;
}

std::vector<GapEstimate> extract_gaps(const std::vector<PeakTrack>& tracks, double floor_rel) {
    std::vector<GapEstimate> gaps;
    int index = 0;
    for (const auto& track : tracks) {
        if (track.times.size() < 5) {
            throw std::invalid_argument("extract_gaps: track with fewer than five frames");
        }
        double peak = 0.0;
        for (double a : track.amplitude) peak = std::max(peak, a);
        const double floor = floor_rel * peak;

        std::vector<double> t, la, fr;
        for (std::size_t i = 0; i < track.times.size(); ++i) {
            if (track.amplitude[i] <= floor || track.amplitude[i] <= 0.0) continue;
            t.push_back(track.times[i]);
            la.push_back(std::log(track.amplitude[i]));
            fr.push_back(track.frequencies[i]);
        }
        if (t.size() < 5) throw std::invalid_argument("extract_gaps: fewer than five usable frames");

        const LinearFit fit = linear_fit(t, la);
        GapEstimate g;
        g.peak_index = index++;
        g.frames_used = t.size();
        g.lambda = -fit.slope;
        g.lambda_err = fit.slope_err;
        double mean_f = 0.0;
        for (double v : fr) mean_f += v;
        g.nu = mean_f / static_cast<double>(fr.size());
        double var = 0.0;
        for (double v : fr) var += (v - g.nu) * (v - g.nu);
        g.nu_err = fr.size() > 1 ? std::sqrt(var / static_cast<double>(fr.size() - 1)) : 0.0;

        if (g.lambda < 0.0) {
            g.clamped = -g.lambda > g.lambda_err;  // rising beyond uncertainty
            g.lambda = 0.0;
        }
        gaps.push_back(g);
    }
    return gaps;
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y, double x_min,
                          double x_max) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < x_min || x[i] > x_max) continue;
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw std::invalid_argument("fit_power_law: inputs must be positive");
        }
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    if (lx.size() < 2) throw std::invalid_argument("fit_power_law: need >= 2 points in range");

    const LinearFit fit = linear_fit(lx, ly);
    PowerLawFit out;
    out.n_points = lx.size();
    out.exponent = -fit.slope;
    out.prefactor = std::exp(fit.intercept);
    out.exponent_err = fit.slope_err;
    out.prefactor_err = out.prefactor * fit.intercept_err;
    out.degenerate = lx.size() == 2;
    return out;
}

}  // namespace qmelt::spectra
