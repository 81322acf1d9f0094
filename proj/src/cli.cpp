#include "qmelt/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qmelt/config.hpp"
#include "qmelt/io.hpp"
#include "qmelt/meanfield.hpp"
#include "qmelt/melting.hpp"
#include "qmelt/fockspace.hpp"
#include "qmelt/spectra.hpp"
#include "qmelt/twa.hpp"
#include "qmelt/wigner.hpp"

namespace qmelt::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "qmelt_out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    double aleph = 0.0;
    bool aleph_set = false;
};

void add_common(CLI::App* app, CommonOpts& c) {
    app->add_option("--config", c.config_path, "configuration file (INI sections)");
    app->add_option("--out", c.out_dir, "output directory");
    app->add_option("--seed", c.seed, "master seed")->each([&](const std::string&) {
        c.seed_set = true;
    });
    app->add_option("--threads", c.threads, "worker threads (0: hardware)");
    app->add_option("--aleph", c.aleph, "scaling parameter")->each([&](const std::string&) {
        c.aleph_set = true;
    });
}

cfg::RunConfig load_config(const CommonOpts& c) {
    cfg::RunConfig config =
        c.config_path.empty() ? cfg::parse_config_text("") : cfg::parse_config(c.config_path);
    if (c.seed_set) {
        config.seed = c.seed;
        config.provenance["ensemble.seed"] = "flag";
    }
    if (c.aleph_set) {
        if (!(c.aleph > 0.0)) throw cfg::ConfigError("--aleph must be positive");
        config.aleph = c.aleph;
        config.provenance["scaling.aleph"] = "flag";
    }
    const char* env_threads = std::getenv("QMELT_THREADS");
    if (c.threads == 0 && env_threads != nullptr) {
        // thread count never affects results, only wall time
        return config;
    }
    return config;
}

int resolve_threads(const CommonOpts& c) {
    if (c.threads > 0) return c.threads;
    if (const char* env = std::getenv("QMELT_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 0;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw cfg::ConfigError("cannot parse " + what + " entry '" + item + "'");
        }
    }
    if (out.empty()) throw cfg::ConfigError(what + " list is empty");
    return out;
}

// "a:b:step" or comma list
std::vector<double> parse_grid(const std::string& text) {
    if (text.find(':') == std::string::npos) return parse_list(text, "grid");
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
    if (parts.size() != 3 || parts[2] <= 0.0 || parts[1] < parts[0]) {
        throw cfg::ConfigError("grid must be 'start:stop:step' with positive step");
    }
    std::vector<double> out;
    for (double v = parts[0]; v <= parts[1] + 1e-12; v += parts[2]) out.push_back(v);
    return out;
}

void stamp(io::Manifest& manifest, const cfg::RunConfig& config, const std::string& subcommand,
           Clock::time_point start) {
    manifest.run()["subcommand"] = subcommand;
    manifest.run()["config"] = config.to_json();
    manifest.run()["wall_time_s"] =
        std::chrono::duration<double>(Clock::now() - start).count();
}

// ----------------------------- gpe ------------------------------------

int cmd_gpe(const CommonOpts& common, double omega, double t_end, double dt,
            std::size_t stride, double transient) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    model::ModelParams params = config.physical();
    if (omega > 0.0) params.omega = {omega, omega};

    meanfield::IntegrateOptions opts{dt, t_end, stride};
    const meanfield::FieldState init{{0.05, 0.0}, {0.05, 0.0}};
    const auto traj = meanfield::integrate_gpe(init, params, opts);

    io::Manifest manifest(common.out_dir);
    io::CsvWriter traj_csv(fs::path(common.out_dir) / "trajectory.csv",
                           {"t", "re_alpha1", "im_alpha1", "re_alpha2", "im_alpha2"});
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        traj_csv.row({traj.times[i], traj.states[i].alpha1.real(), traj.states[i].alpha1.imag(),
                      traj.states[i].alpha2.real(), traj.states[i].alpha2.imag()});
    }
    manifest.add_file(traj_csv.close());

    meanfield::SpectrumOptions spec_opts;
    spec_opts.transient_time = transient;
    for (int mode : {1, 2}) {
        const auto spec = meanfield::power_spectrum(traj, mode, spec_opts);
        io::CsvWriter spec_csv(
            fs::path(common.out_dir) / ("spectrum_mode" + std::to_string(mode) + ".csv"),
            {"omega", "magnitude"});
        for (std::size_t k = 0; k < spec.frequency.size(); ++k) {
            if (std::abs(spec.frequency[k]) > 6.0) continue;  // plot window
            spec_csv.row({spec.frequency[k], spec.magnitude[k]});
        }
        manifest.add_file(spec_csv.close());

        const auto peaks = fft::find_peaks(spec);
        io::CsvWriter peak_csv(
            fs::path(common.out_dir) / ("peaks_mode" + std::to_string(mode) + ".csv"),
            {"omega", "magnitude"});
        for (const auto& p : peaks) peak_csv.row({p.frequency, p.magnitude});
        manifest.add_file(peak_csv.close());
    }

    stamp(manifest, config, "gpe", start);
    manifest.write();
    return kExitOk;
}

// --------------------------- lyapunov ----------------------------------

int cmd_lyapunov(const CommonOpts& common, double omega, double t_total, double transient,
                 double renorm, double dt) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    model::ModelParams params = config.physical();
    if (omega > 0.0) params.omega = {omega, omega};

    meanfield::LyapunovOptions opts;
    opts.dt = dt;
    opts.total_time = t_total;
    opts.transient_time = transient;
    opts.renorm_interval = renorm;
    const auto spec = meanfield::lyapunov_spectrum(params, {{0.05, 0.0}, {0.05, 0.0}}, opts);

    nlohmann::json j;
    j["exponents"] = spec.exponents;
    j["convergence_error"] = spec.convergence_error;
    j["converged"] = spec.converged;
    std::cout << j.dump(2) << '\n';

    io::Manifest manifest(common.out_dir);
    const auto path = fs::path(common.out_dir) / "lyapunov.ndjson";
    fs::create_directories(common.out_dir);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump() << '\n';
    out.close();
    manifest.add_file(path);
    stamp(manifest, config, "lyapunov", start);
    manifest.write();
    return kExitOk;
}

// ----------------------------- sweep ------------------------------------

int cmd_sweep(const CommonOpts& common, const std::string& grid_text, double omega_window,
              std::size_t max_bins) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    const auto grid = parse_grid(grid_text);

    meanfield::SweepOptions opts;
    opts.threads = resolve_threads(common);
    const auto points = meanfield::sweep_omega(grid, config.physical(), opts);

    io::Manifest manifest(common.out_dir);
    io::CsvWriter sweep_csv(fs::path(common.out_dir) / "sweep.csv",
                            {"omega", "Omega", "S", "class"});
    io::CsvWriter summary_csv(
        fs::path(common.out_dir) / "sweep_summary.csv",
        {"omega", "class", "zero_exponents", "fundamentals", "lambda1", "lambda2", "lambda3",
         "lambda4", "error"});
    std::size_t failures = 0;
    for (const auto& pt : points) {
        if (pt.error) {
            ++failures;
            summary_csv.row_mixed({io::format_double(pt.omega), "error", "0", "0", "0", "0", "0",
                                   "0", *pt.error});
            continue;
        }
        const std::string cls = meanfield::to_string(pt.classification.kind);
        const auto& spec = pt.spectrum;
        const std::size_t step = std::max<std::size_t>(1, spec.frequency.size() / max_bins);
        for (std::size_t k = 0; k < spec.frequency.size(); k += step) {
            if (std::abs(spec.frequency[k]) > omega_window) continue;
            sweep_csv.row_mixed({io::format_double(pt.omega), io::format_double(spec.frequency[k]),
                                 io::format_double(spec.magnitude[k]), cls});
        }
        summary_csv.row_mixed(
            {io::format_double(pt.omega), cls, std::to_string(pt.classification.zero_exponents),
             std::to_string(pt.classification.spectral_fundamentals),
             io::format_double(pt.lyapunov.exponents[0]), io::format_double(pt.lyapunov.exponents[1]),
             io::format_double(pt.lyapunov.exponents[2]), io::format_double(pt.lyapunov.exponents[3]),
             pt.classification.diagnostics.empty() ? "ok" : pt.classification.diagnostics});
    }
    manifest.add_file(sweep_csv.close());
    manifest.add_file(summary_csv.close());
    manifest.run()["failed_points"] = failures;
    stamp(manifest, config, "sweep", start);
    manifest.write();
    if (failures == points.size()) return kExitNumerical;
    return failures ? kExitPartial : kExitOk;
}

// ------------------------------ twa -------------------------------------

twa::EnsembleConfig ensemble_from(const cfg::RunConfig& config, const CommonOpts& common) {
    twa::EnsembleConfig e;
    e.n_traj = config.n_traj;
    e.aleph = config.aleph;
    e.dt = config.dt;
    e.t_end = config.t_end;
    e.sample_stride = config.stride;
    e.master_seed = config.seed;
    e.threads = resolve_threads(common);
    return e;
}

void write_ensemble_outputs(const twa::Ensemble& ens, const fs::path& dir,
                            io::Manifest& manifest) {
    io::CsvWriter exp_csv(dir / "expectation.csv",
                          {"t", "re_alpha1", "im_alpha1", "re_alpha2", "im_alpha2", "n1", "n2",
                           "n1_normal", "n2_normal"});
    const auto a1 = twa::weyl_expectation(ens, {0, 1, 1, 1});
    const auto a2 = twa::weyl_expectation(ens, {0, 1, 1, 2});
    const auto n1 = twa::occupation(ens, 1, false);
    const auto n2 = twa::occupation(ens, 2, false);
    const auto n1n = twa::occupation(ens, 1, true);
    const auto n2n = twa::occupation(ens, 2, true);
    for (std::size_t k = 0; k < ens.times.size(); ++k) {
        exp_csv.row({ens.times[k], a1[k].real(), a1[k].imag(), a2[k].real(), a2[k].imag(), n1[k],
                     n2[k], n1n[k], n2n[k]});
    }
    manifest.add_file(exp_csv.close());

    const auto env = twa::occupation_envelope(ens);
    io::CsvWriter env_csv(dir / "envelope.csv", {"t", "min", "max", "mean"});
    for (std::size_t k = 0; k < env.times.size(); ++k) {
        env_csv.row({env.times[k], env.minimum[k], env.maximum[k], env.mean[k]});
    }
    manifest.add_file(env_csv.close());
}

int cmd_twa(const CommonOpts& common, std::size_t ntraj, double t_end, double dt,
            std::size_t stride, const std::string& snapshots, bool heun) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    if (ntraj) {
        config.n_traj = ntraj;
        config.provenance["ensemble.n_traj"] = "flag";
    }
    if (t_end > 0) {
        config.t_end = t_end;
        config.provenance["ensemble.t_end"] = "flag";
    }
    if (dt > 0) {
        config.dt = dt;
        config.provenance["ensemble.dt"] = "flag";
    }
    if (stride) {
        config.stride = stride;
        config.provenance["ensemble.stride"] = "flag";
    }

    twa::EnsembleConfig e = ensemble_from(config, common);
    if (!snapshots.empty()) e.snapshot_times = parse_list(snapshots, "snapshots");
    if (heun) e.scheme = twa::Scheme::Heun;

    const auto ens = twa::run_ensemble(e, config.tilde);

    io::Manifest manifest(common.out_dir);
    write_ensemble_outputs(ens, common.out_dir, manifest);
    manifest.run()["diverged"] = ens.diverged_count;
    stamp(manifest, config, "twa", start);
    manifest.write();
    return kExitOk;
}

// -------------------------- spectrogram ----------------------------------

struct SpectroParams {
    double t0 = 20.0;
    double tau_max = 200.0;
    std::size_t tau_stride = 50;
    std::size_t n_t0 = 16;
    double dt0 = 0.5;
    double window_width = 0.0;  // 0: min(tau_max/3, 80)
    double hop = 10.0;
};

struct SpectroResult {
    spectra::CorrelationSeries corr;
    spectra::Spectrogram spec;
    std::vector<spectra::PeakTrack> tracks;
    std::vector<spectra::GapEstimate> gaps;
    std::size_t diverged = 0;
};

SpectroResult run_spectro_pipeline(const cfg::RunConfig& config, const CommonOpts& common,
                                   const SpectroParams& sp) {
    twa::EnsembleConfig e = ensemble_from(config, common);
    e.t_end = sp.t0 + sp.dt0 * static_cast<double>(sp.n_t0 > 0 ? sp.n_t0 - 1 : 0) + sp.tau_max;
    e.corr_t0 = sp.t0;
    e.corr_tau_max = sp.tau_max;
    e.corr_stride = sp.tau_stride;
    e.corr_n_t0 = sp.n_t0;
    e.corr_dt0 = sp.dt0;
    const auto ens = twa::run_ensemble(e, config.tilde);

    SpectroResult result;
    result.diverged = ens.diverged_count;
    result.corr = spectra::two_time_correlation(ens);

    spectra::SpectrogramOptions so;
    so.window_width = sp.window_width > 0.0 ? sp.window_width : std::min(sp.tau_max / 3.0, 80.0);
    so.hop = sp.hop;
    result.spec = spectra::spectrogram(result.corr, so);
    result.tracks = spectra::track_peaks(result.spec, 2);
    result.gaps = spectra::extract_gaps(result.tracks);
    return result;
}

int cmd_spectrogram(const CommonOpts& common, std::size_t ntraj, const SpectroParams& sp,
                    double omega_window) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    if (ntraj) config.n_traj = ntraj;

    const auto r = run_spectro_pipeline(config, common, sp);

    io::Manifest manifest(common.out_dir);
    io::CsvWriter corr_csv(fs::path(common.out_dir) / "correlation.csv",
                           {"tau", "re", "im"});
    for (std::size_t q = 0; q < r.corr.taus.size(); ++q) {
        corr_csv.row({r.corr.taus[q], r.corr.values[q].real(), r.corr.values[q].imag()});
    }
    manifest.add_file(corr_csv.close());

    io::CsvWriter spec_csv(fs::path(common.out_dir) / "spectrogram.csv", {"t", "Omega", "S"});
    for (std::size_t f = 0; f < r.spec.frame_times.size(); ++f) {
        for (std::size_t k = 0; k < r.spec.frequency.size(); ++k) {
            if (std::abs(r.spec.frequency[k]) > omega_window) continue;
            spec_csv.row({r.spec.frame_times[f], r.spec.frequency[k], r.spec.magnitude[f][k]});
        }
    }
    manifest.add_file(spec_csv.close());

    io::CsvWriter track_csv(fs::path(common.out_dir) / "tracks.csv",
                            {"track", "t", "nu", "amplitude"});
    for (std::size_t i = 0; i < r.tracks.size(); ++i) {
        for (std::size_t f = 0; f < r.tracks[i].times.size(); ++f) {
            track_csv.row({static_cast<double>(i), r.tracks[i].times[f],
                           r.tracks[i].frequencies[f], r.tracks[i].amplitude[f]});
        }
    }
    manifest.add_file(track_csv.close());

    nlohmann::json gaps_json = nlohmann::json::array();
    for (const auto& g : r.gaps) {
        gaps_json.push_back({{"nu", g.nu},
                             {"lambda", g.lambda},
                             {"nu_err", g.nu_err},
                             {"lambda_err", g.lambda_err},
                             {"clamped", g.clamped},
                             {"frames", g.frames_used}});
    }
    const auto gaps_path = fs::path(common.out_dir) / "gaps.ndjson";
    std::ofstream gout(gaps_path, std::ios::binary | std::ios::trunc);
    gout << gaps_json.dump() << '\n';
    gout.close();
    manifest.add_file(gaps_path);

    manifest.run()["diverged"] = r.diverged;
    stamp(manifest, config, "spectrogram", start);
    manifest.write();
    return kExitOk;
}

// ------------------------------ gaps -------------------------------------

int cmd_gaps(const CommonOpts& common, const std::string& aleph_list, std::size_t ntraj,
             SpectroParams sp, const std::string& tau_list, double fit_lo, double fit_hi) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    if (ntraj) config.n_traj = ntraj;
    const auto alephs = parse_list(aleph_list, "aleph");
    std::vector<double> tau_maxes(alephs.size(), sp.tau_max);
    if (!tau_list.empty()) {
        const auto taus = parse_list(tau_list, "tau-max");
        if (taus.size() == 1) {
            std::fill(tau_maxes.begin(), tau_maxes.end(), taus[0]);
        } else if (taus.size() == alephs.size()) {
            tau_maxes = taus;
        } else {
            throw cfg::ConfigError("--tau-max list must match --aleph list");
        }
    }

    io::Manifest manifest(common.out_dir);
    io::CsvWriter gaps_csv(fs::path(common.out_dir) / "gaps.csv",
                           {"aleph", "nu1", "lambda1", "lambda1_err", "nu2", "lambda2",
                            "lambda2_err"});
    std::vector<double> xs, l1, l2;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < alephs.size(); ++i) {
        cfg::RunConfig run = config;
        run.aleph = alephs[i];
        SpectroParams spi = sp;
        spi.tau_max = tau_maxes[i];
        try {
            const auto r = run_spectro_pipeline(run, common, spi);
            if (r.gaps.size() < 2) throw std::runtime_error("fewer than two tracked lines");
            // strongest line first; report in track order
            gaps_csv.row({alephs[i], r.gaps[0].nu, r.gaps[0].lambda, r.gaps[0].lambda_err,
                          r.gaps[1].nu, r.gaps[1].lambda, r.gaps[1].lambda_err});
            xs.push_back(alephs[i]);
            l1.push_back(r.gaps[0].lambda);
            l2.push_back(r.gaps[1].lambda);
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << "gaps: aleph " << alephs[i] << " failed: " << e.what() << '\n';
        }
    }
    manifest.add_file(gaps_csv.close());

    nlohmann::json fit_json;
    if (xs.size() >= 3) {
        const auto f1 = spectra::fit_power_law(xs, l1, fit_lo, fit_hi);
        const auto f2 = spectra::fit_power_law(xs, l2, fit_lo, fit_hi);
        fit_json["line1"] = {{"a", f1.exponent},
                             {"b", f1.prefactor},
                             {"a_err", f1.exponent_err},
                             {"b_err", f1.prefactor_err},
                             {"n", f1.n_points}};
        fit_json["line2"] = {{"a", f2.exponent},
                             {"b", f2.prefactor},
                             {"a_err", f2.exponent_err},
                             {"b_err", f2.prefactor_err},
                             {"n", f2.n_points}};
        std::cout << fit_json.dump(2) << '\n';
    }
    const auto fit_path = fs::path(common.out_dir) / "fit.ndjson";
    std::ofstream fout(fit_path, std::ios::binary | std::ios::trunc);
    fout << fit_json.dump() << '\n';
    fout.close();
    manifest.add_file(fit_path);

    stamp(manifest, config, "gaps", start);
    manifest.run()["failed_points"] = failures;
    manifest.write();
    if (failures == alephs.size()) return kExitNumerical;
    return failures ? kExitPartial : kExitOk;
}

// ------------------------------ melt -------------------------------------

struct MeltSeries {
    double aleph = 0.0;
    double period = 0.0;
    std::vector<double> times, R, Rbar_times, Rbar;
};

MeltSeries run_melt(const cfg::RunConfig& config, const CommonOpts& common) {
    twa::EnsembleConfig e = ensemble_from(config, common);
    const auto ens = twa::run_ensemble(e, config.tilde);
    const auto series = melting::circular_variance_series(ens);

    MeltSeries out;
    out.aleph = config.aleph;
    out.times = series.times;
    out.R = series.R;
    try {
        out.period = melting::estimate_period(series.times, series.mean_angle);
    } catch (const std::exception&) {
        out.period = 0.0;  // constant mean angle; R-bar equals R
    }
    const auto avg = melting::period_average(series.times, series.R, out.period);
    out.Rbar_times = avg.times;
    out.Rbar = avg.values;
    return out;
}

int cmd_melt(const CommonOpts& common, const std::string& aleph_list, std::size_t ntraj,
             double t_end) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    if (ntraj) config.n_traj = ntraj;
    if (t_end > 0) config.t_end = t_end;
    const auto alephs = parse_list(aleph_list, "aleph");

    io::Manifest manifest(common.out_dir);
    io::CsvWriter index_csv(fs::path(common.out_dir) / "melt_index.csv",
                            {"aleph", "period", "file"});
    for (double a : alephs) {
        cfg::RunConfig run = config;
        run.aleph = a;
        const auto melt = run_melt(run, common);
        const std::string name = "melt_R_aleph" + io::format_double(a) + ".csv";
        io::CsvWriter csv(fs::path(common.out_dir) / name, {"t", "R", "Rbar"});
        // align R-bar (trimmed) onto the R grid
        std::size_t j = 0;
        for (std::size_t k = 0; k < melt.times.size(); ++k) {
            double rbar = std::numeric_limits<double>::quiet_NaN();
            while (j < melt.Rbar_times.size() && melt.Rbar_times[j] < melt.times[k] - 1e-9) ++j;
            if (j < melt.Rbar_times.size() && std::abs(melt.Rbar_times[j] - melt.times[k]) < 1e-9) {
                rbar = melt.Rbar[j];
            }
            csv.row({melt.times[k], melt.R[k], rbar});
        }
        manifest.add_file(csv.close());
        index_csv.row_mixed({io::format_double(a), io::format_double(melt.period), name});
    }
    manifest.add_file(index_csv.close());
    stamp(manifest, config, "melt", start);
    manifest.write();
    return kExitOk;
}

// ---------------------------- collapse ------------------------------------

std::vector<melting::Curve> read_melt_dir(const fs::path& dir, std::vector<double>& alephs) {
    std::ifstream index(dir / "melt_index.csv");
    if (!index) throw cfg::ConfigError("collapse: no melt_index.csv in " + dir.string());
    std::string line;
    std::getline(index, line);  // header
    std::vector<melting::Curve> curves;
    while (std::getline(index, line)) {
        std::stringstream ss(line);
        std::string a_str, period_str, file;
        std::getline(ss, a_str, ',');
        std::getline(ss, period_str, ',');
        std::getline(ss, file, ',');
        melting::Curve c;
        c.label = std::stod(a_str);
        std::ifstream data(dir / file);
        if (!data) throw cfg::ConfigError("collapse: missing " + file);
        std::string row;
        std::getline(data, row);  // header
        while (std::getline(data, row)) {
            std::stringstream rs(row);
            std::string t_str, r_str, rbar_str;
            std::getline(rs, t_str, ',');
            std::getline(rs, r_str, ',');
            std::getline(rs, rbar_str, ',');
            const double rbar = std::stod(rbar_str);
            if (std::isnan(rbar)) continue;
            c.x.push_back(std::stod(t_str));
            c.y.push_back(rbar);
        }
        alephs.push_back(c.label);
        curves.push_back(std::move(c));
    }
    return curves;
}

int cmd_collapse(const CommonOpts& common, const std::string& from_dir,
                 const std::string& t_refs_text) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);

    std::vector<double> alephs;
    const auto time_curves = read_melt_dir(from_dir, alephs);
    if (time_curves.size() < 3) throw cfg::ConfigError("collapse: need >= 3 melt curves");

    const auto t_refs = parse_list(t_refs_text, "t-refs");
    // build R-bar vs 1/aleph at the fixed reference times by interpolation
    std::vector<melting::Curve> aleph_curves;
    for (double tj : t_refs) {
        melting::Curve c;
        c.label = tj;
        std::vector<std::pair<double, double>> pts;  // (1/aleph, Rbar)
        for (const auto& tc : time_curves) {
            const auto it = std::lower_bound(tc.x.begin(), tc.x.end(), tj);
            if (it == tc.x.begin() || it == tc.x.end()) continue;
            const std::size_t hi = static_cast<std::size_t>(it - tc.x.begin());
            const double w = (tj - tc.x[hi - 1]) / (tc.x[hi] - tc.x[hi - 1]);
            const double r = tc.y[hi - 1] + w * (tc.y[hi] - tc.y[hi - 1]);
            pts.emplace_back(1.0 / tc.label, r);
        }
        std::sort(pts.begin(), pts.end());
        for (const auto& [x, y] : pts) {
            c.x.push_back(x);
            c.y.push_back(y);
        }
        aleph_curves.push_back(std::move(c));
    }

    const auto result = melting::collapse(time_curves, aleph_curves);

    io::Manifest manifest(common.out_dir);
    nlohmann::json j;
    j["d1"] = result.d1;
    j["d2"] = result.d2;
    j["c1"] = result.c1;
    j["c2"] = result.c2;
    j["alpha"] = result.alpha;
    j["beta"] = result.beta;
    j["k1"] = result.k1;
    j["k2"] = result.k2;
    j["quality_before"] = result.quality_before;
    j["quality_after"] = result.quality_after;
    std::cout << j.dump(2) << '\n';
    const auto jpath = fs::path(common.out_dir) / "collapse.ndjson";
    fs::create_directories(common.out_dir);
    std::ofstream jout(jpath, std::ios::binary | std::ios::trunc);
    jout << j.dump() << '\n';
    jout.close();
    manifest.add_file(jpath);

    auto write_family = [&](const std::vector<melting::Curve>& family, const std::string& name,
                            const std::string& label_name) {
        io::CsvWriter csv(fs::path(common.out_dir) / name, {label_name, "x", "Rbar"});
        for (const auto& c : family) {
            for (std::size_t i = 0; i < c.x.size(); ++i) csv.row({c.label, c.x[i], c.y[i]});
        }
        manifest.add_file(csv.close());
    };
    write_family(result.rescaled_time_curves, "rescaled_time.csv", "aleph");
    write_family(result.rescaled_aleph_curves, "rescaled_aleph.csv", "t_ref");
    write_family(result.universal_time_curves, "universal.csv", "aleph");

    stamp(manifest, config, "collapse", start);
    manifest.write();
    return kExitOk;
}

// ----------------------------- wigner -------------------------------------

int cmd_wigner(const CommonOpts& common, std::size_t ntraj, const std::string& snapshots,
               std::size_t bins, int margin, double smooth_sigma) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    if (ntraj) config.n_traj = ntraj;
    if (snapshots.empty()) throw cfg::ConfigError("wigner: --snapshots is required");

    twa::EnsembleConfig e = ensemble_from(config, common);
    e.snapshot_times = parse_list(snapshots, "snapshots");
    const double t_max = *std::max_element(e.snapshot_times.begin(), e.snapshot_times.end());
    e.t_end = std::max(e.t_end, t_max);
    const auto ens = twa::run_ensemble(e, config.tilde);

    // classical reference: same parameters, long trajectory
    meanfield::IntegrateOptions gpe_opts{config.dt, std::max(200.0, t_max), 10};
    const auto traj = meanfield::integrate_gpe({{0.05, 0.0}, {0.05, 0.0}},
                                               model::rescale_params(config.tilde, model::ScaleParam(1.0)),
                                               gpe_opts);

    io::Manifest manifest(common.out_dir);
    io::CsvWriter conf_csv(fs::path(common.out_dir) / "confinement.csv",
                           {"t", "mode", "fraction", "clipped"});
    for (int mode : {1, 2}) {
        const auto grid = wigner::grid_for_trajectory(traj, mode, 1.5, bins);
        const auto mask = wigner::attractor_mask(traj, mode, grid, margin);
        for (double t : e.snapshot_times) {
            auto density = wigner::histogram2d(ens, mode, t, grid);
            if (smooth_sigma > 0.0) density = wigner::smooth(density, smooth_sigma);
            const double frac = wigner::confinement_fraction(density, mask);
            conf_csv.row({t, static_cast<double>(mode), frac, static_cast<double>(density.clipped)});

            // binary grid dump with a JSON header line
            const std::string name = "wigner_mode" + std::to_string(mode) + "_t" +
                                     io::format_double(t) + ".wig";
            const auto path = fs::path(common.out_dir) / name;
            nlohmann::json header;
            header["x_min"] = grid.x_min;
            header["x_max"] = grid.x_max;
            header["y_min"] = grid.y_min;
            header["y_max"] = grid.y_max;
            header["nx"] = grid.nx;
            header["ny"] = grid.ny;
            header["t"] = t;
            header["aleph"] = config.aleph;
            header["mode"] = mode;
            header["clipped"] = density.clipped;
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            out << header.dump() << '\n';
            out.write(reinterpret_cast<const char*>(density.weight.data()),
                      static_cast<std::streamsize>(density.weight.size() * sizeof(double)));
            out.close();
            manifest.add_file(path);
        }
    }
    manifest.add_file(conf_csv.close());
    manifest.run()["diverged"] = ens.diverged_count;
    stamp(manifest, config, "wigner", start);
    manifest.write();
    return kExitOk;
}

// ---------------------------- liouville ------------------------------------

int cmd_liouville(const CommonOpts& common, const std::string& cutoff_text, int k) {
    const auto start = Clock::now();
    cfg::RunConfig config = load_config(common);
    const auto cut_vals = parse_list(cutoff_text, "cutoff");
    if (cut_vals.size() != 2) throw cfg::ConfigError("--cutoff needs two entries n1,n2");
    fock::FockCutoff cutoff{static_cast<int>(cut_vals[0]), static_cast<int>(cut_vals[1])};

    const auto params = config.physical();
    const auto liou = fock::build_liouvillian(params, cutoff);
    const auto eigs = fock::low_spectrum(liou, k);
    const auto rho = fock::steady_state(liou);

    io::Manifest manifest(common.out_dir);
    io::CsvWriter eig_csv(fs::path(common.out_dir) / "eigenvalues.csv", {"re", "im"});
    for (const auto& ev : eigs) eig_csv.row({ev.real(), ev.imag()});
    manifest.add_file(eig_csv.close());

    nlohmann::json j;
    j["n1"] = fock::mode_occupation(rho, 1, cutoff);
    j["n2"] = fock::mode_occupation(rho, 2, cutoff);
    j["purity"] = (rho * rho).trace().real();
    j["top_level_population"] = fock::top_level_population(rho, cutoff);
    j["cutoff_ok"] = fock::top_level_population(rho, cutoff) < 1e-6;
    std::cout << j.dump(2) << '\n';
    const auto jpath = fs::path(common.out_dir) / "steady_state.ndjson";
    std::ofstream jout(jpath, std::ios::binary | std::ios::trunc);
    jout << j.dump() << '\n';
    jout.close();
    manifest.add_file(jpath);

    stamp(manifest, config, "liouville", start);
    manifest.write();
    return kExitOk;
}

// ---------------------------- reproduce ------------------------------------

int cmd_reproduce(const CommonOpts& common, const std::string& figure, const std::string& alephs,
                  std::size_t ntraj) {
    CommonOpts c = common;
    if (figure == "fig1") {
        return cmd_sweep(c, "0.6:1.2:0.05", 5.0, 1024);
    }
    if (figure == "fig2") {
        int rc = 0;
        for (double a : parse_list(alephs.empty() ? "200,4000" : alephs, "aleph")) {
            CommonOpts ci = c;
            ci.aleph = a;
            ci.aleph_set = true;
            ci.out_dir = c.out_dir + "/aleph" + io::format_double(a);
            rc = std::max(rc, cmd_twa(ci, ntraj ? ntraj : 3000, 300.0, 0.0, 0, "", false));
        }
        return rc;
    }
    if (figure == "fig3") {
        SpectroParams sp;
        return cmd_gaps(c, alephs.empty() ? "500,1000,2000,4000,8000" : alephs,
                        ntraj ? ntraj : 10000, sp, "160,200,300,560,1100", 0.0,
                        std::numeric_limits<double>::infinity());
    }
    if (figure == "fig4") {
        CommonOpts ci = c;
        if (!ci.aleph_set) {
            ci.aleph = 4000.0;
            ci.aleph_set = true;
        }
        return cmd_wigner(ci, ntraj ? ntraj : 5000, "0,2,10,60,150", 256, 2, 0.0);
    }
    if (figure == "fig5") {
        const std::string aleph_list = alephs.empty() ? "1000,2000,4000,8000" : alephs;
        const int rc = cmd_melt(c, aleph_list, ntraj ? ntraj : 5000, 400.0);
        if (rc != kExitOk) return rc;
        return cmd_collapse(c, c.out_dir, "30,45,60,80,100");
    }
    throw cfg::ConfigError("reproduce: unknown figure '" + figure +
                           "' (expected fig1..fig5)");
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"qmelt — coupled Kerr-cavity limit-torus simulation and analysis"};
    app.require_subcommand(1);

    CommonOpts common;

    // gpe
    auto* gpe = app.add_subcommand("gpe", "integrate the mean-field equations");
    double gpe_omega = 0.0, gpe_tend = 1e4, gpe_dt = 1e-3, gpe_transient = 50.0;
    std::size_t gpe_stride = 10;
    add_common(gpe, common);
    gpe->add_option("--omega", gpe_omega, "override both cavity frequencies");
    gpe->add_option("--t-end", gpe_tend, "integration time");
    gpe->add_option("--dt", gpe_dt, "integrator step");
    gpe->add_option("--stride", gpe_stride, "sampling stride");
    gpe->add_option("--transient", gpe_transient, "spectrum transient discard");

    // lyapunov
    auto* lyap = app.add_subcommand("lyapunov", "Lyapunov spectrum at one parameter point");
    double ly_omega = 0.0, ly_total = 1e4, ly_transient = 100.0, ly_renorm = 0.1, ly_dt = 1e-3;
    add_common(lyap, common);
    lyap->add_option("--omega", ly_omega, "override both cavity frequencies");
    lyap->add_option("--t-total", ly_total, "accumulation time");
    lyap->add_option("--transient", ly_transient, "transient discard");
    lyap->add_option("--renorm", ly_renorm, "re-orthonormalization interval");
    lyap->add_option("--dt", ly_dt, "integrator step");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "classify attractors over a frequency grid");
    std::string sweep_grid = "0.6:1.2:0.01";
    double sweep_window = 5.0;
    std::size_t sweep_bins = 2048;
    add_common(sweep, common);
    sweep->add_option("--omega", sweep_grid, "grid 'start:stop:step' or comma list");
    sweep->add_option("--omega-window", sweep_window, "emitted frequency window");
    sweep->add_option("--max-bins", sweep_bins, "max spectrum rows per point");

    // twa
    auto* twa_cmd = app.add_subcommand("twa", "stochastic truncated-Wigner ensemble");
    std::size_t twa_ntraj = 0, twa_stride = 0;
    double twa_tend = 0.0, twa_dt = 0.0;
    std::string twa_snapshots;
    bool twa_heun = false;
    add_common(twa_cmd, common);
    twa_cmd->add_option("--ntraj", twa_ntraj, "trajectory count");
    twa_cmd->add_option("--t-end", twa_tend, "integration time");
    twa_cmd->add_option("--dt", twa_dt, "step size");
    twa_cmd->add_option("--stride", twa_stride, "reduction sampling stride");
    twa_cmd->add_option("--snapshots", twa_snapshots, "comma list of snapshot times");
    twa_cmd->add_flag("--heun", twa_heun, "stochastic Heun scheme (sensitivity checks)");

    // spectrogram
    auto* spectro = app.add_subcommand("spectrogram", "time-resolved emission spectrum");
    SpectroParams sp;
    std::size_t sg_ntraj = 0;
    double sg_window = 5.0;
    add_common(spectro, common);
    spectro->add_option("--ntraj", sg_ntraj, "trajectory count");
    spectro->add_option("--t0", sp.t0, "correlation reference time");
    spectro->add_option("--tau-max", sp.tau_max, "lag window");
    spectro->add_option("--tau-stride", sp.tau_stride, "lag sampling stride (steps)");
    spectro->add_option("--n-t0", sp.n_t0, "number of reference times");
    spectro->add_option("--dt0", sp.dt0, "reference-time spacing");
    spectro->add_option("--window-width", sp.window_width, "frame length (0: auto)");
    spectro->add_option("--hop", sp.hop, "frame advance");
    spectro->add_option("--omega-window", sg_window, "emitted frequency window");

    // gaps
    auto* gaps = app.add_subcommand("gaps", "Liouvillian gaps vs the scaling parameter");
    std::string gaps_alephs = "500,1000,2000,4000,8000";
    std::string gaps_taus;
    std::size_t gaps_ntraj = 0;
    double fit_lo = 0.0, fit_hi = std::numeric_limits<double>::infinity();
    SpectroParams gap_sp;
    add_common(gaps, common);
    gaps->add_option("--aleph-list", gaps_alephs, "comma list of scaling parameters");
    gaps->add_option("--ntraj", gaps_ntraj, "trajectory count per point");
    gaps->add_option("--tau-max", gaps_taus, "lag window per point (single or matching list)");
    gaps->add_option("--t0", gap_sp.t0, "correlation reference time");
    gaps->add_option("--n-t0", gap_sp.n_t0, "number of reference times");
    gaps->add_option("--window-width", gap_sp.window_width, "frame length (0: auto)");
    gaps->add_option("--hop", gap_sp.hop, "frame advance");
    gaps->add_option("--fit-min", fit_lo, "fit range lower bound");
    gaps->add_option("--fit-max", fit_hi, "fit range upper bound");

    // melt
    auto* melt = app.add_subcommand("melt", "circular-variance dephasing series");
    std::string melt_alephs = "1000,2000,4000,8000";
    std::size_t melt_ntraj = 0;
    double melt_tend = 0.0;
    add_common(melt, common);
    melt->add_option("--aleph-list", melt_alephs, "comma list of scaling parameters");
    melt->add_option("--ntraj", melt_ntraj, "trajectory count per point");
    melt->add_option("--t-end", melt_tend, "integration time");

    // collapse
    auto* collapse = app.add_subcommand("collapse", "universal scaling collapse");
    std::string collapse_from, collapse_trefs = "30,45,60,80,100";
    add_common(collapse, common);
    collapse->add_option("--from", collapse_from, "directory with melt output")->required();
    collapse->add_option("--t-refs", collapse_trefs, "fixed reference times");

    // wigner
    auto* wig = app.add_subcommand("wigner", "phase-space histogram reconstruction");
    std::size_t wig_ntraj = 0, wig_bins = 256;
    int wig_margin = 2;
    double wig_smooth = 0.0;
    std::string wig_snapshots;
    add_common(wig, common);
    wig->add_option("--ntraj", wig_ntraj, "trajectory count");
    wig->add_option("--snapshots", wig_snapshots, "comma list of snapshot times")->required();
    wig->add_option("--bins", wig_bins, "grid bins per axis");
    wig->add_option("--margin", wig_margin, "mask dilation (cells)");
    wig->add_option("--smooth", wig_smooth, "Gaussian smoothing sigma (cells)");

    // liouville
    auto* liou = app.add_subcommand("liouville", "exact Lindblad spectrum at small cutoff");
    std::string liou_cutoff = "8,8";
    int liou_k = 10;
    add_common(liou, common);
    liou->add_option("--cutoff", liou_cutoff, "per-mode Fock truncation n1,n2");
    liou->add_option("--k", liou_k, "eigenvalue count");

    // reproduce
    auto* rep = app.add_subcommand("reproduce", "desk-scale analogue of a paper-style figure");
    std::string rep_fig;
    std::string rep_alephs;
    std::size_t rep_ntraj = 0;
    add_common(rep, common);
    rep->add_option("figure", rep_fig, "fig1 | fig2 | fig3 | fig4 | fig5")->required();
    rep->add_option("--aleph-list", rep_alephs, "override the scaling-parameter list");
    rep->add_option("--ntraj", rep_ntraj, "override the trajectory count");

    std::vector<std::string> argv(args);
    try {
        std::vector<const char*> raw;
        raw.push_back("qmelt");
        for (const auto& a : argv) raw.push_back(a.c_str());
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gpe->parsed()) return cmd_gpe(common, gpe_omega, gpe_tend, gpe_dt, gpe_stride, gpe_transient);
        if (lyap->parsed()) return cmd_lyapunov(common, ly_omega, ly_total, ly_transient, ly_renorm, ly_dt);
        if (sweep->parsed()) return cmd_sweep(common, sweep_grid, sweep_window, sweep_bins);
        if (twa_cmd->parsed())
            return cmd_twa(common, twa_ntraj, twa_tend, twa_dt, twa_stride, twa_snapshots, twa_heun);
        if (spectro->parsed()) return cmd_spectrogram(common, sg_ntraj, sp, sg_window);
        if (gaps->parsed())
            return cmd_gaps(common, gaps_alephs, gaps_ntraj, gap_sp, gaps_taus, fit_lo, fit_hi);
        if (melt->parsed()) return cmd_melt(common, melt_alephs, melt_ntraj, melt_tend);
        if (collapse->parsed()) return cmd_collapse(common, collapse_from, collapse_trefs);
        if (wig->parsed())
            return cmd_wigner(common, wig_ntraj, wig_snapshots, wig_bins, wig_margin, wig_smooth);
        if (liou->parsed()) return cmd_liouville(common, liou_cutoff, liou_k);
        if (rep->parsed()) return cmd_reproduce(common, rep_fig, rep_alephs, rep_ntraj);
    } catch (const cfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitConfig;
}

}  // namespace qmelt::cli
