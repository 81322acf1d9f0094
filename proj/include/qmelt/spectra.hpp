// spectra.hpp — Two-time correlations from TWA ensembles, windowed emission
// spectrograms, peak tracking, decay-rate (Liouvillian gap) extraction, and
// power-law fits of the gaps against the scaling parameter.

#pragma once

#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "qmelt/fft.hpp"
#include "qmelt/twa.hpp"

namespace qmelt::spectra {

using Complex = std::complex<double>;

struct CorrelationSeries {
    double t0 = 0.0;
    std::vector<double> taus;     // uniform lag grid starting at 0
    std::vector<Complex> values;  // <conj(a1(t0+tau)) a1(t0)>
    std::size_t n_traj = 0;
    bool t0_in_transient = false;
};

// Assemble the trajectory-averaged correlation from the taps streamed during
// run_ensemble. Throws if taps were not configured or no trajectory survived;
// flags t0 below the transient floor.
CorrelationSeries two_time_correlation(const twa::Ensemble& ens, double transient_floor = 20.0);

struct SpectrogramOptions {
    double window_width = 80.0;  // frame length [time]
    double hop = 10.0;           // frame advance [time]
    fft::Window window = fft::Window::Hann;
    std::size_t pad_factor = 8;  // zero-padding for sub-bin interpolation
};

// Short-time transform of the correlation over the lag axis. The stored array
// is the magnitude of the one-sided windowed transform, S = |2 F(t, Omega)|,
// which coincides with the 2 Re form at spectral peaks and decays across
// frames at the underlying mode's rate.
struct Spectrogram {
    std::vector<double> frame_times;             // frame centers on the lag axis
    std::vector<double> frequency;               // ascending two-sided grid
    std::vector<std::vector<double>> magnitude;  // [frame][frequency], |response|
    std::vector<std::vector<Complex>> response;  // 2 F(t, Omega); linear in the input
    double bin_width = 0.0;                      // grid spacing after padding
    double resolution = 0.0;                     // 2 pi / window_width
    double window_width = 0.0;
    fft::Window window = fft::Window::Hann;
};

Spectrogram spectrogram(const CorrelationSeries& corr, const SpectrogramOptions& opts);

struct PeakTrack {
    double frequency = 0.0;             // track mean
    double frequency_std = 0.0;
    std::vector<double> times;          // frames where the peak was found
    std::vector<double> amplitude;
    std::vector<double> frequencies;    // per-frame interpolated peak position
    bool merge_flagged = false;         // another track competed for a peak
};

// Follow the n_peaks strongest spectral lines across frames; association is
// nearest-frequency with a gate of gate_bins resolution widths. Frames where
// a line dips below detection leave a gap in the track.
std::vector<PeakTrack> track_peaks(const Spectrogram& spec, std::size_t n_peaks = 2,
                                   double gate_bins = 3.0);

struct GapEstimate {
    double nu = 0.0;         // line frequency
    double lambda = 0.0;     // decay rate of the line amplitude
    double nu_err = 0.0;
    double lambda_err = 0.0;
    int peak_index = 0;
    bool clamped = false;    // non-decaying track, rate clamped at zero
    std::size_t frames_used = 0;
};

// Least-squares fit of log amplitude against frame time per track. Frames
// below floor_rel times the track maximum are dropped (noise floor).
std::vector<GapEstimate> extract_gaps(const std::vector<PeakTrack>& tracks,
                                      double floor_rel = 0.02);

struct PowerLawFit {
    double exponent = 0.0;   // a in y = b x^(-a)
    double prefactor = 0.0;  // b
    double exponent_err = 0.0;
    double prefactor_err = 0.0;
    std::size_t n_points = 0;
    bool degenerate = false;  // two points: exact interpolation, no uncertainty
};

// Log-log linear regression over points with x inside [x_min, x_max].
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y,
                          double x_min = 0.0,
                          double x_max = std::numeric_limits<double>::infinity());

// Plain least-squares line fit with standard errors (shared with melting).
struct LinearFit {
    double slope = 0.0, intercept = 0.0;
    double slope_err = 0.0, intercept_err = 0.0;
    double residual_rms = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace qmelt::spectra
