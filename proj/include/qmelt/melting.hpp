// melting.hpp — Circular-variance dephasing analysis: order parameter R,
// period averaging, exponential relaxation fits, rate power laws, and the
// two-dimensional scaling collapse in time and inverse scaling parameter.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "qmelt/spectra.hpp"
#include "qmelt/twa.hpp"

namespace qmelt::melting {

using Complex = std::complex<double>;

enum class Centering { Origin, Centroid };

// Core: R = 1 - |mean of unit phasors|.
double circular_variance(std::span<const double> angles);

// R(t) over the ensemble's sample grid. Origin centering reads the streamed
// phase resultant; centroid centering re-derives angles about the ensemble
// mean and needs stored fields.
struct VarianceSeries {
    std::vector<double> times;
    std::vector<double> R;
    std::vector<double> mean_angle;  // circular mean, unwrapped
};

VarianceSeries circular_variance_series(const twa::Ensemble& ens,
                                        Centering centering = Centering::Origin);

// Dominant oscillation period of the (unwrapped, detrended) mean angle via
// its spectral peak. Throws when no significant peak exists, advising a
// directly supplied period.
double estimate_period(std::span<const double> times, std::span<const double> mean_angle);

struct AveragedSeries {
    std::vector<double> times;
    std::vector<double> values;
};

// Sliding one-period mean with trapezoidal quadrature; endpoints that do not
// fit a full window are trimmed. T below the grid spacing returns the input.
AveragedSeries period_average(std::span<const double> times, std::span<const double> values,
                              double period);

struct RelaxationFit {
    double delta = 0.0;
    double delta_err = 0.0;
    bool non_monotone = false;  // data wanders beyond noise
    std::size_t n_used = 0;
};

struct RelaxationWindow {
    double x_min = 0.0;        // exclude early transient
    double value_max = 0.95;   // exclude the saturated tail
};

// Nonlinear least squares of R(x) = 1 - exp(-delta x).
RelaxationFit fit_relaxation(std::span<const double> x, std::span<const double> r,
                             const RelaxationWindow& window = {});

struct RatePowerLaw {
    double c = 0.0, d = 0.0;  // delta(x) = c x^d, d signed
    double c_err = 0.0, d_err = 0.0;
    std::size_t n_points = 0;
};

RatePowerLaw fit_rate_power_law(std::span<const double> x, std::span<const double> delta);

// One R-bar curve: label is the fixed parameter (aleph_j for time curves,
// t_j for inverse-aleph curves); x is the running axis.
struct Curve {
    double label = 0.0;
    std::vector<double> x;
    std::vector<double> y;
};

struct CollapseOptions {
    double aleph0 = 0.0;  // <= 0: smallest aleph in the curve set
    double t0 = 0.0;      // <= 0: earliest post-transient reference time
    RelaxationWindow time_window{20.0, 0.95};   // for fits along t
    RelaxationWindow aleph_window{0.0, 0.95};   // for fits along 1/aleph
};

struct CollapseResult {
    double d1 = 0.0, d2 = 0.0;       // rescaling exponents
    double c1 = 0.0, c2 = 0.0;       // rate prefactors
    double alpha = 0.0, beta = 0.0;  // t = alpha aleph^beta (beta negative)
    double k1 = 0.0, k2 = 0.0;       // final time-axis rescaling
    double quality_before = 0.0;     // mean pairwise L2 distance, raw curves
    double quality_after = 0.0;      // same after axis rescaling
    std::vector<double> delta_t;     // per time-curve rates (aleph_j order)
    std::vector<double> delta_aleph; // per aleph-curve rates (t_j order)
    std::vector<Curve> rescaled_time_curves;   // x = t' = (aleph_j/aleph0)^d1 t
    std::vector<Curve> rescaled_aleph_curves;  // x = (t_j/t0)^d2 / aleph
    std::vector<Curve> universal_time_curves;  // x = k1 (t')^k2
};

// Full collapse pipeline over >= 3 fixed-aleph curves (R vs t) and >= 3
// fixed-t curves (R vs 1/aleph). Throws when the rescaled curves share no
// common support, naming the usable overlap.
CollapseResult collapse(const std::vector<Curve>& r_vs_time,
                        const std::vector<Curve>& r_vs_inv_aleph,
                        const CollapseOptions& opts = {});

// Mean pairwise L2 distance of a curve family over its common support; the
// collapse quality metric.
double curve_family_distance(const std::vector<Curve>& curves);

}  // namespace qmelt::melting
