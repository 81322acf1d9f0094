// model.hpp — Physical parameters of the coupled Kerr-cavity model and the
// quantum-to-classical rescaling between tilde (reference) and physical form.

#pragma once

#include <array>
#include <string>

namespace qmelt::model {

// Rates and frequencies of the two-cavity model, in units where the two-photon
// loss of the reference set fixes the timescale. Mode index 0 is cavity 1.
struct ModelParams {
    std::array<double, 2> omega{1.0, 1.0};            // bare frequency
    std::array<double, 2> kerr{0.1, 0.1};             // on-site Kerr strength (U)
    double tunnel = 0.4;                              // nonlinear tunneling (J)
    std::array<double, 2> pump{1.0, 1.0};             // incoherent pump rate (gamma)
    std::array<double, 2> two_photon_loss{1.0, 1.0};  // two-photon loss rate (eta)
    std::array<double, 2> one_photon_loss{0.0, 0.0};  // optional extension (kappa)
    double thermal_occupation = 0.0;                  // optional extension (n_th)

    // Throws std::invalid_argument on negative/non-finite rates or eta <= 0.
    void validate() const;
};

// Same shape, holding the rescaled (tilde) quantities that stay fixed while
// the scaling parameter moves the system between quantum and classical.
struct TildeParams {
    std::array<double, 2> omega{1.0, 1.0};
    std::array<double, 2> kerr{0.1, 0.1};
    double tunnel = 0.4;
    std::array<double, 2> pump{1.0, 1.0};
    std::array<double, 2> two_photon_loss{1.0, 1.0};
    std::array<double, 2> one_photon_loss{0.0, 0.0};
    double thermal_occupation = 0.0;

    void validate() const;
};

// Dimensionless scaling parameter; the classical limit is aleph -> infinity.
struct ScaleParam {
    double aleph = 1.0;

    explicit ScaleParam(double a);
    ScaleParam() = default;
};

// Standard scaling: U = U~/aleph, J = J~/sqrt(aleph), eta = eta~/aleph;
// frequencies, pump and the optional channels pass through.
ModelParams rescale_params(const TildeParams& tilde, const ScaleParam& scale);

// Dual scaling: omega = omega~*aleph, J = J~*sqrt(aleph), gamma = gamma~*aleph;
// Kerr and loss rates pass through.
ModelParams dual_rescale_params(const TildeParams& tilde, const ScaleParam& scale);

// Inverse of rescale_params (tilde values from physical ones at given aleph).
TildeParams unscale_params(const ModelParams& params, const ScaleParam& scale);

// Frequency markers of the reference parameter set.
struct SweepMarkers {
    double limit_cycle_omega = 0.8;
    double limit_torus_omega = 1.0;
};

// Symmetric reference parameter choice (omega = gamma = eta = 1, U = 0.1,
// J = 0.4) plus the frequency markers for the two attractor regimes.
std::pair<TildeParams, SweepMarkers> default_params();

}  // namespace qmelt::model
