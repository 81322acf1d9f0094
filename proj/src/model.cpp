#include "qmelt/model.hpp"

#include <cmath>
#include <stdexcept>

namespace qmelt::model {

namespace {

void check_rates(const std::array<double, 2>& omega, const std::array<double, 2>& kerr,
                 double tunnel, const std::array<double, 2>& pump,
                 const std::array<double, 2>& tpl, const std::array<double, 2>& opl,
                 double n_th) {
    auto finite = [](double v) { return std::isfinite(v); };
    for (int k = 0; k < 2; ++k) {
        if (!finite(omega[k]) || !finite(kerr[k]) || !finite(pump[k]) || !finite(tpl[k]) ||
            !finite(opl[k])) {
            throw std::invalid_argument("model: parameters must be finite");
        }
        if (pump[k] < 0.0) throw std::invalid_argument("model: pump rate must be >= 0");
        if (tpl[k] <= 0.0) throw std::invalid_argument("model: two-photon loss must be > 0");
        if (opl[k] < 0.0) throw std::invalid_argument("model: one-photon loss must be >= 0");
        if (kerr[k] < 0.0) throw std::invalid_argument("model: Kerr strength must be >= 0");
    }
    if (!finite(tunnel)) throw std::invalid_argument("model: tunneling must be finite");
    if (!finite(n_th) || n_th < 0.0) {
        throw std::invalid_argument("model: thermal occupation must be >= 0");
    }
}

}  // namespace

void ModelParams::validate() const {
    check_rates(omega, kerr, tunnel, pump, two_photon_loss, one_photon_loss,
                thermal_occupation);
}

void TildeParams::validate() const {
    check_rates(omega, kerr, tunnel, pump, two_photon_loss, one_photon_loss,
                thermal_occupation);
}

ScaleParam::ScaleParam(double a) : aleph(a) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw std::invalid_argument("scaling parameter must be positive and finite");
    }
}

ModelParams rescale_params(const TildeParams& tilde, const ScaleParam& scale) {
    tilde.validate();
    const double a = scale.aleph;
    const double ra = std::sqrt(a);
    ModelParams p;
    p.omega = tilde.omega;
    p.kerr = {tilde.kerr[0] / a, tilde.kerr[1] / a};
    p.tunnel = tilde.tunnel / ra;
    p.pump = tilde.pump;
    p.two_photon_loss = {tilde.two_photon_loss[0] / a, tilde.two_photon_loss[1] / a};
    p.one_photon_loss = tilde.one_photon_loss;
    p.thermal_occupation = tilde.thermal_occupation;
    return p;
}

ModelParams dual_rescale_params(const TildeParams& tilde, const ScaleParam& scale) {
    tilde.validate();
    const double a = scale.aleph;
    const double ra = std::sqrt(a);
    ModelParams p;
    p.omega = {tilde.omega[0] * a, tilde.omega[1] * a};
    p.kerr = tilde.kerr;
    p.tunnel = tilde.tunnel * ra;
    p.pump = {tilde.pump[0] * a, tilde.pump[1] * a};
    p.two_photon_loss = tilde.two_photon_loss;
    p.one_photon_loss = tilde.one_photon_loss;
    p.thermal_occupation = tilde.thermal_occupation;
    return p;
}

TildeParams unscale_params(const ModelParams& params, const ScaleParam& scale) {
    params.validate();
    const double a = scale.aleph;
    const double ra = std::sqrt(a);
    TildeParams t;
    t.omega = params.omega;
    t.kerr = {params.kerr[0] * a, params.kerr[1] * a};
    t.tunnel = params.tunnel * ra;
    t.pump = params.pump;
    t.two_photon_loss = {params.two_photon_loss[0] * a, params.two_photon_loss[1] * a};
    t.one_photon_loss = params.one_photon_loss;
    t.thermal_occupation = params.thermal_occupation;
    return t;
}

std::pair<TildeParams, SweepMarkers> default_params() {
    TildeParams t;  // member defaults are the reference set
    return {t, SweepMarkers{}};
}

}  // namespace qmelt::model
