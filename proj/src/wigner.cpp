#include "qmelt/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qmelt::wigner {

void PhaseSpaceGrid::validate() const {
    if (!(x_max > x_min) || !(y_max > y_min)) {
        throw std::invalid_argument("grid: empty extent");
    }
    if (nx < 2 || ny < 2) throw std::invalid_argument("grid: need at least 2 bins per axis");
}

long PhaseSpaceGrid::cell(double x, double y) const {
    if (x < x_min || x >= x_max || y < y_min || y >= y_max) return -1;
    const auto ix = static_cast<std::size_t>((x - x_min) / dx());
    const auto iy = static_cast<std::size_t>((y - y_min) / dy());
    if (ix >= nx || iy >= ny) return -1;
    return static_cast<long>(iy * nx + ix);
}

PhaseSpaceGrid grid_for_trajectory(const meanfield::Trajectory& traj, int mode,
                                   double margin_factor, std::size_t bins) {
    if (traj.states.empty()) throw std::invalid_argument("grid_for_trajectory: empty trajectory");
    double extent = 0.0;
    for (const auto& s : traj.states) {
        const auto a = (mode == 1) ? s.alpha1 : s.alpha2;
        extent = std::max({extent, std::abs(a.real()), std::abs(a.imag())});
    }
    if (extent == 0.0) extent = 1.0;
    PhaseSpaceGrid grid;
    grid.x_min = grid.y_min = -margin_factor * extent;
    grid.x_max = grid.y_max = margin_factor * extent;
    grid.nx = grid.ny = bins;
    grid.validate();
    return grid;
}

Density histogram2d(const twa::Ensemble& ens, int mode, double t, const PhaseSpaceGrid& grid) {
    grid.validate();
    if (mode != 1 && mode != 2) throw std::invalid_argument("histogram2d: mode must be 1 or 2");
    if (ens.snapshots.empty()) {
        throw std::invalid_argument("histogram2d: ensemble holds no snapshots");
    }
    std::size_t best = 0;
    double best_dist = std::abs(ens.snapshot_times[0] - t);
    for (std::size_t k = 1; k < ens.snapshot_times.size(); ++k) {
        const double d = std::abs(ens.snapshot_times[k] - t);
        if (d < best_dist) {
            best = k;
            best_dist = d;
        }
    }

    Density density;
    density.grid = grid;
    density.weight.assign(grid.nx * grid.ny, 0.0);
    for (const auto& state : ens.snapshots[best]) {
        const auto a = (mode == 1) ? state.alpha1 : state.alpha2;
        if (std::isnan(a.real())) continue;  // diverged trajectory
        const long c = grid.cell(a.real(), a.imag());
        if (c < 0) {
            ++density.clipped;
            continue;
        }
        density.weight[static_cast<std::size_t>(c)] += 1.0;
        ++density.counted;
    }
    if (density.counted == 0) {
        throw std::runtime_error("histogram2d: every sample fell outside the grid");
    }
    const double inv = 1.0 / static_cast<double>(density.counted);
    for (double& w : density.weight) w *= inv;
    return density;
}

Density smooth(const Density& density, double sigma_cells) {
    if (sigma_cells <= 0.0) return density;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_cells)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] =
            std::exp(-0.5 * (i / sigma_cells) * (i / sigma_cells));
        ksum += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (double& k : kernel) k /= ksum;

    const auto nx = static_cast<long>(density.grid.nx);
    const auto ny = static_cast<long>(density.grid.ny);
    std::vector<double> tmp(density.weight.size(), 0.0);
    std::vector<double> out(density.weight.size(), 0.0);
    for (long iy = 0; iy < ny; ++iy) {
        for (long ix = 0; ix < nx; ++ix) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const long jx = std::clamp(ix + k, 0L, nx - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       density.weight[static_cast<std::size_t>(iy * nx + jx)];
            }
            tmp[static_cast<std::size_t>(iy * nx + ix)] = acc;
        }
    }
    for (long iy = 0; iy < ny; ++iy) {
        for (long ix = 0; ix < nx; ++ix) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const long jy = std::clamp(iy + k, 0L, ny - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp[static_cast<std::size_t>(jy * nx + ix)];
            }
            out[static_cast<std::size_t>(iy * nx + ix)] = acc;
        }
    }
    Density result = density;
    double total = 0.0;
    for (double w : out) total += w;
    if (total > 0.0) {
        for (double& w : out) w /= total;
    }
    result.weight = std::move(out);
    return result;
}

AttractorMask attractor_mask(const meanfield::Trajectory& traj, int mode,
                             const PhaseSpaceGrid& grid, int margin, double transient_time) {
    grid.validate();
    if (margin < 0) throw std::invalid_argument("attractor_mask: negative margin");
    AttractorMask mask;
    mask.grid = grid;
    mask.inside.assign(grid.nx * grid.ny, 0);

    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (traj.times[i] < transient_time) continue;
        const auto a = (mode == 1) ? traj.states[i].alpha1 : traj.states[i].alpha2;
        const long c = grid.cell(a.real(), a.imag());
        if (c >= 0) mask.inside[static_cast<std::size_t>(c)] = 1;
    }

    // morphological dilation by a square structuring element of the margin
    if (margin > 0) {
        const auto nx = static_cast<long>(grid.nx);
        const auto ny = static_cast<long>(grid.ny);
        std::vector<std::uint8_t> dilated(mask.inside.size(), 0);
        for (long iy = 0; iy < ny; ++iy) {
            for (long ix = 0; ix < nx; ++ix) {
                if (!mask.inside[static_cast<std::size_t>(iy * nx + ix)]) continue;
                for (long dy = -margin; dy <= margin; ++dy) {
                    for (long dx = -margin; dx <= margin; ++dx) {
                        const long jx = ix + dx, jy = iy + dy;
                        if (jx < 0 || jy < 0 || jx >= nx || jy >= ny) continue;
                        dilated[static_cast<std::size_t>(jy * nx + jx)] = 1;
                    }
                }
            }
        }
        mask.inside = std::move(dilated);
    }
    for (auto v : mask.inside) mask.cell_count += v;
    return mask;
}

double confinement_fraction(const Density& density, const AttractorMask& mask) {
    const auto& g1 = density.grid;
    const auto& g2 = mask.grid;
    if (g1.nx != g2.nx || g1.ny != g2.ny || g1.x_min != g2.x_min || g1.x_max != g2.x_max ||
        g1.y_min != g2.y_min || g1.y_max != g2.y_max) {
        throw std::invalid_argument("confinement_fraction: grid mismatch");
    }
    double frac = 0.0;
    for (std::size_t i = 0; i < density.weight.size(); ++i) {
        if (mask.inside[i]) frac += density.weight[i];
    }
    return frac;
}

}  // namespace qmelt::wigner
