// wigner.hpp — Phase-space histogram reconstruction from TWA samples and
// confinement metrics against the classical attractor footprint. This is the
// sampled quasiprobability view (a histogram of Wigner-distributed fields),
// not a tomographic inversion.

#pragma once

#include <vector>

#include "qmelt/meanfield.hpp"
#include "qmelt/twa.hpp"

namespace qmelt::wigner {

struct PhaseSpaceGrid {
    double x_min = -1.0, x_max = 1.0;  // Re(alpha)
    double y_min = -1.0, y_max = 1.0;  // Im(alpha)
    std::size_t nx = 256, ny = 256;

    void validate() const;
    double dx() const { return (x_max - x_min) / static_cast<double>(nx); }
    double dy() const { return (y_max - y_min) / static_cast<double>(ny); }
    // cell index or -1 when outside
    long cell(double x, double y) const;
};

// Grid covering margin_factor times the trajectory's extent per mode.
PhaseSpaceGrid grid_for_trajectory(const meanfield::Trajectory& traj, int mode,
                                   double margin_factor = 1.5, std::size_t bins = 256);

struct Density {
    PhaseSpaceGrid grid;
    std::vector<double> weight;  // nx*ny, row-major in y (iy * nx + ix), sums to 1
    std::size_t clipped = 0;     // samples outside the grid
    std::size_t counted = 0;
};

// Normalized histogram of the ensemble snapshot nearest to time t.
Density histogram2d(const twa::Ensemble& ens, int mode, double t, const PhaseSpaceGrid& grid);

// Optional isotropic Gaussian smoothing (sigma in cells); renormalizes.
Density smooth(const Density& density, double sigma_cells);

struct AttractorMask {
    PhaseSpaceGrid grid;
    std::vector<std::uint8_t> inside;  // nx*ny
    std::size_t cell_count = 0;
};

// Cells visited by the post-transient trajectory, dilated by margin cells.
AttractorMask attractor_mask(const meanfield::Trajectory& traj, int mode,
                             const PhaseSpaceGrid& grid, int margin = 2,
                             double transient_time = 50.0);

// Fraction of the density weight lying inside the mask; grids must match.
double confinement_fraction(const Density& density, const AttractorMask& mask);

}  // namespace qmelt::wigner
