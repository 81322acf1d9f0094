// fockspace.hpp — Exact Lindblad machinery on a truncated two-mode Fock
// space: sparse Hamiltonian and Liouvillian construction (column-stacking
// vectorization), steady state, low-lying spectrum via shift-invert Arnoldi,
// and master-equation evolution with a Krylov exponential propagator.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <vector>

#include "qmelt/model.hpp"

namespace qmelt::fock {

using Complex = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<Complex>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

struct FockCutoff {
    int n_max_1 = 8;
    int n_max_2 = 8;

    int dim1() const { return n_max_1 + 1; }
    int dim2() const { return n_max_2 + 1; }
    int dim() const { return dim1() * dim2(); }  // product Hilbert space
    void validate() const;
};

// Single-mode ladder operator a on a (n_max+1)-dimensional space.
SparseMatrix lowering(int n_max);

// Lift a single-mode operator to the product space (mode 1 or 2); the basis
// index is i1 * dim2 + i2.
SparseMatrix embed(const SparseMatrix& op, int mode, const FockCutoff& cutoff);

// omega_k n_k + (U_k/2) a_k^dag^2 a_k^2 - J (a1^dag^2 a2 + a2^dag a1^2),
// hermitian by construction.
SparseMatrix build_hamiltonian(const model::ModelParams& params, const FockCutoff& cutoff);

// Vectorized Liouvillian, -i[H, .] plus the pump, two-photon-loss, and
// optional single-photon channels. Column stacking: vec(A rho B) =
// (B^T kron A) vec(rho).
SparseMatrix build_liouvillian(const model::ModelParams& params, const FockCutoff& cutoff);

struct SteadyStateOptions {
    double shift = 1e-8;          // inverse-iteration shift off the exact kernel
    int max_iterations = 200;
    double residual_tol = 1e-11;  // on ||L rho|| / ||rho||
    double degeneracy_tol = 1e-10;
};

// Null vector of the Liouvillian, reshaped, hermitized, trace-normalized.
// Throws when the kernel is numerically degenerate (second eigenvalue within
// degeneracy_tol of zero), which signals non-unique steady states.
DenseMatrix steady_state(const SparseMatrix& liouvillian, const SteadyStateOptions& opts = {});

struct SpectrumOptions {
    int krylov_dim = 0;        // 0: max(8k, 80) capped by the dimension
    double shift = 1e-6;       // shift-invert reference point
    double tol = 1e-10;        // Ritz residual acceptance
    int max_restarts = 12;
};

// k eigenvalues nearest the shift (about zero), sorted by |Re|. The spectrum
// of a Lindblad generator is closed under conjugation, so complex eigenvalues
// arrive in pairs when the subspace resolves them.
std::vector<Complex> low_spectrum(const SparseMatrix& liouvillian, int k,
                                  const SpectrumOptions& opts = {});

struct EvolveOptions {
    int krylov_dim = 30;
    double max_step = 0.25;     // substep for the Krylov propagator
    double trace_tol = 1e-9;
};

// Evolve vec(rho) with exp(L t) on the given time grid (expects t_grid[0] to
// be >= 0 and increasing). Trace drift beyond trace_tol raises.
std::vector<DenseMatrix> evolve_master(const DenseMatrix& rho0, const SparseMatrix& liouvillian,
                                       const std::vector<double>& t_grid,
                                       const EvolveOptions& opts = {});

// Diagnostics
double trace_norm_residual(const SparseMatrix& liouvillian);  // ||L^dag vec(I)||_inf
double top_level_population(const DenseMatrix& rho, const FockCutoff& cutoff);
double mode_occupation(const DenseMatrix& rho, int mode, const FockCutoff& cutoff);

}  // namespace qmelt::fock
