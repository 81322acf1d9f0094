#include "qmelt/fockspace.hpp"

#include <Eigen/SparseLU>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "qmelt/rng.hpp"

namespace qmelt::fock {

void FockCutoff::validate() const {
    if (n_max_1 < 2 || n_max_2 < 2) {
        throw std::invalid_argument("fock: cutoff must be at least 2 per mode");
    }
}

SparseMatrix lowering(int n_max) {
    const int d = n_max + 1;
    SparseMatrix a(d, d);
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(n_max));
    for (int n = 1; n <= n_max; ++n) {
        trip.emplace_back(n - 1, n, Complex(std::sqrt(static_cast<double>(n)), 0.0));
    }
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

namespace {

SparseMatrix identity(int d) {
    SparseMatrix id(d, d);
    id.setIdentity();
    return id;
}

// kron(A, B)[iA*rB + iB, jA*cB + jB] = A(iA,jA) B(iB,jB)
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
    SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros()) * static_cast<std::size_t>(b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka) {
        for (SparseMatrix::InnerIterator ita(a, ka); ita; ++ita) {
            for (int kb = 0; kb < b.outerSize(); ++kb) {
                for (SparseMatrix::InnerIterator itb(b, kb); itb; ++itb) {
                    trip.emplace_back(ita.row() * b.rows() + itb.row(),
                                      ita.col() * b.cols() + itb.col(),
                                      ita.value() * itb.value());
                }
            }
        }
    }
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

}  // namespace

SparseMatrix embed(const SparseMatrix& op, int mode, const FockCutoff& cutoff) {
    cutoff.validate();
    if (mode == 1) return kron(op, identity(cutoff.dim2()));
    if (mode == 2) return kron(identity(cutoff.dim1()), op);
    throw std::invalid_argument("embed: mode must be 1 or 2");
}

SparseMatrix build_hamiltonian(const model::ModelParams& params, const FockCutoff& cutoff) {
    params.validate();
    cutoff.validate();
    const SparseMatrix a1 = embed(lowering(cutoff.n_max_1), 1, cutoff);
    const SparseMatrix a2 = embed(lowering(cutoff.n_max_2), 2, cutoff);
    const SparseMatrix a1d = SparseMatrix(a1.adjoint());
    const SparseMatrix a2d = SparseMatrix(a2.adjoint());

    SparseMatrix h = params.omega[0] * (a1d * a1) + params.omega[1] * (a2d * a2);
    h = h + 0.5 * params.kerr[0] * (a1d * a1d * a1 * a1);
    h = h + 0.5 * params.kerr[1] * (a2d * a2d * a2 * a2);
    const SparseMatrix mix = a1d * a1d * a2;
    h = h - params.tunnel * (mix + SparseMatrix(mix.adjoint()));
    h.prune(0.0);
    return h;
}

namespace {

// r * ( conj(L) kron L - (I kron L^dag L + (L^dag L)^T kron I) / 2 )
SparseMatrix dissipator_super(const SparseMatrix& jump, double rate, const SparseMatrix& id) {
    const SparseMatrix jd = SparseMatrix(jump.adjoint());
    const SparseMatrix jdj = jd * jump;
    SparseMatrix out = kron(jump.conjugate(), jump);
    out = out - 0.5 * kron(id, jdj);
    out = out - 0.5 * kron(SparseMatrix(jdj.transpose()), id);
    return rate * out;
}

}  // namespace

SparseMatrix build_liouvillian(const model::ModelParams& params, const FockCutoff& cutoff) {
    const SparseMatrix h = build_hamiltonian(params, cutoff);
    const SparseMatrix id = identity(cutoff.dim());
    const Complex i_unit(0.0, 1.0);

    SparseMatrix liou = -i_unit * (kron(id, h) - kron(SparseMatrix(h.transpose()), id));

    const SparseMatrix a1 = embed(lowering(cutoff.n_max_1), 1, cutoff);
    const SparseMatrix a2 = embed(lowering(cutoff.n_max_2), 2, cutoff);
    const std::array<SparseMatrix, 2> a{a1, a2};
    for (int k = 0; k < 2; ++k) {
        const SparseMatrix ad = SparseMatrix(a[k].adjoint());
        if (params.pump[k] > 0.0) liou = liou + dissipator_super(ad, params.pump[k], id);
        liou = liou + dissipator_super(SparseMatrix(a[k] * a[k]), params.two_photon_loss[k], id);
        const double kappa = params.one_photon_loss[k];
        if (kappa > 0.0) {
            const double nth = params.thermal_occupation;
            liou = liou + dissipator_super(a[k], kappa * (1.0 + nth), id);
            if (nth > 0.0) liou = liou + dissipator_super(ad, kappa * nth, id);
        }
    }
    liou.prune(0.0);
    return liou;
}

namespace {

struct ArnoldiResult {
    std::vector<Complex> eigenvalues;       // of the original operator
    std::vector<Vector> eigenvectors;       // Ritz vectors
    std::vector<double> residuals;          // shift-invert Ritz residuals
};

// Shift-invert Arnoldi about sigma; returns Ritz pairs sorted by |lambda - sigma|.
ArnoldiResult shift_invert_arnoldi(const SparseMatrix& mat, Complex sigma, int m) {
    const int dim = static_cast<int>(mat.rows());
    m = std::min(m, dim);

    SparseMatrix shifted = mat;
    SparseMatrix id(dim, dim);
    id.setIdentity();
    shifted = shifted - sigma * id;
    shifted.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(shifted);
    if (lu.info() != Eigen::Success) {
        throw std::runtime_error("arnoldi: LU factorization of the shifted operator failed");
    }

    // deterministic pseudo-random start vector
    Vector v0(dim);
    rng::GaussianStream seed_stream(0x5eedULL, 0);
    for (int i = 0; i < dim; ++i) {
        v0[i] = Complex(seed_stream.normal(), seed_stream.normal());
    }
    v0.normalize();

    std::vector<Vector> basis;
    basis.reserve(static_cast<std::size_t>(m) + 1);
    basis.push_back(v0);
    Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 1, m);

    int steps = m;
    for (int j = 0; j < m; ++j) {
        Vector w = lu.solve(basis[static_cast<std::size_t>(j)]);
        for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt with one re-pass
            const Complex hij = basis[static_cast<std::size_t>(i)].dot(w);
            hess(i, j) += hij;
            w -= hij * basis[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i <= j; ++i) {
            const Complex corr = basis[static_cast<std::size_t>(i)].dot(w);
            hess(i, j) += corr;
            w -= corr * basis[static_cast<std::size_t>(i)];
        }
        const double nrm = w.norm();
        hess(j + 1, j) = nrm;
        if (nrm < 1e-13) {
            steps = j + 1;
            break;
        }
        w /= nrm;
        basis.push_back(std::move(w));
    }

    const Eigen::MatrixXcd hm = hess.topLeftCorner(steps, steps);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(hm);
    if (es.info() != Eigen::Success) throw std::runtime_error("arnoldi: Hessenberg solve failed");

    const double h_last = steps < m ? 0.0 : std::abs(hess(steps, steps - 1));
    std::vector<int> order(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
    });

    ArnoldiResult result;
    for (int idx : order) {
        const Complex theta = es.eigenvalues()[idx];
        if (std::abs(theta) < 1e-14) continue;  // spurious
        result.eigenvalues.push_back(sigma + 1.0 / theta);
        const auto y = es.eigenvectors().col(idx);
        Vector ritz = Vector::Zero(dim);
        for (int i = 0; i < steps; ++i) ritz += y[i] * basis[static_cast<std::size_t>(i)];
        ritz.normalize();
        result.eigenvectors.push_back(std::move(ritz));
        result.residuals.push_back(h_last * std::abs(y[steps - 1]) / std::abs(theta));
    }
    return result;
}

}  // namespace

std::vector<Complex> low_spectrum(const SparseMatrix& liouvillian, int k,
                                  const SpectrumOptions& opts) {
    if (k < 5) throw std::invalid_argument("low_spectrum: k must be at least 5");
    const int dim = static_cast<int>(liouvillian.rows());

    int m = opts.krylov_dim > 0 ? opts.krylov_dim : std::max(80, 8 * k);
    m = std::min(m, dim);
    for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
        const ArnoldiResult res =
            shift_invert_arnoldi(liouvillian, Complex(opts.shift, 0.0), m);
        std::vector<Complex> accepted;
        for (std::size_t i = 0; i < res.eigenvalues.size() && accepted.size() < 2 * static_cast<std::size_t>(k);
             ++i) {
            if (res.residuals[i] > opts.tol) break;  // sorted by closeness to the shift
            accepted.push_back(res.eigenvalues[i]);
        }
        if (accepted.size() >= static_cast<std::size_t>(k) || m >= dim) {
            std::sort(accepted.begin(), accepted.end(), [](Complex a, Complex b) {
                if (std::abs(a.real()) != std::abs(b.real())) {
                    return std::abs(a.real()) < std::abs(b.real());
                }
                return a.imag() > b.imag();
            });
            if (accepted.size() > static_cast<std::size_t>(k)) accepted.resize(static_cast<std::size_t>(k));
            if (accepted.size() < static_cast<std::size_t>(k)) {
                throw std::runtime_error("low_spectrum: only " + std::to_string(accepted.size()) +
                                         " of " + std::to_string(k) +
                                         " eigenvalues converged at full subspace");
            }
            return accepted;
        }
        m = std::min(dim, 2 * m);
    }
    throw std::runtime_error("low_spectrum: no convergence after " +
                             std::to_string(opts.max_restarts) + " subspace enlargements");
}

DenseMatrix steady_state(const SparseMatrix& liouvillian, const SteadyStateOptions& opts) {
    const int dim2 = static_cast<int>(liouvillian.rows());
    const int dim = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dim2))));
    if (dim * dim != dim2) throw std::invalid_argument("steady_state: operator is not a superoperator");

    const ArnoldiResult res =
        shift_invert_arnoldi(liouvillian, Complex(opts.shift, 0.0), std::min(dim2, 60));
    if (res.eigenvalues.empty()) throw std::runtime_error("steady_state: Arnoldi found no Ritz pairs");

    // Ritz pairs arrive sorted by closeness to the shift (thus to zero)
    const Complex lambda0 = res.eigenvalues[0];
    if (std::abs(lambda0) > 1e-8) {
        throw std::runtime_error("steady_state: nearest eigenvalue " + std::to_string(lambda0.real()) +
                                 " is not a kernel vector");
    }
    if (res.eigenvalues.size() > 1 && std::abs(res.eigenvalues[1]) < opts.degeneracy_tol) {
        throw std::runtime_error(
            "steady_state: numerically degenerate kernel (second eigenvalue magnitude " +
            std::to_string(std::abs(res.eigenvalues[1])) + "); steady state is not unique");
    }

    Vector v = res.eigenvectors[0];
    DenseMatrix rho = Eigen::Map<const DenseMatrix>(v.data(), dim, dim);
    rho = 0.5 * (rho + rho.adjoint().eval());
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-14) throw std::runtime_error("steady_state: traceless kernel vector");
    rho /= tr;

    // final residual check
    Vector flat = Eigen::Map<const Vector>(rho.data(), dim2);
    const double resid = (liouvillian * flat).norm() / flat.norm();
    if (resid > opts.residual_tol * 100.0) {
        throw std::runtime_error("steady_state: residual " + std::to_string(resid) +
                                 " above tolerance");
    }
    return rho;
}

std::vector<DenseMatrix> evolve_master(const DenseMatrix& rho0, const SparseMatrix& liouvillian,
                                       const std::vector<double>& t_grid,
                                       const EvolveOptions& opts) {
    const int dim = static_cast<int>(rho0.rows());
    if (rho0.cols() != dim) throw std::invalid_argument("evolve_master: rho0 must be square");
    if (liouvillian.rows() != dim * dim) {
        throw std::invalid_argument("evolve_master: dimension mismatch with the Liouvillian");
    }
    if (t_grid.empty()) return {};
    for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
        if (t_grid[i + 1] <= t_grid[i]) {
            throw std::invalid_argument("evolve_master: time grid must increase");
        }
    }
    if (t_grid.front() < 0.0) throw std::invalid_argument("evolve_master: negative time");

    // conservative substep from a cheap norm estimate
    double one_norm = 0.0;
    for (int k = 0; k < liouvillian.outerSize(); ++k) {
        double col = 0.0;
        for (SparseMatrix::InnerIterator it(liouvillian, k); it; ++it) col += std::abs(it.value());
        one_norm = std::max(one_norm, col);
    }
    const double h_cap =
        std::min(opts.max_step, one_norm > 0.0 ? static_cast<double>(opts.krylov_dim) / (2.0 * one_norm)
                                               : opts.max_step);

    Vector v = Eigen::Map<const Vector>(rho0.data(), dim * dim);
    const double trace0 = std::abs(rho0.trace());

    // Krylov propagator for one substep
    auto propagate = [&](Vector& state, double h) {
        const double beta = state.norm();
        if (beta == 0.0) return;
        const int m = std::min(opts.krylov_dim, dim * dim);
        std::vector<Vector> basis;
        basis.reserve(static_cast<std::size_t>(m) + 1);
        basis.push_back(state / beta);
        Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 1, m);
        int steps = m;
        for (int j = 0; j < m; ++j) {
            Vector w = liouvillian * basis[static_cast<std::size_t>(j)];
            for (int i = 0; i <= j; ++i) {
                const Complex hij = basis[static_cast<std::size_t>(i)].dot(w);
                hess(i, j) = hij;
                w -= hij * basis[static_cast<std::size_t>(i)];
            }
            const double nrm = w.norm();
            hess(j + 1, j) = nrm;
            if (nrm < 1e-13) {
                steps = j + 1;
                break;
            }
            basis.push_back(w / nrm);
        }
        const Eigen::MatrixXcd hm = h * hess.topLeftCorner(steps, steps);
        const Eigen::MatrixXcd exph = hm.exp();
        Vector out = Vector::Zero(state.size());
        for (int i = 0; i < steps; ++i) {
            out += (beta * exph(i, 0)) * basis[static_cast<std::size_t>(i)];
        }
        state = std::move(out);
    };

    std::vector<DenseMatrix> result;
    result.reserve(t_grid.size());
    double t_now = 0.0;
    for (double target : t_grid) {
        while (t_now < target - 1e-15) {
            const double h = std::min(h_cap, target - t_now);
            propagate(v, h);
            t_now += h;
        }
        DenseMatrix rho = Eigen::Map<const DenseMatrix>(v.data(), dim, dim);
        const double drift = std::abs(std::abs(rho.trace()) - trace0);
        if (drift > opts.trace_tol) {
            throw std::runtime_error("evolve_master: trace drift " + std::to_string(drift) +
                                     " beyond tolerance at t = " + std::to_string(t_now));
        }
        result.push_back(std::move(rho));
    }
    return result;
}

double trace_norm_residual(const SparseMatrix& liouvillian) {
    const int dim2 = static_cast<int>(liouvillian.rows());
    const int dim = static_cast<int>(std::llround(std::sqrt(static_cast<double>(dim2))));
    DenseMatrix id = DenseMatrix::Identity(dim, dim);
    Vector vec_id = Eigen::Map<const Vector>(id.data(), dim2);
    const Vector w = liouvillian.adjoint() * vec_id;
    return w.lpNorm<Eigen::Infinity>();
}

double top_level_population(const DenseMatrix& rho, const FockCutoff& cutoff) {
    double pop = 0.0;
    for (int n1 = 0; n1 < cutoff.dim1(); ++n1) {
        for (int n2 = 0; n2 < cutoff.dim2(); ++n2) {
            if (n1 >= cutoff.n_max_1 - 1 || n2 >= cutoff.n_max_2 - 1) {
                const int idx = n1 * cutoff.dim2() + n2;
                pop += rho(idx, idx).real();
            }
        }
    }
    return pop;
}

double mode_occupation(const DenseMatrix& rho, int mode, const FockCutoff& cutoff) {
    if (mode != 1 && mode != 2) throw std::invalid_argument("mode_occupation: mode must be 1 or 2");
    double occ = 0.0;
    for (int n1 = 0; n1 < cutoff.dim1(); ++n1) {
        for (int n2 = 0; n2 < cutoff.dim2(); ++n2) {
            const int idx = n1 * cutoff.dim2() + n2;
            occ += (mode == 1 ? n1 : n2) * rho(idx, idx).real();
        }
    }
    return occ;
}

}  // namespace qmelt::fock
