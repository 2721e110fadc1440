#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shnol/errors.hpp"
#include "shnol/graph.hpp"

namespace shnol {

/// Symmetric operator on a finite region in symmetrized coordinates.
///
/// The underlying operator H acts on ℓ²(region, m) and is self-adjoint
/// there; this struct stores S = M^{1/2} H M^{-1/2}, which is symmetric in
/// the plain inner product. Vertex functions convert through sqrt_m:
/// sym coordinates of u are u(region[i])·sqrt_m[i], so plain dot products
/// of sym vectors equal ℓ²(m) inner products of functions.
struct SparseSymOp {
    std::size_t n = 0;
    std::vector<double> diag;
    std::vector<std::size_t> row_start; // CSR over off-diagonal entries
    std::vector<std::uint32_t> col;
    std::vector<double> off;
    std::vector<double> sqrt_m;
    std::vector<VertexId> region; // sorted ids, parallel to indices

    void apply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> apply(std::span<const double> x) const;

    double gershgorin_upper() const;
    double gershgorin_lower() const;

    std::vector<double> to_sym(const VertexFunction& u) const;
    VertexFunction from_sym(std::span<const double> x) const;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Permutation that makes the off-diagonal pattern tridiagonal, when the
/// nonzero graph is a disjoint union of simple paths.
struct PathOrder {
    std::vector<std::uint32_t> order; // new position -> original index
    std::vector<double> diag;
    std::vector<double> sub; // size n-1; zero entries separate path components
};
std::optional<PathOrder> try_path_order(const SparseSymOp& op);

// -- solves ------------------------------------------------------------------

struct SolveOptions {
    double tol = 1e-10;        // relative residual target
    std::size_t max_iter = 0;  // 0: automatic (generous)
};

/// Solves A x = rhs for symmetric positive definite A. Conjugate gradients
/// with a direct tridiagonal factorization fast path. Throws NumericError
/// "operator not positive definite" on negative curvature / negative pivot,
/// and on exhausted iterations (message carries the achieved residual).
std::vector<double> solve_spd(const SparseSymOp& A, std::span<const double> rhs,
                              const SolveOptions& opts = {});

// -- eigenvalues --------------------------------------------------------------

struct EigenPairResult {
    double value = 0.0;
    std::vector<double> vector; // sym coordinates, unit plain norm
    double residual = 0.0;
};

struct EigOptions {
    double tol = 1e-8;              // residual target, relative to norm scale
    std::size_t max_subspace = 0;   // 0: automatic
    std::span<const double> warm_start = {};
};

/// Smallest eigenvalue and eigenvector. Sturm bisection plus inverse
/// iteration on tridiagonalizable operators, Lanczos with full
/// reorthogonalization otherwise.
EigenPairResult lowest_eigenpair(const SparseSymOp& A, const EigOptions& opts = {});

/// Full sorted spectrum of the restriction. Tridiagonalizable operators use
/// the O(n²) tridiagonal path at any size; otherwise the dimension must not
/// exceed `cap` (0 = SHNOL_DENSE_CAP env or 4000).
std::vector<double> dense_spectrum(const SparseSymOp& A, std::size_t cap = 0);

std::size_t dense_cap();

/// Number of eigenvalues strictly below `shift` (exact Sturm count) for a
/// tridiagonal ordering.
int eigenvalue_count_below(const PathOrder& p, double shift);

/// Is the operator nonnegative up to `margin`? Exact (Sturm) on
/// tridiagonalizable operators; Lanczos estimate otherwise.
bool form_nonnegative(const SparseSymOp& A, double margin);

/// Monotone upper bound on min_i |lambda - mu_i| over the spectrum of A:
/// sqrt of the smallest Ritz value of (A - lambda)² after a Lanczos sweep.
/// Refines in blocks until the bound stabilizes or `target` is reached.
double spectral_distance_upper_bound(const SparseSymOp& A, double lambda,
                                     double target, std::size_t max_subspace = 1200);

} // namespace shnol
