#include "shnol/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace shnol {

// ---------------------------------------------------------------------------
// SparseSymOp basics

void SparseSymOp::apply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = diag[i] * x[i];
        for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k)
            acc += off[k] * x[col[k]];
        y[i] = acc;
    }
}

std::vector<double> SparseSymOp::apply(std::span<const double> x) const {
    std::vector<double> y(n);
    apply(x, y);
    return y;
}

double SparseSymOp::gershgorin_upper() const {
    double bound = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = diag[i];
        for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k)
            row += std::abs(off[k]);
        bound = std::max(bound, row);
    }
    return bound;
}

double SparseSymOp::gershgorin_lower() const {
    double bound = n ? diag[0] : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = diag[i];
        for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k)
            row -= std::abs(off[k]);
        bound = std::min(bound, row);
    }
    return bound;
}

std::vector<double> SparseSymOp::to_sym(const VertexFunction& u) const {
    std::vector<double> x(n, 0.0);
    std::size_t i = 0;
    auto uids = u.ids();
    auto uvals = u.values();
    for (std::size_t k = 0; k < uids.size(); ++k) {
        while (i < n && region[i] < uids[k]) ++i;
        if (i < n && region[i] == uids[k]) x[i] = uvals[k] * sqrt_m[i];
    }
    return x;
}

VertexFunction SparseSymOp::from_sym(std::span<const double> x) const {
    std::vector<VertexId> ids(region.begin(), region.end());
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = x[i] / sqrt_m[i];
    return VertexFunction::from_sorted(std::move(ids), std::move(vals));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Path-order detection

std::optional<PathOrder> try_path_order(const SparseSymOp& op) {
    const std::size_t n = op.n;
    // nonzero off-diagonal degree must be <= 2 everywhere
    std::vector<std::uint32_t> deg(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = op.row_start[i]; k < op.row_start[i + 1]; ++k)
            if (op.off[k] != 0.0) ++deg[i];
        if (deg[i] > 2) return std::nullopt;
    }
    std::vector<char> visited(n, 0);
    std::vector<std::uint32_t> order;
    order.reserve(n);

    auto walk = [&](std::uint32_t start) -> bool {
        std::uint32_t prev = static_cast<std::uint32_t>(n);
        std::uint32_t cur = start;
        while (true) {
            visited[cur] = 1;
            order.push_back(cur);
            std::uint32_t next = static_cast<std::uint32_t>(n);
            for (std::size_t k = op.row_start[cur]; k < op.row_start[cur + 1]; ++k) {
                if (op.off[k] == 0.0) continue;
                std::uint32_t j = op.col[k];
                if (j == prev) continue;
                if (visited[j]) return false; // cycle
                next = j;
                break;
            }
            if (next == n) return true;
            prev = cur;
            cur = next;
        }
    };

    // start walks at endpoints (degree <= 1), smallest index first
    for (std::size_t i = 0; i < n; ++i)
        if (!visited[i] && deg[i] <= 1)
            if (!walk(static_cast<std::uint32_t>(i))) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i)
        if (!visited[i]) return std::nullopt; // leftover vertices form cycles
    if (order.size() != n) return std::nullopt;

    PathOrder p;
    p.order = std::move(order);
    p.diag.resize(n);
    p.sub.assign(n > 0 ? n - 1 : 0, 0.0);
    std::vector<std::uint32_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[p.order[i]] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t orig = p.order[i];
        p.diag[i] = op.diag[orig];
        for (std::size_t k = op.row_start[orig]; k < op.row_start[orig + 1]; ++k) {
            if (op.off[k] == 0.0) continue;
            std::uint32_t j = pos[op.col[k]];
            if (j + 1 == i)
                p.sub[j] = op.off[k];
            else if (i + 1 == j)
                p.sub[i] = op.off[k];
            // entries between non-adjacent positions cannot occur on a path
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Tridiagonal kernels

int eigenvalue_count_below(const PathOrder& p, double shift) {
    const std::size_t n = p.diag.size();
    int count = 0;
    double q = 1.0;
    const double tiny = 1e-300;
    for (std::size_t i = 0; i < n; ++i) {
        double e2 = (i > 0) ? p.sub[i - 1] * p.sub[i - 1] : 0.0;
        q = p.diag[i] - shift - (i > 0 ? e2 / q : 0.0);
        if (q == 0.0) q = tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

namespace {

// LDL^T solve for a symmetric tridiagonal matrix; throws on negative pivot.
std::vector<double> tridiag_spd_solve(const PathOrder& p, std::span<const double> rhs_permuted) {
    const std::size_t n = p.diag.size();
    std::vector<double> d(n), l(n > 0 ? n - 1 : 0), x(rhs_permuted.begin(), rhs_permuted.end());
    for (std::size_t i = 0; i < n; ++i) {
        double di = p.diag[i];
        if (i > 0) di -= l[i - 1] * l[i - 1] * d[i - 1];
        if (!(di > 0.0))
            throw NumericError("operator not positive definite");
        d[i] = di;
        if (i + 1 < n) l[i] = p.sub[i] / di;
    }
    for (std::size_t i = 1; i < n; ++i) x[i] -= l[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i) x[i] /= d[i];
    for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= l[i - 1] * x[i];
    return x;
}

double tridiag_lowest_eigenvalue(const PathOrder& p) {
    const std::size_t n = p.diag.size();
    double lo = p.diag[0], hi = p.diag[0];
    for (std::size_t i = 0; i < n; ++i) {
        double r = (i > 0 ? std::abs(p.sub[i - 1]) : 0.0) +
                   (i + 1 < n ? std::abs(p.sub[i]) : 0.0);
        lo = std::min(lo, p.diag[i] - r);
        hi = std::max(hi, p.diag[i] + r);
    }
    double scale = std::max({std::abs(lo), std::abs(hi), 1e-300});
    for (int it = 0; it < 120 && hi - lo > 1e-16 * scale; ++it) {
        double mid = 0.5 * (lo + hi);
        if (eigenvalue_count_below(p, mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> tridiag_eigenvalues(const PathOrder& p) {
    const std::size_t n = p.diag.size();
    Eigen::VectorXd diag(static_cast<Eigen::Index>(n));
    Eigen::VectorXd sub(static_cast<Eigen::Index>(n > 0 ? n - 1 : 0));
    for (std::size_t i = 0; i < n; ++i) diag[static_cast<Eigen::Index>(i)] = p.diag[i];
    for (std::size_t i = 0; i + 1 < n; ++i) sub[static_cast<Eigen::Index>(i)] = p.sub[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericError("tridiagonal eigenvalue iteration failed");
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = es.eigenvalues()[static_cast<Eigen::Index>(i)];
    std::sort(vals.begin(), vals.end());
    return vals;
}

// Inverse iteration around an isolated eigenvalue of a tridiagonal matrix.
std::vector<double> tridiag_eigenvector(const PathOrder& p, double eigval) {
    const std::size_t n = p.diag.size();
    // factor (T - eigval - delta) with pivot regularization
    double scale = 0.0;
    for (double v : p.diag) scale = std::max(scale, std::abs(v));
    for (double v : p.sub) scale = std::max(scale, std::abs(v));
    double delta = 1e-12 * std::max(scale, 1.0);
    std::vector<double> d(n), l(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) {
        double di = p.diag[i] - eigval - delta;
        if (i > 0) di -= l[i - 1] * l[i - 1] * d[i - 1];
        if (std::abs(di) < 1e-14 * std::max(scale, 1.0))
            di = (di < 0 ? -1.0 : 1.0) * 1e-14 * std::max(scale, 1.0);
        d[i] = di;
        if (i + 1 < n) l[i] = p.sub[i] / di;
    }
    std::vector<double> x(n, 1.0);
    for (int pass = 0; pass < 4; ++pass) {
        for (std::size_t i = 1; i < n; ++i) x[i] -= l[i - 1] * x[i - 1];
        for (std::size_t i = 0; i < n; ++i) x[i] /= d[i];
        for (std::size_t i = n - 1; i > 0; --i) x[i - 1] -= l[i - 1] * x[i];
        double nrm = norm2(x);
        if (!(nrm > 0.0) || !std::isfinite(nrm)) {
            std::fill(x.begin(), x.end(), 1.0 / std::sqrt(static_cast<double>(n)));
            continue;
        }
        for (double& v : x) v /= nrm;
    }
    return x;
}

std::mt19937_64 seeded_rng(const SparseSymOp& A) {
    return std::mt19937_64(0x5ce4c0ffee123ULL ^ (A.n * 0x9e3779b97f4a7c15ULL));
}

std::vector<double> deterministic_unit_vector(const SparseSymOp& A) {
    std::mt19937_64 rng = seeded_rng(A);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(A.n);
    for (double& x : v) x = u(rng);
    double nrm = norm2(v);
    for (double& x : v) x /= nrm;
    return v;
}

struct LanczosResult {
    std::vector<double> alpha;
    std::vector<double> beta; // beta[j] couples v_j and v_{j+1}
    std::vector<std::vector<double>> basis;
    bool exhausted = false; // invariant subspace reached
};

// Lanczos with full reorthogonalization against the stored basis.
template <typename Apply>
LanczosResult lanczos(const Apply& apply_fn, std::span<const double> start,
                      std::size_t max_steps, double breakdown_scale) {
    LanczosResult R;
    const std::size_t n = start.size();
    std::vector<double> v(start.begin(), start.end());
    double nrm = norm2(v);
    for (double& x : v) x /= nrm;
    R.basis.push_back(v);
    std::vector<double> w(n);
    for (std::size_t j = 0; j < max_steps; ++j) {
        apply_fn(R.basis[j], w);
        if (j > 0) {
            double b = R.beta[j - 1];
            const auto& prev = R.basis[j - 1];
            for (std::size_t i = 0; i < n; ++i) w[i] -= b * prev[i];
        }
        double a = dot(w, R.basis[j]);
        R.alpha.push_back(a);
        const auto& cur = R.basis[j];
        for (std::size_t i = 0; i < n; ++i) w[i] -= a * cur[i];
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : R.basis) {
                double c = dot(w, q);
                for (std::size_t i = 0; i < n; ++i) w[i] -= c * q[i];
            }
        }
        double b = norm2(w);
        if (b <= 1e-14 * breakdown_scale || R.basis.size() == n) {
            R.exhausted = true;
            return R;
        }
        R.beta.push_back(b);
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) next[i] = w[i] / b;
        R.basis.push_back(std::move(next));
    }
    return R;
}

struct RitzBottom {
    double value;
    std::vector<double> coeffs; // in the Lanczos basis
    double residual_bound;
};

RitzBottom bottom_ritz(const LanczosResult& L) {
    const std::size_t k = L.alpha.size();
    Eigen::VectorXd diag(static_cast<Eigen::Index>(k));
    Eigen::VectorXd sub(static_cast<Eigen::Index>(k > 0 ? k - 1 : 0));
    for (std::size_t i = 0; i < k; ++i) diag[static_cast<Eigen::Index>(i)] = L.alpha[i];
    for (std::size_t i = 0; i + 1 < k; ++i) sub[static_cast<Eigen::Index>(i)] = L.beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success)
        throw NumericError("Ritz extraction failed");
    Eigen::Index which = 0;
    es.eigenvalues().minCoeff(&which);
    RitzBottom r;
    r.value = es.eigenvalues()[which];
    r.coeffs.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        r.coeffs[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), which);
    // beta[k-1] exists exactly when the sweep did not end on an invariant
    // subspace; it couples the last basis vector to the discarded one.
    r.residual_bound = (L.beta.size() >= k) ? std::abs(L.beta[k - 1] * r.coeffs[k - 1]) : 0.0;
    return r;
}

std::vector<double> assemble_in_basis(const LanczosResult& L, std::span<const double> coeffs) {
    const std::size_t n = L.basis.front().size();
    std::vector<double> v(n, 0.0);
    for (std::size_t j = 0; j < coeffs.size(); ++j) {
        const auto& q = L.basis[j];
        for (std::size_t i = 0; i < n; ++i) v[i] += coeffs[j] * q[i];
    }
    double nrm = norm2(v);
    for (double& x : v) x /= nrm;
    return v;
}

} // namespace

// ---------------------------------------------------------------------------
// solve_spd

std::vector<double> solve_spd(const SparseSymOp& A, std::span<const double> rhs,
                              const SolveOptions& opts) {
    if (rhs.size() != A.n) throw ConfigError("rhs dimension mismatch");
    double rhs_norm = norm2(rhs);
    if (rhs_norm == 0.0) return std::vector<double>(A.n, 0.0);

    if (auto p = try_path_order(A)) {
        std::vector<double> permuted(A.n);
        for (std::size_t i = 0; i < A.n; ++i) permuted[i] = rhs[p->order[i]];
        std::vector<double> sol = tridiag_spd_solve(*p, permuted);
        std::vector<double> x(A.n);
        for (std::size_t i = 0; i < A.n; ++i) x[p->order[i]] = sol[i];
        return x;
    }

    std::size_t max_iter = opts.max_iter ? opts.max_iter
                                         : std::max<std::size_t>(10000, 20 * A.n);
    std::vector<double> x(A.n, 0.0), r(rhs.begin(), rhs.end()), p_(r), Ap(A.n);
    double rr = dot(r, r);
    double curvature_floor = -1e-14 * std::max(A.gershgorin_upper(), 1.0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        A.apply(p_, Ap);
        double pAp = dot(p_, Ap);
        double pp = dot(p_, p_);
        if (pAp <= curvature_floor * pp)
            throw NumericError("operator not positive definite");
        if (pAp <= 0.0) break; // exact stagnation on a null direction
        double alpha = rr / pAp;
        for (std::size_t i = 0; i < A.n; ++i) {
            x[i] += alpha * p_[i];
            r[i] -= alpha * Ap[i];
        }
        double rr_new = dot(r, r);
        if (std::sqrt(rr_new) <= opts.tol * rhs_norm) return x;
        double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < A.n; ++i) p_[i] = r[i] + beta * p_[i];
    }
    double achieved = norm2(r) / rhs_norm;
    if (achieved <= opts.tol * 16.0) return x; // round-off plateau near target
    std::ostringstream msg;
    msg << "conjugate gradient did not reach tol " << opts.tol
        << " (achieved relative residual " << achieved << ")";
    throw NumericError(msg.str());
}

// ---------------------------------------------------------------------------
// lowest_eigenpair

EigenPairResult lowest_eigenpair(const SparseSymOp& A, const EigOptions& opts) {
    if (A.n == 0) throw ConfigError("empty operator");
    double scale = std::max(A.gershgorin_upper(), -A.gershgorin_lower());
    scale = std::max(scale, 1e-300);

    if (auto p = try_path_order(A)) {
        EigenPairResult out;
        out.value = tridiag_lowest_eigenvalue(*p);
        std::vector<double> vec = tridiag_eigenvector(*p, out.value);
        out.vector.resize(A.n);
        for (std::size_t i = 0; i < A.n; ++i) out.vector[p->order[i]] = vec[i];
        std::vector<double> Av = A.apply(out.vector);
        for (std::size_t i = 0; i < A.n; ++i) Av[i] -= out.value * out.vector[i];
        out.residual = norm2(Av);
        return out;
    }

    std::size_t max_k = opts.max_subspace
                            ? opts.max_subspace
                            : std::min<std::size_t>(A.n, 400);
    std::vector<double> start;
    if (!opts.warm_start.empty() && opts.warm_start.size() == A.n)
        start.assign(opts.warm_start.begin(), opts.warm_start.end());
    else
        start = deterministic_unit_vector(A);

    auto apply_fn = [&](const std::vector<double>& x, std::vector<double>& y) {
        A.apply(x, y);
    };

    EigenPairResult best;
    best.residual = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 4; ++restart) {
        LanczosResult L = lanczos(apply_fn, start, max_k, scale);
        RitzBottom rb = bottom_ritz(L);
        std::vector<double> v = assemble_in_basis(L, rb.coeffs);
        std::vector<double> Av = A.apply(v);
        for (std::size_t i = 0; i < A.n; ++i) Av[i] -= rb.value * v[i];
        double res = norm2(Av);
        if (res < best.residual) {
            best.value = rb.value;
            best.vector = v;
            best.residual = res;
        }
        if (best.residual <= opts.tol * scale || L.exhausted) break;
        start = v; // implicit restart from the current Ritz vector
    }
    if (best.residual > opts.tol * scale) {
        std::ostringstream msg;
        msg << "lowest eigenpair did not converge: best Ritz value " << best.value
            << ", residual " << best.residual << " (tol " << opts.tol * scale << ")";
        throw NumericError(msg.str());
    }
    return best;
}

// ---------------------------------------------------------------------------
// dense_spectrum

std::size_t dense_cap() {
    if (const char* env = std::getenv("SHNOL_DENSE_CAP")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return 4000;
}

std::vector<double> dense_spectrum(const SparseSymOp& A, std::size_t cap) {
    if (cap == 0) cap = dense_cap();
    if (auto p = try_path_order(A)) return tridiag_eigenvalues(*p);
    if (A.n > cap)
        throw NumericError(
            "region exceeds the dense eigensolver cap (" + std::to_string(A.n) + " > " +
            std::to_string(cap) + "); use lowest_eigenpair or a windowed estimate");
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.n),
                                              static_cast<Eigen::Index>(A.n));
    for (std::size_t i = 0; i < A.n; ++i) {
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = A.diag[i];
        for (std::size_t k = A.row_start[i]; k < A.row_start[i + 1]; ++k)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(A.col[k])) = A.off[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericError("dense eigensolver failed");
    std::vector<double> vals(A.n);
    for (std::size_t i = 0; i < A.n; ++i) vals[i] = es.eigenvalues()[static_cast<Eigen::Index>(i)];
    std::sort(vals.begin(), vals.end());
    return vals;
}

// ---------------------------------------------------------------------------
// feasibility + windowed distance

bool form_nonnegative(const SparseSymOp& A, double margin) {
    if (auto p = try_path_order(A))
        return eigenvalue_count_below(*p, -margin) == 0;
    EigOptions e;
    e.tol = 1e-7;
    EigenPairResult low = lowest_eigenpair(A, e);
    return low.value >= -margin;
}

double spectral_distance_upper_bound(const SparseSymOp& A, double lambda,
                                     double target, std::size_t max_subspace) {
    std::vector<double> tmp(A.n);
    auto apply_sq = [&](const std::vector<double>& x, std::vector<double>& y) {
        A.apply(x, tmp);
        for (std::size_t i = 0; i < A.n; ++i) tmp[i] -= lambda * x[i];
        A.apply(tmp, y);
        for (std::size_t i = 0; i < A.n; ++i) y[i] -= lambda * tmp[i];
    };
    double upper = A.gershgorin_upper() - lambda;
    double lower = A.gershgorin_lower() - lambda;
    double scale = std::max({upper * upper, lower * lower, 1e-300});

    std::vector<double> start = deterministic_unit_vector(A);
    double bound = std::numeric_limits<double>::infinity();
    // Rayleigh-Ritz from above: every sweep returns a valid upper bound on
    // the true distance; dyadic sweep sizes until it stops improving.
    for (std::size_t steps = 150;; steps *= 2) {
        steps = std::min(steps, max_subspace);
        LanczosResult L = lanczos(apply_sq, start, steps, scale);
        RitzBottom rb = bottom_ritz(L);
        double next = std::sqrt(std::max(rb.value, 0.0));
        bool done = L.exhausted || steps >= max_subspace || next <= target ||
                    (std::isfinite(bound) && bound - next <= 0.02 * std::max(next, 1e-12));
        bound = std::min(bound, next);
        if (done) return bound;
    }
}

} // namespace shnol
