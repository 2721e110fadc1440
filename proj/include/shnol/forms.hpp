#pragma once

#include <memory>
#include <span>

#include "shnol/graph.hpp"
#include "shnol/numerics.hpp"

namespace shnol {

/// The quadratic form Q_{b,kappa} of a graph source together with a bounded
/// perturbation: q(u,v) = Q(u,v) + w_coeff·⟨W u, v⟩_m. The norm shift
/// s = 1 + ‖w_coeff·W‖∞ makes q + s‖·‖² positive whenever Q is nonnegative.
struct FormHandle {
    std::shared_ptr<const GraphSource> source;
    Potential W = Potential::zero();
    double w_coeff = 1.0;

    double sup_w() const { return std::abs(w_coeff) * W.sup_abs(); }
    double shift() const { return 1.0 + sup_w(); }
    /// kappa(x) + w_coeff·W(x) at a vertex.
    double zero_order(VertexId v, const WeightedGraph& g, std::uint32_t idx) const;

    FormHandle with_potential(Potential w, double coeff) const {
        return FormHandle{source, std::move(w), coeff};
    }
    FormHandle without_potential() const {
        return FormHandle{source, Potential::zero(), 1.0};
    }
};

/// Q(u,v) summed over ordered vertex pairs plus the zero-order term:
/// Σ b(x,y)(u(x)−u(y))(v(x)−v(y)) + Σ (κ+W)(x) u(x) v(x) m(x).
double eval_form(const FormHandle& f, const VertexFunction& u, const VertexFunction& v);

/// (Hu)(x) = (2/m(x))·Σ_y b(x,y)(u(x)−u(y)) + (κ(x)+W(x))·u(x), evaluated on
/// supp(u) and its neighbors. Adjoint to eval_form in ℓ²(m).
VertexFunction apply_operator(const FormHandle& f, const VertexFunction& u);

/// d_b u(x,y) = sqrt(b(x,y))·(u(x)−u(y)); 0 for non-edges.
double d_b(const WeightedGraph& g, const VertexFunction& u, VertexId x, VertexId y);

/// sqrt(q(v,v) + s‖v‖²). Throws when the shifted form evaluates negative
/// (the base form was not semibounded as declared).
double energy_norm(const FormHandle& f, const VertexFunction& v);

/// LHS − RHS of the integrated product rule
/// Σ d_b(uv)·d_b w = Σ u(x) d_b v·d_b w + Σ v(x) d_b u·d_b w.
double leibniz_residual(const WeightedGraph& g, const VertexFunction& u,
                        const VertexFunction& v, const VertexFunction& w);

/// sup_x 4·Σ_y b(x,y)/m(x) + ‖κ+W‖∞ over the materialized truncation:
/// an upper bound for the operator norm.
double operator_norm_bound(const FormHandle& f, int radius_hint = 0);

/// ℓ²(m) inner product and norm over the union of supports.
double dot_m(const WeightedGraph& g, const VertexFunction& u, const VertexFunction& v);
double norm_m(const WeightedGraph& g, const VertexFunction& u);

struct OperatorOptions {
    bool include_potential = true; // add w_coeff·W to the diagonal
    double diag_shift = 0.0;       // adds shift·I (for dual-norm solves)
};

/// Dirichlet restriction of the operator to `region` (sorted ids):
/// couplings to vertices outside the region contribute b(x,y)·(u(x) − 0),
/// i.e. the ambient diagonal is kept. Throws ConfigError on empty regions.
SparseSymOp dirichlet_operator(const FormHandle& f, std::span<const VertexId> region,
                               const OperatorOptions& opts = {});

/// True when κ + w_coeff·W ≥ 0 everywhere, which makes the form a sum of
/// nonnegative terms (no eigenvalue test needed).
bool structurally_nonnegative(const FormHandle& f);

} // namespace shnol
