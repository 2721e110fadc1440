#include "shnol/forms.hpp"

#include <algorithm>
#include <cmath>

namespace shnol {

namespace {

std::vector<VertexId> merged_support(std::initializer_list<const VertexFunction*> fns) {
    std::vector<VertexId> out;
    for (const VertexFunction* f : fns)
        out.insert(out.end(), f->ids().begin(), f->ids().end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool contains(std::span<const VertexId> sorted, VertexId v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::shared_ptr<const WeightedGraph>
cover_for(const GraphSource& src, std::span<const VertexId> ids, int extra = 1) {
    int r = ids.empty() ? 0 : src.cover_radius(ids);
    return src.truncation(std::min(r + extra, src.max_radius()));
}

} // namespace

double FormHandle::zero_order(VertexId v, const WeightedGraph& g, std::uint32_t idx) const {
    double z = g.kappa[idx];
    if (!W.trivially_zero()) z += w_coeff * W.at(v);
    return z;
}

double eval_form(const FormHandle& f, const VertexFunction& u, const VertexFunction& v) {
    std::vector<VertexId> support = merged_support({&u, &v});
    auto g = cover_for(*f.source, support);

    double div_part = 0.0;
    for (VertexId x : support) {
        auto ix = g->index_of(x);
        if (!ix) throw ConfigError("function support outside the materialized truncation");
        double ux = u.value(x), vx = v.value(x);
        for (const auto& [jy, b] : g->adj[*ix]) {
            VertexId y = g->ids[jy];
            double t = b * (ux - u.value(y)) * (vx - v.value(y));
            div_part += t;
            if (!contains(support, y)) div_part += t; // mirror ordered pair (y, x)
        }
    }

    double zero_part = 0.0;
    auto uids = u.ids();
    auto uvals = u.values();
    for (std::size_t k = 0; k < uids.size(); ++k) {
        double vv = v.value(uids[k]);
        if (vv == 0.0) continue;
        auto ix = g->index_of(uids[k]);
        zero_part += f.zero_order(uids[k], *g, *ix) * uvals[k] * vv * g->measure[*ix];
    }
    return div_part + zero_part;
}

VertexFunction apply_operator(const FormHandle& f, const VertexFunction& u) {
    auto g = cover_for(*f.source, u.ids());
    std::vector<VertexId> out_ids(u.ids().begin(), u.ids().end());
    for (VertexId x : u.ids()) {
        auto ix = g->index_of(x);
        if (!ix) throw ConfigError("function support outside the materialized truncation");
        for (const auto& [jy, b] : g->adj[*ix]) out_ids.push_back(g->ids[jy]);
    }
    std::sort(out_ids.begin(), out_ids.end());
    out_ids.erase(std::unique(out_ids.begin(), out_ids.end()), out_ids.end());

    std::vector<double> out_vals(out_ids.size(), 0.0);
    for (std::size_t k = 0; k < out_ids.size(); ++k) {
        VertexId x = out_ids[k];
        auto ix = g->index_of(x);
        if (!ix) continue; // boundary vertex of the truncation itself
        double ux = u.value(x);
        double acc = 0.0;
        for (const auto& [jy, b] : g->adj[*ix]) acc += b * (ux - u.value(g->ids[jy]));
        out_vals[k] = 2.0 * acc / g->measure[*ix] + f.zero_order(x, *g, *ix) * ux;
    }
    return VertexFunction::from_sorted(std::move(out_ids), std::move(out_vals));
}

double d_b(const WeightedGraph& g, const VertexFunction& u, VertexId x, VertexId y) {
    double b = g.edge_weight(x, y);
    if (b == 0.0) return 0.0;
    return std::sqrt(b) * (u.value(x) - u.value(y));
}

double energy_norm(const FormHandle& f, const VertexFunction& v) {
    if (v.empty()) return 0.0;
    auto g = cover_for(*f.source, v.ids());
    double q = eval_form(f, v, v);
    double n2 = 0.0;
    auto ids = v.ids();
    auto vals = v.values();
    for (std::size_t k = 0; k < ids.size(); ++k) {
        auto ix = g->index_of(ids[k]);
        n2 += vals[k] * vals[k] * g->measure[*ix];
    }
    double total = q + f.shift() * n2;
    if (total < 0.0) throw NumericError("form not semibounded as declared");
    return std::sqrt(total);
}

double leibniz_residual(const WeightedGraph& g, const VertexFunction& u,
                        const VertexFunction& v, const VertexFunction& w) {
    // all ordered pairs with a nonzero term have a first endpoint in
    // supp ∪ neighbors(supp)
    std::vector<VertexId> base = merged_support({&u, &v, &w});
    std::vector<VertexId> xs = base;
    for (VertexId x : base) {
        auto ix = g.index_of(x);
        if (!ix) throw ConfigError("function support outside the truncation");
        for (const auto& [jy, b] : g.adj[*ix]) xs.push_back(g.ids[jy]);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double lhs = 0.0, rhs = 0.0;
    for (VertexId x : xs) {
        auto ix = g.index_of(x);
        if (!ix) continue;
        double ux = u.value(x), vx = v.value(x), wx = w.value(x);
        for (const auto& [jy, b] : g.adj[*ix]) {
            VertexId y = g.ids[jy];
            double uy = u.value(y), vy = v.value(y), wy = w.value(y);
            double dw = b * (wx - wy); // sqrt(b) folded into the product
            lhs += (ux * vx - uy * vy) * dw;
            rhs += ux * (vx - vy) * dw + vx * (ux - uy) * dw;
        }
    }
    return lhs - rhs;
}

double operator_norm_bound(const FormHandle& f, int radius_hint) {
    int r = std::max(radius_hint, 2);
    if (f.source->kind() != GraphSource::Kind::Explicit) {
        std::vector<VertexId> marked;
        for (const auto& [id, val] : f.W.overrides) marked.push_back(id);
        if (!marked.empty()) r = std::max(r, f.source->cover_radius(marked) + 1);
    }
    auto g = f.source->truncation(std::min(r, f.source->max_radius()));
    double div_bound = 0.0;
    double zero_bound = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        div_bound = std::max(div_bound,
                             4.0 * g->weight_sum(static_cast<std::uint32_t>(i)) /
                                 g->measure[i]);
        zero_bound = std::max(zero_bound,
                              std::abs(f.zero_order(g->ids[i], *g,
                                                    static_cast<std::uint32_t>(i))));
    }
    return div_bound + zero_bound;
}

double dot_m(const WeightedGraph& g, const VertexFunction& u, const VertexFunction& v) {
    double s = 0.0;
    auto ids = u.ids();
    auto vals = u.values();
    for (std::size_t k = 0; k < ids.size(); ++k) {
        double vv = v.value(ids[k]);
        if (vv == 0.0) continue;
        auto ix = g.index_of(ids[k]);
        if (!ix) throw ConfigError("function support outside the truncation");
        s += vals[k] * vv * g.measure[*ix];
    }
    return s;
}

double norm_m(const WeightedGraph& g, const VertexFunction& u) {
    return std::sqrt(dot_m(g, u, u));
}

SparseSymOp dirichlet_operator(const FormHandle& f, std::span<const VertexId> region,
                               const OperatorOptions& opts) {
    if (region.empty()) throw ConfigError("empty region");
    for (std::size_t i = 1; i < region.size(); ++i)
        if (!(region[i - 1] < region[i]))
            throw ConfigError("region ids must be sorted and unique");
    auto g = cover_for(*f.source, region);

    SparseSymOp op;
    op.n = region.size();
    op.region.assign(region.begin(), region.end());
    op.diag.resize(op.n);
    op.sqrt_m.resize(op.n);
    op.row_start.assign(op.n + 1, 0);

    std::vector<std::uint32_t> gidx(op.n);
    for (std::size_t i = 0; i < op.n; ++i) {
        auto ix = g->index_of(region[i]);
        if (!ix) throw ConfigError("region vertex outside the materialized truncation");
        gidx[i] = *ix;
        op.sqrt_m[i] = std::sqrt(g->measure[*ix]);
        double z = g->kappa[*ix];
        if (opts.include_potential && !f.W.trivially_zero())
            z += f.w_coeff * f.W.at(region[i]);
        op.diag[i] = 2.0 * g->weight_sum(*ix) / g->measure[*ix] + z + opts.diag_shift;
    }

    // off-diagonal pattern: edges with both endpoints inside the region
    for (std::size_t i = 0; i < op.n; ++i) {
        std::size_t count = 0;
        for (const auto& [jy, b] : g->adj[gidx[i]]) {
            if (b == 0.0) continue;
            if (std::binary_search(region.begin(), region.end(), g->ids[jy])) ++count;
        }
        op.row_start[i + 1] = op.row_start[i] + count;
    }
    op.col.resize(op.row_start.back());
    op.off.resize(op.row_start.back());
    for (std::size_t i = 0; i < op.n; ++i) {
        std::size_t k = op.row_start[i];
        for (const auto& [jy, b] : g->adj[gidx[i]]) {
            if (b == 0.0) continue;
            VertexId y = g->ids[jy];
            auto it = std::lower_bound(region.begin(), region.end(), y);
            if (it == region.end() || *it != y) continue;
            std::uint32_t j = static_cast<std::uint32_t>(it - region.begin());
            op.col[k] = j;
            op.off[k] = -2.0 * b / (op.sqrt_m[i] * op.sqrt_m[j]);
            ++k;
        }
    }
    return op;
}

bool structurally_nonnegative(const FormHandle& f) {
    double kappa_min;
    if (f.source->kind() == GraphSource::Kind::Explicit) {
        auto g = f.source->truncation(0);
        kappa_min = g->kappa.empty() ? 0.0
                                     : *std::min_element(g->kappa.begin(), g->kappa.end());
    } else {
        kappa_min = f.source->kappa_min();
    }
    double w_min = 0.0;
    if (!f.W.trivially_zero()) {
        w_min = f.w_coeff * f.W.base;
        for (const auto& [id, val] : f.W.overrides)
            w_min = std::min(w_min, f.w_coeff * val);
    }
    return kappa_min + w_min >= 0.0;
}

} // namespace shnol
