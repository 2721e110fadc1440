#include "shnol/gst.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shnol {

TransformedSystem ground_state_transform(const FormHandle& f, const VertexFunction& phi,
                                         int radius, double harmonicity_tol) {
    auto src = f.source;
    int r = std::min(radius, src->max_radius());
    auto g = src->truncation(std::min(r + 1, src->max_radius()));
    std::vector<VertexId> ball = src->ball(r);

    double sup_phi = 0.0;
    for (VertexId v : ball) {
        double p = phi.value(v);
        if (!(p > 0.0)) {
            std::ostringstream msg;
            msg << "not a positive function (phi(" << v << ") = " << p << ")";
            throw NumericError(msg.str());
        }
        sup_phi = std::max(sup_phi, p);
    }

    // harmonicity on the interior: every neighbor must lie inside the ball
    double kappa_sup = 0.0;
    for (VertexId v : ball) {
        auto iv = g->index_of(v);
        kappa_sup = std::max(kappa_sup, std::abs(f.zero_order(v, *g, *iv)));
    }
    double tol = harmonicity_tol * (1.0 + kappa_sup) * sup_phi;
    VertexFunction h_phi = apply_operator(f, phi);
    for (VertexId v : ball) {
        if (src->radius_of(v) >= r) continue; // boundary shell: residual unchecked
        double res = std::abs(h_phi.value(v));
        if (res > tol) {
            std::ostringstream msg;
            msg << "not a ground state (harmonicity residual " << res << " at vertex "
                << v << " exceeds " << tol << ")";
            throw NumericError(msg.str());
        }
    }

    WeightedGraph image;
    const std::size_t n = ball.size();
    image.ids = ball;
    image.adj.resize(n);
    image.kappa.assign(n, 0.0);
    image.measure.resize(n);
    image.contiguous_ids = !ball.empty() && ball.front() == 0 &&
                           ball.back() == static_cast<VertexId>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        VertexId x = ball[i];
        auto ix = g->index_of(x);
        double px = phi.value(x);
        image.measure[i] = px * px * g->measure[*ix];
        for (const auto& [jy, b] : g->adj[*ix]) {
            VertexId y = g->ids[jy];
            auto it = std::lower_bound(ball.begin(), ball.end(), y);
            if (it == ball.end() || *it != y) continue;
            std::uint32_t j = static_cast<std::uint32_t>(it - ball.begin());
            image.adj[i].emplace_back(j, px * phi.value(y) * b);
        }
        std::sort(image.adj[i].begin(), image.adj[i].end());
    }

    TransformedSystem out;
    out.image = GraphSource::explicit_graph(std::move(image), src->root());
    out.phi = phi;
    out.radius = r;
    return out;
}

VertexFunction transform_function(const VertexFunction& phi, const VertexFunction& u) {
    std::vector<VertexId> ids(u.ids().begin(), u.ids().end());
    std::vector<double> vals(u.values().begin(), u.values().end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double p = phi.value(ids[i]);
        if (p == 0.0)
            throw NumericError("division by a vanishing ground state at vertex " +
                               std::to_string(ids[i]));
        vals[i] /= p;
    }
    return VertexFunction::from_sorted(std::move(ids), std::move(vals));
}

} // namespace shnol
