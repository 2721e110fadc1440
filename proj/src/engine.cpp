#include "shnol/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace shnol {

double plane_wave_eigenvalue(std::span<const double> k) {
    double lambda = 0.0;
    for (double kj : k) lambda += 2.0 - 2.0 * std::cos(kj);
    return lambda;
}

VertexFunction build_eigenfunction(const EigenfunctionSpec& spec, const GraphSource& src,
                                   int radius) {
    switch (spec.kind) {
    case EigenfunctionSpec::Kind::PlaneWave: {
        if (src.kind() != GraphSource::Kind::Lattice)
            throw ConfigError("plane-wave eigenfunctions require a lattice graph");
        if (static_cast<int>(spec.wave_k.size()) != src.lattice_dim())
            throw ConfigError("wave vector dimension does not match the lattice");
        std::vector<VertexId> ids = src.ball(radius);
        std::vector<double> vals(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto c = src.lattice_coords(ids[i]);
            double v = 1.0;
            for (std::size_t j = 0; j < c.size(); ++j)
                v *= std::cos(spec.wave_k[j] * static_cast<double>(c[j]));
            vals[i] = v;
        }
        return VertexFunction::from_sorted(std::move(ids), std::move(vals));
    }
    case EigenfunctionSpec::Kind::Recurrence: {
        if (src.kind() != GraphSource::Kind::Lattice || src.lattice_dim() != 1)
            throw ConfigError("recurrence eigenfunctions require the 1d lattice");
        if (src.generator_edge_weight() != 0.5)
            throw ConfigError("recurrence eigenfunctions require edge weight 1/2");
        auto g = src.truncation(radius);
        std::vector<double> by_coord(2 * static_cast<std::size_t>(radius) + 1, 0.0);
        auto at = [&](std::int64_t x) -> double& {
            return by_coord[static_cast<std::size_t>(x + radius)];
        };
        auto kappa_at = [&](std::int64_t x) {
            std::array<std::int64_t, 1> c{x};
            VertexId id = src.lattice_id(c);
            auto idx = g->index_of(id);
            if (g->measure[*idx] != 1.0)
                throw ConfigError("recurrence eigenfunctions require unit measure");
            return g->kappa[*idx];
        };
        at(0) = spec.seed0;
        if (radius >= 1) at(1) = spec.seed1;
        for (std::int64_t x = 1; x < radius; ++x)
            at(x + 1) = (2.0 + kappa_at(x) - spec.lambda) * at(x) - at(x - 1);
        for (std::int64_t x = 0; x > -radius; --x)
            at(x - 1) = (2.0 + kappa_at(x) - spec.lambda) * at(x) - at(x + 1);
        std::vector<VertexId> ids = src.ball(radius);
        std::vector<double> vals(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            vals[i] = at(src.lattice_coords(ids[i])[0]);
        return VertexFunction::from_sorted(std::move(ids), std::move(vals));
    }
    case EigenfunctionSpec::Kind::File:
        return spec.file_values;
    case EigenfunctionSpec::Kind::GroundStateReference:
        throw ConfigError(
            "ground-state reference eigenfunctions are resolved inside shnol_verify");
    }
    throw ConfigError("unknown eigenfunction kind");
}

EigenCheck is_generalized_eigenfunction(const FormHandle& f, const VertexFunction& u,
                                        double lambda, std::span<const VertexId> region,
                                        double tol) {
    if (region.empty()) throw ConfigError("empty region");
    int cover = f.source->cover_radius(region);
    auto g = f.source->truncation(std::min(cover + 1, f.source->max_radius()));
    VertexFunction Hu = apply_operator(f, u);
    EigenCheck out;
    for (VertexId x : region) {
        if (!g->index_of(x)) throw ConfigError("need interior region");
        double res = std::abs(Hu.value(x) - lambda * u.value(x));
        out.max_residual = std::max(out.max_residual, res);
    }
    out.tolerance = tol * (1.0 + std::abs(lambda)) * std::max(u.max_abs(), 1e-300);
    out.ok = out.max_residual <= out.tolerance;
    return out;
}

CaccioppoliResult caccioppoli_audit(const FormHandle& f, const VertexFunction& u,
                                    double lambda, const VertexFunction& v,
                                    double pre_tol) {
    std::vector<VertexId> vsupp(v.ids().begin(), v.ids().end());
    auto g = f.source->truncation(
        std::min(f.source->cover_radius(vsupp) + 1, f.source->max_radius()));

    // hypothesis: the base form is zero-order free (transform first)
    for (VertexId x : vsupp) {
        auto ix = g->index_of(x);
        if (std::abs(g->kappa[*ix]) > 1e-14)
            throw NumericError("caccioppoli hypothesis failed: base form has a "
                               "zero-order term (apply the ground-state transform)");
    }
    // hypothesis: |u| <= 1
    if (u.max_abs() > 1.0 + 1e-10)
        throw NumericError("caccioppoli hypothesis failed: |u| <= 1");
    // hypothesis: ‖v‖_q <= 1
    double vq = energy_norm(f, v);
    if (vq > 1.0 + 1e-8)
        throw NumericError("caccioppoli hypothesis failed: ‖v‖_q <= 1");
    // hypothesis: u solves the eigen-equation up to the allowed potential,
    // |Lu - lambda·u| <= ‖W‖∞·|u| pointwise on supp(v)
    double sup_w = f.sup_w();
    VertexFunction Lu = apply_operator(f.without_potential(), u);
    double slack = pre_tol * (1.0 + std::abs(lambda)) * std::max(u.max_abs(), 1e-300);
    for (VertexId x : vsupp) {
        double res = std::abs(Lu.value(x) - lambda * u.value(x));
        if (res > sup_w * std::abs(u.value(x)) + slack) {
            std::ostringstream msg;
            msg << "caccioppoli hypothesis failed: eigen-equation residual " << res
                << " at vertex " << x << " exceeds ‖W‖∞·|u| + tol";
            throw NumericError(msg.str());
        }
    }

    CaccioppoliResult out;
    for (VertexId x : vsupp) {
        auto ix = g->index_of(x);
        double vx = v.value(x);
        double ux = u.value(x);
        for (const auto& [jy, b] : g->adj[*ix]) {
            double du = ux - u.value(g->ids[jy]);
            out.lhs += vx * vx * b * du * du;
        }
    }
    double root = std::sqrt(1.0 + std::abs(lambda) + sup_w);
    out.bound = (1.0 + root) * (1.0 + root);
    out.ok = out.lhs <= out.bound;
    return out;
}

VertexFunction weyl_vector(const VertexFunction& phi_n, const VertexFunction& u,
                           const WeightedGraph& g) {
    std::vector<VertexId> ids(phi_n.ids().begin(), phi_n.ids().end());
    std::vector<double> vals(phi_n.values().begin(), phi_n.values().end());
    for (std::size_t i = 0; i < ids.size(); ++i) vals[i] *= u.value(ids[i]);
    VertexFunction w = VertexFunction::from_sorted(std::move(ids), std::move(vals));
    double nrm = norm_m(g, w);
    if (!(nrm > 0.0))
        throw NumericError("eigenfunction vanishes on cutoff support");
    std::vector<double> scaled(w.values().begin(), w.values().end());
    for (double& x : scaled) x /= nrm;
    return VertexFunction::from_sorted(
        std::vector<VertexId>(w.ids().begin(), w.ids().end()), std::move(scaled));
}

namespace {

VertexFunction axpy(const VertexFunction& a, double c, const VertexFunction& b) {
    // a + c*b over the union support (both sorted, linear merge)
    std::vector<VertexId> ids;
    std::vector<double> vals;
    ids.reserve(a.size() + b.size());
    vals.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j >= b.size() || (i < a.size() && a.ids()[i] < b.ids()[j])) {
            ids.push_back(a.ids()[i]);
            vals.push_back(a.values()[i]);
            ++i;
        } else if (i >= a.size() || b.ids()[j] < a.ids()[i]) {
            ids.push_back(b.ids()[j]);
            vals.push_back(c * b.values()[j]);
            ++j;
        } else {
            ids.push_back(a.ids()[i]);
            vals.push_back(a.values()[i] + c * b.values()[j]);
            ++i;
            ++j;
        }
    }
    return VertexFunction::from_sorted(std::move(ids), std::move(vals));
}

} // namespace

DefectResult weyl_defect(const FormHandle& f, const VertexFunction& w, double lambda,
                         const Exhaustion& ex, double stab_tol, int max_ball_radius) {
    auto g0 = f.source->truncation(
        std::min(f.source->cover_radius(w.ids()) + 1, f.source->max_radius()));
    double wn = norm_m(*g0, w);
    if (std::abs(wn - 1.0) > 1e-6)
        throw ConfigError("weyl vector must be normalized in ℓ²(m)");

    VertexFunction Hw = apply_operator(f, w);
    VertexFunction r = axpy(Hw, -lambda, w);

    int n0 = f.source->cover_radius(r.ids());
    int limit = f.source->max_radius();
    if (max_ball_radius > 0) limit = std::min(limit, max_ball_radius);

    DefectResult out;
    double prev = -1.0;
    double s = f.shift();
    for (int margin = 8;; margin *= 2) {
        int radius = std::min(n0 + margin, limit);
        std::vector<VertexId> region = ex.source->ball(radius);
        OperatorOptions oo;
        oo.diag_shift = s;
        SparseSymOp op = dirichlet_operator(f, region, oo);
        std::vector<double> rhs = op.to_sym(r);
        SolveOptions so;
        so.tol = 1e-12;
        std::vector<double> z = solve_spd(op, rhs, so);
        double val = std::sqrt(std::max(dot(rhs, z), 0.0));
        out.value = val;
        out.truncation_radius = radius;
        if (prev >= 0.0 && std::abs(val - prev) <= stab_tol * std::max(val, 1e-300)) {
            out.stabilized = true;
            return out;
        }
        prev = val;
        if (radius >= limit) return out; // not stabilized: lower bound only
    }
}

double certificate(const FormHandle& f, const VertexFunction& phi_n,
                   const VertexFunction& u, double lambda) {
    double a = eval_form(f.without_potential(), phi_n, phi_n);
    auto g = f.source->truncation(
        std::min(f.source->cover_radius(phi_n.ids()) + 1, f.source->max_radius()));
    std::vector<VertexId> ids(phi_n.ids().begin(), phi_n.ids().end());
    std::vector<double> vals(phi_n.values().begin(), phi_n.values().end());
    for (std::size_t i = 0; i < ids.size(); ++i) vals[i] *= u.value(ids[i]);
    double nrm = norm_m(*g, VertexFunction::from_sorted(std::move(ids), std::move(vals)));
    if (!(nrm > 0.0))
        throw NumericError("eigenfunction vanishes on cutoff support");
    double prefactor = 2.0 + std::sqrt(1.0 + std::abs(lambda) + f.sup_w());
    return prefactor * std::sqrt(std::max(a, 0.0)) / nrm;
}

SpectralDistanceResult spectral_distance(double lambda, const FormHandle& f,
                                         std::span<const VertexId> region,
                                         double window_target) {
    SparseSymOp op = dirichlet_operator(f, region);
    SpectralDistanceResult out;
    bool path = try_path_order(op).has_value();
    if (path || op.n <= dense_cap()) {
        std::vector<double> spec = dense_spectrum(op);
        double best = std::numeric_limits<double>::infinity();
        double nearest = 0.0;
        for (double mu : spec) {
            double d = std::abs(lambda - mu);
            if (d < best) {
                best = d;
                nearest = mu;
            }
        }
        out.value = best;
        out.nearest = nearest;
        out.exact = true;
        out.method = path ? "tridiagonal" : "dense";
        return out;
    }
    out.value = spectral_distance_upper_bound(op, lambda, window_target);
    out.exact = false;
    out.method = "window";
    return out;
}

// ---------------------------------------------------------------------------
// shnol_verify

namespace {

WeylReport fail_report(WeylReport report, int stage, std::string why) {
    report.failed_stage = stage;
    report.failure = std::move(why);
    report.pass = false;
    return report;
}

CriticalitySummary summarize(const CriticalityVerdict& v) {
    CriticalitySummary s;
    s.kind = v.kind;
    s.radii = v.evidence.radii;
    s.cap = v.evidence.cap;
    s.cap_limit_estimate = v.cap_limit_estimate;
    s.trust_radius = v.trust_radius;
    s.note = v.note;
    return s;
}

} // namespace

WeylReport shnol_verify(const FormHandle& base, const Potential& W,
                        const EigenfunctionSpec& u_spec, double lambda,
                        const Exhaustion& ex, const ShnolOptions& opts) {
    WeylReport report;
    report.lambda = lambda;
    if (opts.radii.empty()) throw ConfigError("no Weyl radii requested");
    for (std::size_t i = 1; i < opts.radii.size(); ++i)
        if (opts.radii[i] <= opts.radii[i - 1]) throw ConfigError("radii not increasing");
    if (!base.W.trivially_zero())
        throw ConfigError("pass the criticalizing potential as the separate W argument");
    const int max_weyl = opts.radii.back();

    FormHandle with_w = base.with_potential(W, 1.0);

    // stage 1: ground state of H + W
    VertexFunction phi;
    int trust = 0;
    if (opts.gs_mode == ShnolOptions::GroundStateMode::Detect) {
        CriticalityOptions copts;
        copts.radii = opts.criticality_radii;
        CriticalityVerdict verdict = detect_criticality(with_w, ex, copts);
        report.criticality = summarize(verdict);
        if (verdict.kind != CriticalityKind::Critical)
            return fail_report(std::move(report), 1,
                               "H+W is not critical per the capacity trace");
        phi = verdict.ground_state;
        trust = verdict.trust_radius;
    } else {
        trust = opts.gs_trust_radius > 0 ? opts.gs_trust_radius : max_weyl + 72;
        trust = std::min(trust, ex.source->max_radius());
        if (opts.gs_mode == ShnolOptions::GroundStateMode::AssumeConstantOne) {
            std::vector<VertexId> ids = ex.source->ball(trust);
            std::vector<double> ones(ids.size(), 1.0);
            phi = VertexFunction::from_sorted(std::move(ids), std::move(ones));
        } else {
            phi = opts.gs_explicit;
        }
        report.criticality.declared = true;
        report.criticality.kind = CriticalityKind::Critical;
        report.criticality.trust_radius = trust;
        report.criticality.note = "ground state declared by the scenario";
        if (!opts.criticality_radii.empty()) {
            CapacityTrace trace = null_sequence(with_w, ex, opts.criticality_radii);
            report.criticality.radii = trace.radii;
            report.criticality.cap = trace.cap;
        }
    }
    if (max_weyl + 1 > trust)
        throw ConfigError("criticality radii too small for the requested Weyl radii");

    // stage 2: eigenfunction of H, eigen-equation + domination |u| <= phi
    VertexFunction u;
    if (u_spec.kind == EigenfunctionSpec::Kind::GroundStateReference)
        u = phi;
    else
        u = build_eigenfunction(u_spec, *ex.source,
                                std::min(trust + 1, ex.source->max_radius()));
    std::vector<VertexId> check_region = ex.source->ball(trust - 1);
    EigenCheck echeck =
        is_generalized_eigenfunction(base, u, lambda, check_region, opts.eigen_check_tol);
    if (!echeck.ok) {
        std::ostringstream msg;
        msg << "eigen-equation residual " << echeck.max_residual << " exceeds "
            << echeck.tolerance;
        return fail_report(std::move(report), 2, msg.str());
    }
    for (VertexId x : ex.source->ball(trust)) {
        double ux = std::abs(u.value(x));
        double px = phi.value(x);
        if (ux > px * (1.0 + opts.domination_slack)) {
            std::ostringstream msg;
            msg << "domination |u| <= phi fails at vertex " << x << ": |u| = " << ux
                << ", phi = " << px;
            return fail_report(std::move(report), 2, msg.str());
        }
    }

    // stage 3: ground-state transform of H + W
    TransformedSystem transformed;
    try {
        transformed = ground_state_transform(with_w, phi, trust);
    } catch (const NumericError& e) {
        return fail_report(std::move(report), 3, e.what());
    }
    // u was built one shell beyond the trust ball for the eigen check;
    // the transform lives where phi does
    VertexFunction u_trust;
    {
        std::vector<VertexId> ids;
        std::vector<double> vals;
        for (std::size_t i = 0; i < u.ids().size(); ++i) {
            if (phi.in_support(u.ids()[i])) {
                ids.push_back(u.ids()[i]);
                vals.push_back(u.values()[i]);
            }
        }
        u_trust = VertexFunction::from_sorted(std::move(ids), std::move(vals));
    }
    VertexFunction u_phi = transform_function(phi, u_trust);
    Exhaustion ex_img{transformed.image};
    FormHandle image_q{transformed.image, W, -1.0};
    FormHandle image_free = image_q.without_potential();
    {
        auto img = transformed.image->truncation(transformed.image->max_radius());
        TransformSummary& ts = report.transform;
        ts.vertices = img->size();
        ts.undirected_edges = img->ordered_pair_count() / 2;
        ts.radius = transformed.radius;
        ts.min_weight = std::numeric_limits<double>::infinity();
        ts.min_measure = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < img->size(); ++i) {
            ts.min_measure = std::min(ts.min_measure, img->measure[i]);
            ts.max_measure = std::max(ts.max_measure, img->measure[i]);
            for (const auto& [j, b] : img->adj[i]) {
                ts.min_weight = std::min(ts.min_weight, b);
                ts.max_weight = std::max(ts.max_weight, b);
            }
        }
    }

    // stage 4: null sequence of the image form
    CapacityTrace tents;
    try {
        tents = null_sequence(image_free, ex_img, opts.radii);
    } catch (const NumericError& e) {
        return fail_report(std::move(report), 4, e.what());
    }

    // stage 5: Weyl vectors, defects, certificates
    auto img_graph = transformed.image->truncation(transformed.image->max_radius());
    report.chain_ok = true;
    for (std::size_t i = 0; i < tents.potentials.size(); ++i) {
        const VertexFunction& psi = tents.potentials[i];
        VertexFunction w;
        try {
            w = weyl_vector(psi, u_phi, *img_graph);
        } catch (const NumericError& e) {
            return fail_report(std::move(report), 5, e.what());
        }
        double nwu = 0.0;
        {
            std::vector<VertexId> ids(psi.ids().begin(), psi.ids().end());
            std::vector<double> vals(psi.values().begin(), psi.values().end());
            for (std::size_t k = 0; k < ids.size(); ++k) vals[k] *= u_phi.value(ids[k]);
            nwu = norm_m(*img_graph,
                         VertexFunction::from_sorted(std::move(ids), std::move(vals)));
        }
        // stay two shells inside the image: its outermost shell lacks the
        // ambient coupling and would distort the Dirichlet diagonal
        DefectResult d = weyl_defect(image_q, w, lambda, ex_img,
                                     opts.stabilization_tol, trust - 2);
        double cert = certificate(image_q, psi, u_phi, lambda);
        report.radii.push_back(tents.radii[i]);
        report.cap.push_back(tents.cap[i]);
        report.norm_wu.push_back(nwu);
        report.defect.push_back(d.value);
        report.defect_stabilized.push_back(d.stabilized ? 1 : 0);
        report.certificate.push_back(cert);
        if (d.value > cert * (1.0 + 1e-9)) report.chain_ok = false;
    }

    // stage 6: spectral distance against a truncation of the original H
    int dist_radius = opts.dist_radius > 0 ? opts.dist_radius : opts.radii.back();
    std::vector<VertexId> dist_region =
        opts.dist_region.empty() ? ex.region(dist_radius) : opts.dist_region;
    SpectralDistanceResult dist = spectral_distance(
        lambda, base, dist_region,
        opts.dist_target > 0.0 ? 0.5 * opts.dist_target : 0.0);
    report.spectral_dist = dist.value;
    report.dist_exact = dist.exact;
    report.dist_method = dist.method;

    bool defect_ok = opts.defect_target <= 0.0 || report.defect.back() <= opts.defect_target;
    bool trend_ok = !opts.require_decreasing_defect ||
                    (report.defect.size() < 2 ||
                     report.defect.back() < report.defect.front());
    bool dist_ok = opts.dist_target <= 0.0 || dist.value <= opts.dist_target;
    report.pass = report.chain_ok && defect_ok && trend_ok && dist_ok;
    if (!report.pass && report.failed_stage == 0) {
        std::ostringstream msg;
        if (!report.chain_ok) msg << "defect exceeds certificate; ";
        if (!defect_ok) msg << "defect above target; ";
        if (!trend_ok) msg << "defect not decreasing; ";
        if (!dist_ok) msg << "spectral distance above target; ";
        report.failure = msg.str();
    }
    return report;
}

} // namespace shnol
