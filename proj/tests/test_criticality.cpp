#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "shnol/criticality.hpp"

using namespace shnol;

namespace {

std::vector<int> dyadic(int lo, int hi) {
    std::vector<int> out;
    for (int n = lo; n <= hi; n *= 2) out.push_back(n);
    return out;
}

} // namespace

TEST_CASE("equilibrium potentials on the flat line are tents") {
    GraphModel m = build_lattice(1, 40);
    FormHandle f{m.source, Potential::zero(), 1.0};
    for (int n : {2, 4, 8, 32}) {
        auto [phi, cap] = equilibrium_potential(f, m.exhaustion.region(n), 0);
        CHECK(cap == doctest::Approx(2.0 / n).epsilon(1e-12));
        VertexFunction tent = oracle::tent_z1(*m.source, n);
        for (VertexId v : phi.ids())
            CHECK(phi.value(v) == doctest::Approx(tent.value(v)).epsilon(1e-11));
    }
}

TEST_CASE("equilibrium agrees with brute-force quadratic minimization") {
    GraphModel m = build_lattice(1, 10);
    Potential kap = Potential::constant(0.3);
    kap.overrides = {{0, 0.05}};
    GraphModel mk = build_lattice(1, 10, 0.5, kap);
    for (const GraphModel* gm : {&m, &mk}) {
        FormHandle f{gm->source, Potential::zero(), 1.0};
        for (int n = 2; n <= 6; ++n) {
            std::vector<VertexId> region = gm->exhaustion.region(n);
            auto [phi, cap] = equilibrium_potential(f, region, 0);
            auto [phi_ref, cap_ref] = oracle::brute_force_equilibrium(f, region, 0);
            CHECK(cap == doctest::Approx(cap_ref).epsilon(1e-10));
            for (VertexId v : region)
                CHECK(phi.value(v) == doctest::Approx(phi_ref.value(v)).epsilon(1e-9));
        }
    }
}

TEST_CASE("one-vertex region gives the delta") {
    GraphModel m = build_lattice(1, 4);
    FormHandle f{m.source, Potential::zero(), 1.0};
    auto [phi, cap] = equilibrium_potential(f, m.exhaustion.region(1), 0);
    CHECK(phi.size() == 1);
    CHECK(phi.value(0) == 1.0);
    CHECK(cap == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("null sequence on the flat line: exact capacity law") {
    GraphModel m = build_lattice(1, 600);
    FormHandle f{m.source, Potential::zero(), 1.0};
    std::vector<int> radii = dyadic(4, 512);
    CapacityTrace trace = null_sequence(f, m.exhaustion, radii);
    for (std::size_t i = 0; i < trace.radii.size(); ++i)
        CHECK(trace.cap[i] == doctest::Approx(2.0 / trace.radii[i]).epsilon(1e-10));
    // monotone, and the potentials stay inside [0, 1]
    for (std::size_t i = 1; i < trace.cap.size(); ++i)
        CHECK(trace.cap[i] <= trace.cap[i - 1] + 1e-14);
    CHECK(trace.min_potential >= -1e-12);
    CHECK(trace.max_potential <= 1.0 + 1e-12);
}

TEST_CASE("shifted line: capacities stabilize at 1/G(0,0)") {
    GraphModel m = build_lattice(1, 80, 0.5, Potential::constant(2.0));
    FormHandle f{m.source, Potential::zero(), 1.0};
    CapacityTrace trace = null_sequence(f, m.exhaustion, dyadic(4, 64));
    double limit = 2.0 * std::sqrt(3.0); // 1/G(0,0) = sqrt(12)
    CHECK(trace.cap.back() == doctest::Approx(limit).epsilon(1e-10));
    for (std::size_t i = 1; i < trace.cap.size(); ++i)
        CHECK(trace.cap[i] <= trace.cap[i - 1] + 1e-14);
    CHECK(trace.cap.back() > 0.5);
    // maximum principle: potentials stay in [0, 1] for kappa >= 0
    CHECK(trace.min_potential >= -1e-12);
    CHECK(trace.max_potential <= 1.0 + 1e-12);

    // cross-check against the Green function route
    VertexFunction G = green_function(f, 0, m.exhaustion, 64);
    CHECK(1.0 / G.value(0) == doctest::Approx(limit).epsilon(1e-9));
}

TEST_CASE("decaying ground state: capacities vanish, potentials converge") {
    Potential kap = Potential::constant(0.5);
    kap.overrides = {{0, -1.0}};
    GraphModel m = build_lattice(1, 80, 0.5, kap);
    FormHandle f{m.source, Potential::zero(), 1.0};
    CapacityTrace trace = null_sequence(f, m.exhaustion, dyadic(4, 32));
    CHECK(trace.cap.back() <= 1e-12);
    const VertexFunction& phi = trace.potentials.back();
    for (std::int64_t x = -8; x <= 8; ++x) {
        std::array<std::int64_t, 1> c{x};
        CHECK(phi.value(m.source->lattice_id(c)) ==
              doctest::Approx(std::ldexp(1.0, -static_cast<int>(std::abs(x))))
                  .epsilon(1e-8));
    }
}

TEST_CASE("criticality verdicts") {
    // flat line: critical, ground state close to 1 well inside the trust ball
    GraphModel flat = build_lattice(1, 600);
    FormHandle ff{flat.source, Potential::zero(), 1.0};
    CriticalityOptions opts;
    opts.radii = dyadic(4, 512);
    CriticalityVerdict v = detect_criticality(ff, flat.exhaustion, opts);
    CHECK(v.kind == CriticalityKind::Critical);
    CHECK(v.trust_radius == 255);
    for (VertexId x : flat.source->ball(v.trust_radius / 2))
        CHECK(std::abs(v.ground_state.value(x) - 1.0) <= 0.05);
    for (VertexId x : flat.source->ball(v.trust_radius))
        CHECK(std::abs(v.ground_state.value(x) - 1.0) <= 1e-9);

    // transient tree: subcritical
    GraphModel tree = build_regular_tree(3, 9);
    FormHandle ft{tree.source, Potential::zero(), 1.0};
    CriticalityOptions topts;
    topts.radii = {2, 4, 8};
    CriticalityVerdict tv = detect_criticality(ft, tree.exhaustion, topts);
    CHECK(tv.kind == CriticalityKind::Subcritical);
    CHECK(tv.cap_limit_estimate > 1e-3);

    // a negative kappa spike breaks nonnegativity
    Potential spike = Potential::zero();
    spike.overrides = {{0, -0.1}};
    GraphModel neg = build_lattice(1, 300, 0.5, spike);
    FormHandle fn{neg.source, Potential::zero(), 1.0};
    CriticalityOptions nopts;
    nopts.radii = dyadic(4, 256);
    CriticalityVerdict nv = detect_criticality(fn, neg.exhaustion, nopts);
    CHECK(nv.kind == CriticalityKind::NotNonnegative);
}

TEST_CASE("green function on the shifted line") {
    GraphModel m = build_lattice(1, 260, 0.5, Potential::constant(2.0));
    FormHandle f{m.source, Potential::zero(), 1.0};
    VertexFunction G = green_function(f, 0, m.exhaustion, 200);
    CHECK(G.value(0) == doctest::Approx(1.0 / std::sqrt(12.0)).epsilon(1e-9));
    auto at = [&](std::int64_t x) {
        std::array<std::int64_t, 1> c{x};
        return G.value(m.source->lattice_id(c));
    };
    double r = 2.0 - std::sqrt(3.0);
    CHECK(at(100) / at(101) == doctest::Approx(1.0 / r).epsilon(1e-10));
    CHECK(at(100) == doctest::Approx(std::pow(r, 100) / std::sqrt(12.0)).epsilon(1e-6));
}

TEST_CASE("green symmetry and growth on the flat line") {
    GraphModel m = build_lattice(1, 80);
    FormHandle f{m.source, Potential::zero(), 1.0};
    // flat-line Green at the pole grows like n/2 (series resistance)
    for (int n : {4, 16, 64}) {
        VertexFunction G = green_function(f, 0, m.exhaustion, n);
        CHECK(G.value(0) == doctest::Approx(n / 2.0).epsilon(1e-9));
    }
    // symmetry under swapping pole and evaluation point
    std::array<std::int64_t, 1> c5{5};
    VertexId five = m.source->lattice_id(c5);
    VertexFunction Ga = green_function(f, 0, m.exhaustion, 30);
    VertexFunction Gb = green_function(f, five, m.exhaustion, 30);
    CHECK(Ga.value(five) == doctest::Approx(Gb.value(0)).epsilon(1e-10));

    // pointwise monotone in the exhaustion
    VertexFunction G1 = green_function(f, 0, m.exhaustion, 16);
    VertexFunction G2 = green_function(f, 0, m.exhaustion, 32);
    for (VertexId v : G1.ids()) CHECK(G2.value(v) >= G1.value(v) - 1e-11);
}

TEST_CASE("one-point coupling identity: t*(B_n) m(o) = cap_n") {
    GraphModel m = build_lattice(1, 300);
    FormHandle f{m.source, Potential::zero(), 1.0};
    Potential W = Potential::indicator(std::array<VertexId, 1>{0}, 1.0);
    std::vector<int> radii = {64, 128, 256};
    CouplingResult res = critical_coupling(f, W, m.exhaustion, radii);
    CapacityTrace trace = null_sequence(f, m.exhaustion, radii);
    for (std::size_t i = 0; i < radii.size(); ++i)
        CHECK(res.t_trace[i] == doctest::Approx(trace.cap[i]).epsilon(1e-10));
}

TEST_CASE("rank-one threshold equals the inverse Green diagonal") {
    GraphModel m = build_lattice(1, 80, 0.5, Potential::constant(2.0));
    FormHandle f{m.source, Potential::zero(), 1.0};
    Potential W = Potential::indicator(std::array<VertexId, 1>{0}, 1.0);
    std::vector<int> radii = {16, 32, 64};
    CouplingResult res = critical_coupling(f, W, m.exhaustion, radii);
    CHECK(res.t_final == doctest::Approx(std::sqrt(12.0)).epsilon(1e-2 / 3.4641));
}

TEST_CASE("coupling rejects bad potentials") {
    GraphModel m = build_lattice(1, 20);
    FormHandle f{m.source, Potential::zero(), 1.0};
    std::vector<int> radii = {4};
    CHECK_THROWS_AS(
        static_cast<void>(critical_coupling(f, Potential::zero(), m.exhaustion, radii)),
        ConfigError);
    Potential neg = Potential::constant(-1.0);
    CHECK_THROWS_AS(
        static_cast<void>(critical_coupling(f, neg, m.exhaustion, radii)),
        ConfigError);
}

TEST_CASE("criticalize: shifted line becomes critical, flat line refuses") {
    GraphModel shifted = build_lattice(1, 600, 0.5, Potential::constant(2.0));
    FormHandle fs{shifted.source, Potential::zero(), 1.0};
    std::vector<VertexId> K;
    for (std::int64_t c : {-1, 0, 1}) {
        std::array<std::int64_t, 1> cc{c};
        K.push_back(shifted.source->lattice_id(cc));
    }
    std::sort(K.begin(), K.end());
    Potential W = criticalize(fs, K, shifted.exhaustion, 512);
    FormHandle f_minus = fs.with_potential(W, -1.0);
    CriticalityOptions opts;
    opts.radii = dyadic(4, 512);
    CriticalityVerdict v = detect_criticality(f_minus, shifted.exhaustion, opts);
    CHECK(v.kind == CriticalityKind::Critical);
    for (double val : v.ground_state.values()) CHECK(val > 0.0);

    GraphModel flat = build_lattice(1, 600);
    FormHandle ff{flat.source, Potential::zero(), 1.0};
    CHECK_THROWS_WITH_AS(static_cast<void>(criticalize(ff, K, flat.exhaustion, 512)),
                         "nothing to criticalize", NumericError);
}

TEST_CASE("criticalize the tree at its root") {
    GraphModel tree = build_regular_tree(3, 9);
    FormHandle f{tree.source, Potential::zero(), 1.0};
    std::vector<VertexId> K = {0};
    Potential W = criticalize(f, K, tree.exhaustion, 8);

    // rank-one threshold = inverse Green diagonal on the same region
    VertexFunction G = green_function(f, 0, tree.exhaustion, 8);
    CHECK(W.at(0) == doctest::Approx(1.0 / G.value(0)).epsilon(1e-7));

    FormHandle fm = f.with_potential(W, -1.0);
    CriticalityOptions opts;
    opts.radii = {2, 4, 8};
    CriticalityVerdict v = detect_criticality(fm, tree.exhaustion, opts);
    CHECK(v.kind == CriticalityKind::Critical);
    for (std::size_t i = 1; i < v.evidence.cap.size(); ++i)
        CHECK(v.evidence.cap[i] <= v.evidence.cap[i - 1] + 1e-12);
}

TEST_CASE("capacity decay and green growth diagnose criticality consistently") {
    // critical flat line: cap -> 0 and G_n(o) grows without bound
    GraphModel flat = build_lattice(1, 200);
    FormHandle ff{flat.source, Potential::zero(), 1.0};
    CapacityTrace ct = null_sequence(ff, flat.exhaustion, dyadic(8, 64));
    double g8 = green_function(ff, 0, flat.exhaustion, 8).value(0);
    double g64 = green_function(ff, 0, flat.exhaustion, 64).value(0);
    CHECK(ct.cap.back() < 0.5 * ct.cap.front());
    CHECK(g64 > 4.0 * g8);

    // subcritical shifted line: cap stabilizes and G_n(o) stays bounded
    GraphModel sh = build_lattice(1, 200, 0.5, Potential::constant(2.0));
    FormHandle fs{sh.source, Potential::zero(), 1.0};
    CapacityTrace cs = null_sequence(fs, sh.exhaustion, dyadic(8, 64));
    double h8 = green_function(fs, 0, sh.exhaustion, 8).value(0);
    double h64 = green_function(fs, 0, sh.exhaustion, 64).value(0);
    CHECK(cs.cap.back() > 0.99 * cs.cap[cs.cap.size() - 2]);
    CHECK(h64 <= h8 * 1.001);
}
