#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "shnol/engine.hpp"

using namespace shnol;

namespace {

EigenfunctionSpec plane_wave(std::vector<double> k) {
    EigenfunctionSpec s;
    s.kind = EigenfunctionSpec::Kind::PlaneWave;
    s.wave_k = std::move(k);
    return s;
}

} // namespace

TEST_CASE("plane waves solve the eigen-equation") {
    GraphModel m = build_lattice(1, 60);
    FormHandle f{m.source, Potential::zero(), 1.0};
    double k = 1.0, lambda = 2.0 - 2.0 * std::cos(k);
    VertexFunction u = build_eigenfunction(plane_wave({k}), *m.source, 50);
    EigenCheck c = is_generalized_eigenfunction(f, u, lambda, m.source->ball(49), 1e-12);
    CHECK(c.ok);
    CHECK(c.max_residual <= 1e-12 * (1.0 + lambda));

    // constants are harmonic
    std::vector<VertexId> ids = m.source->ball(20);
    std::vector<double> ones(ids.size(), 1.0);
    VertexFunction u1 = VertexFunction::from_sorted(std::move(ids), std::move(ones));
    EigenCheck c1 = is_generalized_eigenfunction(f, u1, 0.0, m.source->ball(19), 1e-14);
    CHECK(c1.ok);
    CHECK(c1.max_residual == 0.0);

    // the delta is not an eigenfunction: residual 2 at the origin
    VertexFunction d0 = VertexFunction::from_pairs({{0, 1.0}});
    EigenCheck cd = is_generalized_eigenfunction(f, d0, 0.0, m.source->ball(5), 1e-8);
    CHECK(!cd.ok);
    CHECK(cd.max_residual == doctest::Approx(2.0));
}

TEST_CASE("product plane wave on the 2d lattice") {
    GraphModel m = build_lattice(2, 20);
    FormHandle f{m.source, Potential::zero(), 1.0};
    double lambda = plane_wave_eigenvalue(std::array<double, 2>{1.0, 1.0});
    CHECK(lambda == doctest::Approx(2.0 * (2.0 - 2.0 * std::cos(1.0))).epsilon(1e-15));
    CHECK(lambda == doctest::Approx(1.83879).epsilon(1e-5));
    VertexFunction u = build_eigenfunction(plane_wave({1.0, 1.0}), *m.source, 15);
    EigenCheck c = is_generalized_eigenfunction(f, u, lambda, m.source->ball(14), 1e-12);
    CHECK(c.ok);
}

TEST_CASE("recurrence eigenfunctions") {
    GraphModel flat = build_lattice(1, 40);
    EigenfunctionSpec rec;
    rec.kind = EigenfunctionSpec::Kind::Recurrence;
    rec.lambda = 0.0;
    rec.seed0 = rec.seed1 = 1.0;
    VertexFunction u = build_eigenfunction(rec, *flat.source, 20);
    for (double v : u.values()) CHECK(v == 1.0);

    GraphModel shifted = build_lattice(1, 40, 0.5, Potential::constant(2.0));
    EigenfunctionSpec dec;
    dec.kind = EigenfunctionSpec::Kind::Recurrence;
    dec.lambda = 0.0;
    dec.seed0 = 1.0;
    dec.seed1 = 2.0 - std::sqrt(3.0);
    VertexFunction ud = build_eigenfunction(dec, *shifted.source, 20);
    double r = 2.0 - std::sqrt(3.0);
    double grow = 2.0 + std::sqrt(3.0); // forward integration excites this mode
    for (std::int64_t x = 0; x <= 15; ++x) {
        std::array<std::int64_t, 1> c{x};
        double got = ud.value(shifted.source->lattice_id(c));
        double want = std::pow(r, static_cast<double>(x));
        CHECK(std::abs(got - want) <=
              1e-13 * std::pow(grow, static_cast<double>(x)) + 1e-13);
    }

    GraphModel m2 = build_lattice(2, 5);
    CHECK_THROWS_AS(static_cast<void>(build_eigenfunction(rec, *m2.source, 3)),
                    ConfigError);
    CHECK_THROWS_AS(static_cast<void>(build_eigenfunction(plane_wave({1.0}), *m2.source, 3)),
                    ConfigError);
}

TEST_CASE("caccioppoli audit: closed-form bounds and a concrete instance") {
    GraphModel m = build_lattice(1, 260);
    FormHandle f{m.source, Potential::zero(), 1.0};

    double k = 1.0, lambda = 2.0 - 2.0 * std::cos(k);
    VertexFunction u = build_eigenfunction(plane_wave({k}), *m.source, 250);
    VertexFunction tent = oracle::tent_z1(*m.source, 200);
    double nq = energy_norm(f, tent);
    std::vector<double> scaled(tent.values().begin(), tent.values().end());
    for (double& x : scaled) x /= nq;
    VertexFunction v = VertexFunction::from_sorted(
        std::vector<VertexId>(tent.ids().begin(), tent.ids().end()), std::move(scaled));

    CaccioppoliResult res = caccioppoli_audit(f, u, lambda, v);
    CHECK(res.ok);
    double expect_bound = std::pow(1.0 + std::sqrt(1.0 + lambda), 2);
    CHECK(res.bound == doctest::Approx(expect_bound).epsilon(1e-14));
    CHECK(res.lhs < 1.0);

    // closed-form bound values; lambda = 0 needs a harmonic u
    {
        std::vector<VertexId> ids = m.source->ball(10);
        std::vector<double> ones(ids.size(), 1.0);
        VertexFunction u1 = VertexFunction::from_sorted(std::move(ids), std::move(ones));
        VertexFunction small = VertexFunction::from_pairs({{0, 1e-3}});
        CaccioppoliResult r0 = caccioppoli_audit(f, u1, 0.0, small, 1e-2);
        CHECK(r0.bound == doctest::Approx(4.0).epsilon(1e-14));
    }
    {
        FormHandle fw = f.with_potential(Potential::constant(1.0), 1.0);
        VertexFunction small = VertexFunction::from_pairs({{0, 1e-3}});
        // cos(kx) with lambda = 1: the offset from lambda(k) is within ‖W‖∞
        CaccioppoliResult r1 = caccioppoli_audit(fw, u, 1.0, small, 1e-6);
        CHECK(r1.bound == doctest::Approx(std::pow(1.0 + std::sqrt(3.0), 2)).epsilon(1e-12));
    }
}

TEST_CASE("caccioppoli audit names the violated hypothesis") {
    GraphModel m = build_lattice(1, 60);
    FormHandle f{m.source, Potential::zero(), 1.0};
    VertexFunction u = build_eigenfunction(plane_wave({1.0}), *m.source, 50);
    double lambda = 2.0 - 2.0 * std::cos(1.0);

    // v too large in the q-norm
    VertexFunction big = VertexFunction::from_pairs({{0, 10.0}});
    CHECK_THROWS_WITH_AS(static_cast<void>(caccioppoli_audit(f, u, lambda, big)),
                         "caccioppoli hypothesis failed: ‖v‖_q <= 1", NumericError);

    // u too large in sup norm
    std::vector<std::pair<VertexId, double>> big_u;
    for (VertexId v : m.source->ball(30)) big_u.emplace_back(v, 2.0);
    VertexFunction u2 = VertexFunction::from_pairs(std::move(big_u));
    VertexFunction v_small = VertexFunction::from_pairs({{0, 1e-3}});
    CHECK_THROWS_WITH_AS(static_cast<void>(caccioppoli_audit(f, u2, 0.0, v_small)),
                         "caccioppoli hypothesis failed: |u| <= 1", NumericError);

    // wrong eigenvalue: the eigen-equation hypothesis fails
    CHECK_THROWS_AS(static_cast<void>(caccioppoli_audit(f, u, lambda + 0.5, v_small)),
                    NumericError);

    // kappa != 0 is refused
    GraphModel ms = build_lattice(1, 60, 0.5, Potential::constant(2.0));
    FormHandle fs{ms.source, Potential::zero(), 1.0};
    CHECK_THROWS_AS(static_cast<void>(caccioppoli_audit(fs, u, lambda, v_small)),
                    NumericError);
}

TEST_CASE("caccioppoli inequality holds for random admissible data") {
    std::mt19937_64 rng(0);
    GraphModel m = build_lattice(1, 260);
    auto g = m.source->truncation(220);
    std::uniform_real_distribution<double> kdist(0.2, 2.8);
    std::uniform_real_distribution<double> wdist(-1.0, 1.0);
    std::vector<VertexId> pool = m.source->ball(200);
    for (int trial = 0; trial < 100; ++trial) {
        double k = kdist(rng);
        double lambda = 2.0 - 2.0 * std::cos(k);
        VertexFunction u = build_eigenfunction(plane_wave({k}), *m.source, 210);
        Potential W;
        W.base = 0.0;
        for (VertexId v : pool)
            W.overrides.emplace_back(v, wdist(rng));
        W.canonicalize();
        FormHandle fw{m.source, W, 1.0};
        VertexFunction v = oracle::random_function(rng, pool, 40);
        double nq = energy_norm(fw, v);
        std::vector<double> scaled(v.values().begin(), v.values().end());
        for (double& x : scaled) x /= nq;
        VertexFunction vn = VertexFunction::from_sorted(
            std::vector<VertexId>(v.ids().begin(), v.ids().end()), std::move(scaled));
        CaccioppoliResult res = caccioppoli_audit(fw, u, lambda, vn);
        CHECK(res.ok);
    }
}

TEST_CASE("weyl vectors") {
    GraphModel m = build_lattice(1, 140);
    auto g = m.source->truncation(130);
    VertexFunction d0 = VertexFunction::from_pairs({{0, 1.0}});
    VertexFunction w = weyl_vector(d0, d0, *g);
    CHECK(w.value(0) == doctest::Approx(1.0));

    // ‖tent · 1‖² is the exact finite sum 1 + 2 sum_{j<n} (j/n)²
    int n = 100;
    VertexFunction tent = oracle::tent_z1(*m.source, n);
    std::vector<VertexId> ids = m.source->ball(n);
    std::vector<double> ones(ids.size(), 1.0);
    VertexFunction u1 = VertexFunction::from_sorted(std::move(ids), std::move(ones));
    double expected_sq = 1.0;
    for (int j = 1; j < n; ++j)
        expected_sq += 2.0 * std::pow(1.0 - static_cast<double>(j) / n, 2);
    VertexFunction w2 = weyl_vector(tent, u1, *g);
    CHECK(norm_m(*g, w2) == doctest::Approx(1.0).epsilon(1e-14));
    double raw = norm_m(*g, tent);
    CHECK(raw * raw == doctest::Approx(expected_sq).epsilon(1e-12));
    CHECK(raw * raw == doctest::Approx(2.0 * n / 3.0).epsilon(0.02));

    // vanishing product
    std::array<std::int64_t, 1> far{120};
    VertexFunction off = VertexFunction::from_pairs({{m.source->lattice_id(far), 1.0}});
    CHECK_THROWS_WITH_AS(static_cast<void>(weyl_vector(d0, off, *g)),
                         "eigenfunction vanishes on cutoff support", NumericError);
}

TEST_CASE("defect of an exact eigenpair is zero") {
    std::mt19937_64 rng(4242);
    GraphModel m = oracle::random_graph(rng, 24, true, true);
    FormHandle f{m.source, Potential::zero(), 1.0};
    std::vector<VertexId> whole = m.source->ball(m.source->max_radius());
    SparseSymOp op = dirichlet_operator(f, whole);
    EigenPairResult low = lowest_eigenpair(op);
    VertexFunction v = op.from_sym(low.vector);
    DefectResult d = weyl_defect(f, v, low.value, m.exhaustion);
    CHECK(d.value <= 1e-6);
}

TEST_CASE("defect scaling on the flat line") {
    GraphModel m = build_lattice(1, 500);
    FormHandle f{m.source, Potential::zero(), 1.0};
    auto g = m.source->truncation(450);
    double k = 1.0, lambda = 2.0 - 2.0 * std::cos(k);
    VertexFunction u = build_eigenfunction(plane_wave({k}), *m.source, 440);

    auto defect_at = [&](int n) {
        VertexFunction tent = oracle::tent_z1(*m.source, n);
        VertexFunction w = weyl_vector(tent, u, *g);
        DefectResult d = weyl_defect(f, w, lambda, m.exhaustion);
        CHECK(d.stabilized);
        return d.value;
    };
    double d100 = defect_at(100);
    double d200 = defect_at(200);
    double ratio = d200 / d100;
    CHECK(ratio >= 0.35);
    CHECK(ratio <= 0.65);

    // certificate dominates the defect
    VertexFunction tent100 = oracle::tent_z1(*m.source, 100);
    double cert = certificate(f, tent100, u, lambda);
    CHECK(d100 <= cert);
}

TEST_CASE("defect against the dense dual-norm oracle") {
    GraphModel m = build_lattice(1, 120);
    FormHandle f{m.source, Potential::zero(), 1.0};
    auto g = m.source->truncation(110);
    double k = 1.3, lambda = 2.0 - 2.0 * std::cos(k);
    VertexFunction u = build_eigenfunction(plane_wave({k}), *m.source, 100);
    VertexFunction tent = oracle::tent_z1(*m.source, 40);
    VertexFunction w = weyl_vector(tent, u, *g);

    // fixed truncation: ball of radius 49 (margin 8 from supp r at 41)
    DefectResult d = weyl_defect(f, w, lambda, m.exhaustion, 1e-3, 49);
    OperatorOptions oo;
    oo.diag_shift = f.shift();
    SparseSymOp op = dirichlet_operator(f, m.source->ball(49), oo);
    VertexFunction Hw = apply_operator(f, w);
    std::vector<std::pair<VertexId, double>> rp;
    for (VertexId v : Hw.ids()) {
        double val = Hw.value(v) - lambda * w.value(v);
        if (val != 0.0) rp.emplace_back(v, val);
    }
    VertexFunction r = VertexFunction::from_pairs(std::move(rp));
    std::vector<double> rhs = op.to_sym(r);
    std::vector<double> z = oracle::dense_solve(op, rhs);
    double expected = std::sqrt(dot(rhs, z));
    CHECK(d.value == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("defect controls the spectral distance") {
    // ‖v‖_q <= sqrt(‖H‖+s)·‖v‖ on bounded operators, so
    // dist(lambda, sigma(H_B)) <= defect·sqrt(bound+s) for w inside B
    GraphModel m = build_lattice(1, 1100);
    FormHandle f{m.source, Potential::zero(), 1.0};
    auto g = m.source->truncation(1000);
    double scale = std::sqrt(operator_norm_bound(f) + f.shift());
    for (double k : {0.4, 1.0}) {
        double lambda = 2.0 - 2.0 * std::cos(k);
        VertexFunction u = build_eigenfunction(
            [&] {
                EigenfunctionSpec s;
                s.kind = EigenfunctionSpec::Kind::PlaneWave;
                s.wave_k = {k};
                return s;
            }(),
            *m.source, 400);
        for (int n : {50, 100}) {
            VertexFunction tent = oracle::tent_z1(*m.source, n);
            VertexFunction w = weyl_vector(tent, u, *g);
            DefectResult d = weyl_defect(f, w, lambda, m.exhaustion);
            SpectralDistanceResult dist =
                spectral_distance(lambda, f, m.exhaustion.region(1000));
            CHECK(dist.value <= d.value * scale + 1e-12);
        }
    }
}

TEST_CASE("defect is monotone in the truncation") {
    GraphModel m = build_lattice(1, 300);
    FormHandle f{m.source, Potential::zero(), 1.0};
    auto g = m.source->truncation(280);
    double k = 0.7, lambda = 2.0 - 2.0 * std::cos(k);
    VertexFunction u = build_eigenfunction(plane_wave({k}), *m.source, 270);
    VertexFunction tent = oracle::tent_z1(*m.source, 60);
    VertexFunction w = weyl_vector(tent, u, *g);
    double prev = 0.0;
    for (int radius : {69, 77, 93, 125, 189}) {
        DefectResult d = weyl_defect(f, w, lambda, m.exhaustion, 1e-16, radius);
        CHECK(d.value >= prev - 1e-9);
        prev = d.value;
    }
}

TEST_CASE("negative control: lambda outside the spectrum") {
    GraphModel m = build_lattice(1, 2100);
    FormHandle f{m.source, Potential::zero(), 1.0};
    auto g = m.source->truncation(10);
    VertexFunction d0 = VertexFunction::from_pairs({{0, 1.0}});
    for (int radius : {50, 100, 200}) {
        DefectResult d = weyl_defect(f, d0, -1.0, m.exhaustion, 1e-3, radius);
        CHECK(d.value >= 0.1);
    }
    // the full dual norm tends to sqrt(3): <r,(H+1)^{-1} r> = <(H+1)d0, d0> = 3
    DefectResult dfull = weyl_defect(f, d0, -1.0, m.exhaustion);
    CHECK(dfull.value == doctest::Approx(std::sqrt(3.0)).epsilon(1e-3));

    SpectralDistanceResult dist = spectral_distance(-1.0, f, m.exhaustion.region(2000));
    CHECK(dist.exact);
    CHECK(dist.value >= 0.58);
}

TEST_CASE("certificate closed form on the flat line") {
    GraphModel m = build_lattice(1, 140);
    FormHandle f{m.source, Potential::zero(), 1.0};
    int n = 100;
    VertexFunction tent = oracle::tent_z1(*m.source, n);
    std::vector<VertexId> ids = m.source->ball(n);
    std::vector<double> ones(ids.size(), 1.0);
    VertexFunction u1 = VertexFunction::from_sorted(std::move(ids), std::move(ones));
    double norm_sq = 1.0;
    for (int j = 1; j < n; ++j)
        norm_sq += 2.0 * std::pow(1.0 - static_cast<double>(j) / n, 2);
    double expected = 3.0 * std::sqrt(2.0 / n) / std::sqrt(norm_sq);
    CHECK(certificate(f, tent, u1, 0.0) == doctest::Approx(expected).epsilon(1e-12));

    // prefactor with a potential: ‖W‖ = 3, lambda = 4 gives 2 + sqrt(8)
    FormHandle fw = f.with_potential(Potential::constant(3.0), 1.0);
    double c = certificate(fw, tent, u1, 4.0);
    CHECK(c == doctest::Approx((2.0 + std::sqrt(8.0)) * std::sqrt(2.0 / n) /
                               std::sqrt(norm_sq))
                   .epsilon(1e-12));
}

TEST_CASE("spectral distance on the flat line") {
    GraphModel m = build_lattice(1, 1100);
    FormHandle f{m.source, Potential::zero(), 1.0};
    double lambda = 2.0 - 2.0 * std::cos(1.0);
    SpectralDistanceResult d = spectral_distance(lambda, f, m.exhaustion.region(1000));
    CHECK(d.exact);
    CHECK(d.method == "tridiagonal");
    CHECK(d.value <= 0.003);

    // an exact truncation eigenvalue has distance zero
    SparseSymOp op = dirichlet_operator(f, m.exhaustion.region(40));
    std::vector<double> spec = dense_spectrum(op);
    SpectralDistanceResult z = spectral_distance(spec[3], f, m.exhaustion.region(40));
    CHECK(z.value <= 1e-12);
}

TEST_CASE("full pipeline on the flat line") {
    GraphModel m = build_lattice(1, 8);
    FormHandle base{m.source, Potential::zero(), 1.0};
    ShnolOptions opts;
    opts.radii = {25, 50, 100};
    opts.criticality_radii = {4, 8, 16, 32, 64, 128, 256};
    opts.defect_target = 0.2;
    opts.dist_target = 0.02;
    opts.dist_radius = 500;
    EigenfunctionSpec u = plane_wave({1.0});
    WeylReport rep = shnol_verify(base, Potential::zero(), u,
                                  2.0 - 2.0 * std::cos(1.0), m.exhaustion, opts);
    CHECK(rep.failed_stage == 0);
    CHECK(rep.chain_ok);
    CHECK(rep.pass);
    REQUIRE(rep.defect.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(rep.defect[i] <= rep.certificate[i]);
    CHECK(rep.defect[2] < rep.defect[0]);
    CHECK(rep.criticality.kind == CriticalityKind::Critical);
}

TEST_CASE("full pipeline on the decaying ground state") {
    Potential kap = Potential::constant(0.5);
    kap.overrides = {{0, -1.0}};
    GraphModel m = build_lattice(1, 8, 0.5, kap);
    FormHandle base{m.source, Potential::zero(), 1.0};
    ShnolOptions opts;
    opts.radii = {4, 8, 16};
    opts.criticality_radii = {4, 8, 16, 32, 64, 128};
    opts.defect_target = 1e-3;
    opts.dist_target = 1e-3;
    opts.dist_radius = 600;
    EigenfunctionSpec u;
    u.kind = EigenfunctionSpec::Kind::Recurrence;
    u.lambda = 0.0;
    u.seed0 = 1.0;
    u.seed1 = 0.5;
    WeylReport rep = shnol_verify(base, Potential::zero(), u, 0.0, m.exhaustion, opts);
    CHECK(rep.failed_stage == 0);
    CHECK(rep.pass);
    CHECK(rep.spectral_dist <= 1e-3);
}

TEST_CASE("full pipeline with a nonzero criticalizing potential") {
    // base H = L + kappa with kappa chosen so that psi = 4^{-|x|} solves
    // H psi = 0; W makes H + W the operator whose ground state is 2^{-|x|}.
    // All values are exact binary fractions, so both functions integrate
    // exactly and |psi| <= phi holds with full margin.
    Potential kap = Potential::constant(2.25);
    kap.overrides = {{0, -1.5}};
    GraphModel m = build_lattice(1, 8, 0.5, kap);
    FormHandle base{m.source, Potential::zero(), 1.0};

    Potential W = Potential::constant(-1.75);
    W.overrides = {{0, 0.5}};

    ShnolOptions opts;
    opts.radii = {4, 8, 16};
    opts.criticality_radii = {4, 8, 16, 32, 64, 128};
    opts.defect_target = 1e-3;
    opts.dist_target = 1e-3;
    opts.dist_radius = 400;
    EigenfunctionSpec u;
    u.kind = EigenfunctionSpec::Kind::Recurrence;
    u.lambda = 0.0;
    u.seed0 = 1.0;
    u.seed1 = 0.25;
    WeylReport rep = shnol_verify(base, W, u, 0.0, m.exhaustion, opts);
    CHECK(rep.failed_stage == 0);
    CHECK(rep.chain_ok);
    CHECK(rep.pass);
    CHECK(rep.spectral_dist <= 1e-6); // psi is a genuine bound state of H
    for (std::size_t i = 0; i < rep.defect.size(); ++i)
        CHECK(rep.defect[i] <= rep.certificate[i]);
    // the certificate carries the W-dependent prefactor 2 + sqrt(1+0+1.75)
    double prefactor = 2.0 + std::sqrt(1.0 + 0.0 + 1.75);
    CHECK(rep.certificate[0] ==
          doctest::Approx(prefactor * std::sqrt(rep.cap[0]) / rep.norm_wu[0])
              .epsilon(1e-12));
}

TEST_CASE("violation drill: growing solution fails domination") {
    GraphModel m = build_lattice(1, 8);
    FormHandle base{m.source, Potential::zero(), 1.0};
    ShnolOptions opts;
    opts.radii = {25, 50};
    opts.criticality_radii = {4, 8, 16, 32, 64, 128, 256};
    opts.dist_target = 10.0;
    EigenfunctionSpec u;
    u.kind = EigenfunctionSpec::Kind::Recurrence;
    u.lambda = -1.0; // solves the equation, grows like ((3+sqrt(5))/2)^x
    u.seed0 = 1.0;
    u.seed1 = 1.0;
    WeylReport rep = shnol_verify(base, Potential::zero(), u, -1.0, m.exhaustion, opts);
    CHECK(rep.failed_stage == 2);
    CHECK(!rep.pass);
    CHECK(rep.failure.find("domination") != std::string::npos);
}
