#pragma once

#include <string>
#include <vector>

#include "shnol/criticality.hpp"
#include "shnol/forms.hpp"
#include "shnol/gst.hpp"

namespace shnol {

/// Recipe for a generalized eigenfunction, produced on demand per truncation.
struct EigenfunctionSpec {
    enum class Kind { PlaneWave, Recurrence, File, GroundStateReference };
    Kind kind = Kind::PlaneWave;
    std::vector<double> wave_k; // PlaneWave: one component per lattice axis
    double lambda = 0.0;        // Recurrence
    double seed0 = 1.0, seed1 = 1.0;
    VertexFunction file_values;
};

/// Eigenvalue of the lattice plane wave prod_j cos(k_j x_j): sum 2-2cos(k_j).
double plane_wave_eigenvalue(std::span<const double> k);

VertexFunction build_eigenfunction(const EigenfunctionSpec& spec, const GraphSource& src,
                                   int radius);

struct EigenCheck {
    bool ok = false;
    double max_residual = 0.0;
    double tolerance = 0.0;
};

/// Pointwise residual max |(H_W u)(x) - lambda·u(x)| over the region,
/// compared against tol·(1+|lambda|)·sup|u|.
EigenCheck is_generalized_eigenfunction(const FormHandle& f, const VertexFunction& u,
                                        double lambda, std::span<const VertexId> region,
                                        double tol = 1e-8);

struct CaccioppoliResult {
    double lhs = 0.0;
    double bound = 0.0;
    bool ok = false;
};

/// Energy audit: sum over ordered pairs of v(x)²·d_b u(x,y)² against the
/// closed-form bound (1+sqrt(1+|lambda|+‖W‖∞))². Preconditions (|u| <= 1,
/// ‖v‖_q <= 1, zero-order-free base, the eigen-equation up to ‖W‖∞·|u|)
/// are enforced and violations throw with the failed hypothesis named.
CaccioppoliResult caccioppoli_audit(const FormHandle& f, const VertexFunction& u,
                                    double lambda, const VertexFunction& v,
                                    double pre_tol = 1e-8);

/// w = phi_n·u / ‖phi_n·u‖ in ℓ²(m). Throws when the product vanishes.
VertexFunction weyl_vector(const VertexFunction& phi_n, const VertexFunction& u,
                           const WeightedGraph& g);

struct DefectResult {
    double value = 0.0;
    bool stabilized = false; // false: the value is a lower bound only
    int truncation_radius = 0;
};

/// q-dual-norm defect sqrt(⟨r, (H_W+s)⁻¹ r⟩) with r = (H_W-lambda)·w,
/// evaluated on growing truncations (monotone from below) until the
/// relative change across a step drops under stab_tol.
DefectResult weyl_defect(const FormHandle& f, const VertexFunction& w, double lambda,
                         const Exhaustion& ex, double stab_tol = 1e-3,
                         int max_ball_radius = 0);

/// (2+sqrt(1+|lambda|+‖W‖∞))·sqrt(a(phi_n))/‖phi_n·u‖, the defect bound,
/// keeping the 1/‖phi_n·u‖ factor.
double certificate(const FormHandle& f, const VertexFunction& phi_n,
                   const VertexFunction& u, double lambda);

struct SpectralDistanceResult {
    double value = 0.0;
    bool exact = false;       // exact min over the full truncation spectrum
    std::string method;       // "tridiagonal", "dense", or "window"
    double nearest = 0.0;     // nearest eigenvalue when exact
};

/// min |lambda - mu| over the spectrum of the Dirichlet restriction; above
/// the dense cap a monotone Lanczos upper bound on the distance is returned.
SpectralDistanceResult spectral_distance(double lambda, const FormHandle& f,
                                         std::span<const VertexId> region,
                                         double window_target = 0.0);

// -- end-to-end pipeline -------------------------------------------------------

struct ShnolOptions {
    std::vector<int> radii;             // Weyl radii, strictly increasing
    std::vector<int> criticality_radii; // dyadic exhaustion indices for stage 1
    double defect_target = 0.0;         // 0: no absolute target, trend only
    double dist_target = 0.0;
    int dist_radius = 0;                // exhaustion index of the reference region
    std::vector<VertexId> dist_region;  // overrides dist_radius when nonempty
    bool require_decreasing_defect = true;
    double domination_slack = 1e-10;
    double eigen_check_tol = 1e-8;
    double stabilization_tol = 1e-3;

    enum class GroundStateMode { Detect, AssumeConstantOne, Explicit };
    GroundStateMode gs_mode = GroundStateMode::Detect;
    VertexFunction gs_explicit;
    int gs_trust_radius = 0; // Explicit / AssumeConstantOne: validity radius
};

struct CriticalitySummary {
    CriticalityKind kind = CriticalityKind::Subcritical;
    bool declared = false; // ground state declared by the scenario, not detected
    std::vector<int> radii;
    std::vector<double> cap;
    double cap_limit_estimate = 0.0;
    int trust_radius = 0;
    std::string note;
};

/// Size/weight digest of the transformed system (weights are summarized in
/// reports, never dumped).
struct TransformSummary {
    std::size_t vertices = 0;
    std::size_t undirected_edges = 0;
    double min_weight = 0.0, max_weight = 0.0;
    double min_measure = 0.0, max_measure = 0.0;
    int radius = 0;
};

struct WeylReport {
    double lambda = 0.0;
    std::vector<int> radii;
    std::vector<double> cap;         // image null-sequence energies a(phi_n)
    std::vector<double> norm_wu;     // ‖phi_n·u‖
    std::vector<double> defect;
    std::vector<char> defect_stabilized;
    std::vector<double> certificate;
    TransformSummary transform;
    double spectral_dist = 0.0;
    std::string dist_method;
    bool dist_exact = false;
    CriticalitySummary criticality;
    int failed_stage = 0; // 0 = completed; 1..6 per pipeline stage
    std::string failure;
    bool chain_ok = false; // defect <= certificate at every radius
    bool pass = false;
};

/// Full verification pipeline: criticality of H+W, domination |u| <= phi,
/// ground-state transform, image null-sequence, Weyl defects + certificates,
/// and the spectral distance of lambda from a reference truncation of H.
WeylReport shnol_verify(const FormHandle& base, const Potential& W,
                        const EigenfunctionSpec& u_spec, double lambda,
                        const Exhaustion& ex, const ShnolOptions& opts);

} // namespace shnol
