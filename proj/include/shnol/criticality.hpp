#pragma once

#include <span>
#include <string>
#include <vector>

#include "shnol/forms.hpp"

namespace shnol {

/// Null-sequence evidence: equilibrium potentials over an exhaustion and
/// their energies (capacities). cap is nonincreasing in the radius.
struct CapacityTrace {
    std::vector<int> radii;
    std::vector<double> cap;
    std::vector<VertexFunction> potentials;
    double min_potential = 0.0; // observed value range across all radii;
    double max_potential = 0.0; // range violations are reported, not hidden
};

enum class CriticalityKind { Critical, Subcritical, NotNonnegative };

struct CriticalityOptions {
    std::vector<int> radii;        // increasing exhaustion indices, >= 3 entries
    double eps_critical = 1e-3;    // cap threshold at the largest radius
    double decrease_factor = 0.75; // dyadic decrease factor for "Critical"
    double stabilize_rel = 0.01;   // dyadic relative change for "Subcritical"
    double solve_tol = 1e-12;
};

struct CriticalityVerdict {
    CriticalityKind kind = CriticalityKind::Subcritical;
    /// Pointwise Richardson extrapolation of the last two equilibrium
    /// potentials, pinned to 1 at the root; reliable inside trust_radius.
    VertexFunction ground_state;
    int trust_radius = 0;
    double cap_limit_estimate = 0.0;
    CapacityTrace evidence;
    std::string note;
};

/// Energy minimizer among functions equal to 1 at `o` and supported in
/// `region`; returns (phi, Q(phi)). Solves H phi = 0 on region \ {o}.
std::pair<VertexFunction, double>
equilibrium_potential(const FormHandle& f, std::span<const VertexId> region,
                      VertexId o, double solve_tol = 1e-12);

CapacityTrace null_sequence(const FormHandle& f, const Exhaustion& ex,
                            std::span<const int> radii, double solve_tol = 1e-12);

CriticalityVerdict detect_criticality(const FormHandle& f, const Exhaustion& ex,
                                      const CriticalityOptions& opts);

/// Dirichlet Green function on region(n) with pole o: H G = delta_o / m(o).
VertexFunction green_function(const FormHandle& f, VertexId o, const Exhaustion& ex,
                              int n, double solve_tol = 1e-12);

struct CouplingResult {
    double t_final = 0.0;        // threshold at the largest radius
    std::vector<int> radii;
    std::vector<double> t_trace; // nonincreasing in the radius
    double t_extrapolated = 0.0; // Aitken limit (geometric error model)
    /// Limit of the fit t(n) = t + c2/n² + c3/n³ through the last three
    /// points: the truncation-error model of Dirichlet ball thresholds.
    double t_extrapolated_poly = 0.0;
};

/// t*(B_n) = sup { t >= 0 : Q - t·Q_W >= 0 on C_0(B_n) } by bisection on the
/// sign of the lowest Dirichlet eigenvalue of H - t W.
CouplingResult critical_coupling(const FormHandle& f, const Potential& W,
                                 const Exhaustion& ex, std::span<const int> radii,
                                 int bisection_iters = 40);

/// W = t*·1_K with t* from critical_coupling, such that H - W is critical.
/// Throws NumericError("nothing to criticalize") when t* extrapolates to 0.
Potential criticalize(const FormHandle& f, std::span<const VertexId> K,
                      const Exhaustion& ex, int n_max);

} // namespace shnol
