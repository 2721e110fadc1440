#pragma once

#include "shnol/forms.hpp"

namespace shnol {

/// Conjugation of H by a positive harmonic phi: the image graph carries
/// b_phi(x,y) = phi(x)·phi(y)·b(x,y), zero kappa, and measure phi²·m.
/// Q_base(phi·g) = Q_image(g) for interior-supported g, and matched
/// Dirichlet truncations of base and image are exactly similar.
struct TransformedSystem {
    std::shared_ptr<const GraphSource> image;
    VertexFunction phi;
    int radius = 0; // image covers the ball of this radius around the root
};

/// Builds the transform on the closed ball of the given radius. phi must be
/// positive there and harmonic for the full form (including W) on the
/// interior: sup-residual <= tol·(1+‖κ+W‖∞)·sup phi.
TransformedSystem ground_state_transform(const FormHandle& f, const VertexFunction& phi,
                                         int radius, double harmonicity_tol = 1e-8);

/// T_phi u = u / phi pointwise on supp(u); isometry ℓ²(m) → ℓ²(phi²m).
VertexFunction transform_function(const VertexFunction& phi, const VertexFunction& u);

} // namespace shnol
