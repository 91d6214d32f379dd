#pragma once

#include <span>

namespace cdanse {

/// Quadrature point on the reference triangle {x >= 0, y >= 0, x + y <= 1};
/// weights sum to 1/2 (the reference area).
struct QuadPoint {
    double x;
    double y;
    double w;
};

/// Symmetric 7-point rule, exact for polynomials of total degree 5.
/// This is the default assembly rule (the convective integrand has degree 5).
std::span<const QuadPoint> triangle_rule_degree5();

/// 16-point conical-product rule (Gauss-Legendre x Gauss-Jacobi), exact for
/// total degree 7. Used for cross-checking quadrature exactness and for
/// error integration against smooth exact solutions.
std::span<const QuadPoint> triangle_rule_degree7();

}  // namespace cdanse
