#pragma once

#include <cstddef>
#include <vector>

namespace seqbreak {

/// Nodes and weights of an n-point rule with sum(w_i h(z_i)) ~ E[h(Z)], Z ~ N(0, 1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the standard normal weight (probabilists' Hermite
/// polynomials). Exact for polynomials of degree <= 2n - 1. Weights sum to one.
QuadratureRule gauss_hermite_normal(std::size_t n);

} // namespace seqbreak
