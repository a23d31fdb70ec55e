#pragma once

#include <array>
#include <vector>

namespace bidomain::quad {

struct Rule1D {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

/// Gauss–Legendre rule with n points mapped to [0, 1]. Cached per n.
const Rule1D& gauss_legendre(int n);

struct TrianglePoint {
  double l1, l2, l3;  // barycentric coordinates
  double w;           // weights sum to 1 (multiply by area)
};

/// Symmetric 7-point rule, exact for degree 5 (Radon / Dunavant).
const std::vector<TrianglePoint>& triangle7();
/// Symmetric 16-point rule, exact for degree 8 (Dunavant).
const std::vector<TrianglePoint>& triangle16();

}  // namespace bidomain::quad
