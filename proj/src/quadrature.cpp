#include "bidomain/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace bidomain::quad {

namespace {

Rule1D build_gauss_legendre(int n) {
  Rule1D rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

std::vector<TrianglePoint> expand(const std::vector<std::array<double, 4>>& orbits) {
  // Each orbit: {a, b, c, w} with a permutation class inferred from equalities.
  std::vector<TrianglePoint> pts;
  for (const auto& o : orbits) {
    const double a = o[0], b = o[1], c = o[2], w = o[3];
    if (a == b && b == c) {
      pts.push_back({a, b, c, w});
    } else if (b == c) {
      pts.push_back({a, b, b, w});
      pts.push_back({b, a, b, w});
      pts.push_back({b, b, a, w});
    } else {
      const double v[3] = {a, b, c};
      const int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
      for (const auto& p : perm) pts.push_back({v[p[0]], v[p[1]], v[p[2]], w});
    }
  }
  return pts;
}

}  // namespace

const Rule1D& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, Rule1D> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
  return it->second;
}

const std::vector<TrianglePoint>& triangle7() {
  static const std::vector<TrianglePoint> rule = [] {
    const double s15 = std::sqrt(15.0);
    const double a1 = (6.0 - s15) / 21.0, b1 = (9.0 + 2.0 * s15) / 21.0;
    const double a2 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
    const double w1 = (155.0 - s15) / 1200.0, w2 = (155.0 + s15) / 1200.0;
    return expand({{1.0 / 3, 1.0 / 3, 1.0 / 3, 9.0 / 40.0}, {b1, a1, a1, w1}, {b2, a2, a2, w2}});
  }();
  return rule;
}

const std::vector<TrianglePoint>& triangle16() {
  static const std::vector<TrianglePoint> rule = [] {
    return expand({
        {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.144315607677787},
        {0.081414823414554, 0.459292588292723, 0.459292588292723, 0.095091634267285},
        {0.658861384496480, 0.170569307751760, 0.170569307751760, 0.103217370534718},
        {0.898905543365938, 0.050547228317031, 0.050547228317031, 0.032458497623198},
        {0.008394777409958, 0.263112829634638, 0.728492392955404, 0.027230314174435},
    });
  }();
  return rule;
}

}  // namespace bidomain::quad
