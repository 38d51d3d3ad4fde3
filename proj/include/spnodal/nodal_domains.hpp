#pragma once

#include <vector>

#include "spnodal/grid.hpp"

namespace spnodal {

struct NodalReport {
  int count = 0;
  std::vector<double> volumes;
  std::vector<int> signs;
  double threshold = 0.0;
};

inline constexpr double kNodalThresholdFraction = 1e-8;

/// Connected components of {u > threshold} and {u < -threshold}: face
/// neighbours on box grids, adjacent nodes on radial grids.
inline NodalReport nodal_domains(const Field& u, double threshold) {
  if (threshold < 0.0) throw std::invalid_argument("nodal threshold must be nonnegative");
  const auto& d = u.domain();
  NodalReport rep;
  rep.threshold = threshold;
  const std::size_t total = u.size();
  auto sign_of = [&](std::size_t i) -> int {
    if (d.is_boundary(i)) return 0;
    if (u[i] > threshold) return 1;
    if (u[i] < -threshold) return -1;
    return 0;
  };
  std::vector<int> label(total, -1);
  std::vector<std::size_t> stack;
  const int n = d.n;
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  for (std::size_t seed = 0; seed < total; ++seed) {
    const int sg = sign_of(seed);
    if (sg == 0 || label[seed] >= 0) continue;
    const int id = rep.count++;
    double volume = 0.0;
    stack.assign(1, seed);
    label[seed] = id;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      volume += d.quad_weights[c];
      auto visit = [&](std::size_t nb) {
        if (label[nb] < 0 && sign_of(nb) == sg) {
          label[nb] = id;
          stack.push_back(nb);
        }
      };
      if (d.kind == DomainKind::radial_ball) {
        if (c > 0) visit(c - 1);
        if (c + 1 < total) visit(c + 1);
      } else {
        const std::size_t i = c % n, j = (c / n) % n, k = c / plane;
        if (i > 0) visit(c - 1);
        if (i + 1 < static_cast<std::size_t>(n)) visit(c + 1);
        if (j > 0) visit(c - n);
        if (j + 1 < static_cast<std::size_t>(n)) visit(c + n);
        if (k > 0) visit(c - plane);
        if (k + 1 < static_cast<std::size_t>(n)) visit(c + plane);
      }
    }
    rep.volumes.push_back(volume);
    rep.signs.push_back(sg);
  }
  return rep;
}

/// Uses the default cutoff 1e-8 * max|u|.
inline NodalReport nodal_domains(const Field& u) {
  return nodal_domains(u, kNodalThresholdFraction * u.max_abs());
}

}  // namespace spnodal
