#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "densecorr/error.hpp"

namespace densecorr {

using Vec2 = Eigen::Vector2d;

struct MdsOptions {
  int max_iterations = 300;
  /// Stop once (previous - current) / previous stress falls below this.
  double relative_tolerance = 1e-9;
};

struct Embedding {
  std::vector<Vec2> points;
  /// Raw stress of the classical-MDS start followed by one entry per accepted
  /// SMACOF step; never increases.
  std::vector<double> stress_history;
};

/// Sum over i < j of (|x_i - x_j| - d_ij)^2.
inline double raw_stress(const Eigen::MatrixXd& distances, const std::vector<Vec2>& points) {
  double stress = 0.0;
  const auto n = static_cast<Eigen::Index>(points.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(j)]).norm() - distances(i, j);
      stress += r * r;
    }
  }
  return stress;
}

namespace detail {

inline void check_distance_matrix(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) fail(Errc::InvalidArgument, "distance matrix is not square");
  const auto n = d.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) fail(Errc::InvalidArgument, "distance matrix has a non-zero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(d(i, j)) || d(i, j) < 0.0)
        fail(Errc::InvalidArgument, "distance matrix entries must be finite and non-negative");
      const double scale = std::max(std::abs(d(i, j)), std::abs(d(j, i)));
      if (std::abs(d(i, j) - d(j, i)) > 1e-12 * scale) fail(Errc::InvalidArgument, "distance matrix is not symmetric");
    }
  }
}

// Torgerson scaling: top two eigenpairs of the double-centred squared distances.
inline std::vector<Vec2> classical_mds(const Eigen::MatrixXd& d) {
  const auto n = d.rows();
  const Eigen::MatrixXd squared = d.array().square().matrix();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd gram = -0.5 * centering * squared * centering;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) fail(Errc::NumericalFailure, "eigendecomposition of the Gram matrix did not converge");
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  std::vector<Vec2> points(static_cast<std::size_t>(n), Vec2::Zero());
  for (int axis = 0; axis < 2 && axis < n; ++axis) {
    const Eigen::Index column = n - 1 - axis;
    const double scale = std::sqrt(std::max(values(column), 0.0));
    for (Eigen::Index i = 0; i < n; ++i) points[static_cast<std::size_t>(i)](axis) = scale * vectors(i, column);
  }
  return points;
}

// One Guttman transform X <- B(X) X / n for unit weights.
inline std::vector<Vec2> guttman_transform(const Eigen::MatrixXd& d, const std::vector<Vec2>& x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  std::vector<Vec2> next(x.size(), Vec2::Zero());
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec2 acc = Vec2::Zero();
    const Vec2& xi = x[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec2& xj = x[static_cast<std::size_t>(j)];
      const double dist = (xi - xj).norm();
      if (dist > 0.0) acc += (d(i, j) / dist) * (xi - xj);
    }
    next[static_cast<std::size_t>(i)] = acc / static_cast<double>(n);
  }
  return next;
}

}  // namespace detail

/// Planar embedding of a distance matrix: classical MDS start refined by
/// SMACOF on raw stress. A step that would raise the stress is rejected and
/// ends the iteration, so `stress_history` is monotone.
inline Embedding unwrap_part(const Eigen::MatrixXd& distances, const MdsOptions& options = {}) {
  detail::check_distance_matrix(distances);
  const auto n = distances.rows();
  Embedding result;
  if (n == 0) return result;
  if (n == 1) {
    result.points = {Vec2::Zero()};
    result.stress_history = {0.0};
    return result;
  }
  if (distances.isZero(0.0)) fail(Errc::DegenerateInput, "all pairwise distances are zero");

  std::vector<Vec2> current = detail::classical_mds(distances);
  double stress = raw_stress(distances, current);
  result.stress_history.push_back(stress);
  for (int iteration = 0; iteration < options.max_iterations && stress > 0.0; ++iteration) {
    auto candidate = detail::guttman_transform(distances, current);
    const double candidate_stress = raw_stress(distances, candidate);
    if (!std::isfinite(candidate_stress)) fail(Errc::NumericalFailure, "SMACOF produced a non-finite stress");
    if (candidate_stress > stress) break;
    const double improvement = stress - candidate_stress;
    current = std::move(candidate);
    stress = candidate_stress;
    result.stress_history.push_back(stress);
    if (improvement <= options.relative_tolerance * result.stress_history[result.stress_history.size() - 2]) break;
  }
  result.points = std::move(current);
  return result;
}

}  // namespace densecorr
