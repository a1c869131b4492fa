#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <vector>

#include "rnls/problem.h"

namespace rnls {

// ---------------------------------------------------------------------------
// Rotations (axis-angle, Rodrigues)

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& w);
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& R);
Eigen::Vector3d rotate_point(const Eigen::Vector3d& w, const Eigen::Vector3d& x);
// d(R(w) x)/dw, 3x3.
Eigen::Matrix3d rotate_point_jacobian(const Eigen::Vector3d& w,
                                      const Eigen::Vector3d& x);
// Wraps the rotation angle into [0, pi].
Eigen::Vector3d normalize_axis_angle(const Eigen::Vector3d& w);

// ---------------------------------------------------------------------------
// BAL datasets

struct BalCamera {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();     // axis-angle
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double focal = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;
};

struct BalObservation {
  int camera = 0;
  int point = 0;
  double x = 0.0;
  double y = 0.0;
};

struct BalDataset {
  std::vector<BalCamera> cameras;
  std::vector<Eigen::Vector3d> points;
  std::vector<BalObservation> observations;

  int num_cameras() const { return static_cast<int>(cameras.size()); }
  int num_points() const { return static_cast<int>(points.size()); }
  int num_observations() const { return static_cast<int>(observations.size()); }
};

// Text layout: "num_cameras num_points num_observations", one observation
// per line "cam point x y", then 9 values per camera, then 3 per point.
BalDataset parse_bal(std::istream& in);
void write_bal(const BalDataset& dataset, std::ostream& out);

// Camera model: P = R X + t, p = -(P1/P3, P2/P3),
// uv = focal * (1 + k1 |p|^2 + k2 |p|^4) * p. Returns false when |P3| is
// numerically zero. Jacobians (2x6 w.r.t. [rotation; translation], 2x3
// w.r.t. the point) are optional.
bool project_point(const BalCamera& camera, const Eigen::Vector3d& X,
                   Eigen::Vector2d& uv, Eigen::Matrix<double, 2, 6>* J_camera,
                   Eigen::Matrix<double, 2, 3>* J_point);

// Throwing convenience wrapper.
Eigen::Vector2d project(const BalCamera& camera, const Eigen::Vector3d& X);

// Parameter blocks: 6 per camera ([axis-angle; translation]) in dataset
// order, then 3 per point; intrinsics stay fixed. One 2-D residual block per
// observation, residual = measurement - projection.
Problem make_reprojection_problem(const BalDataset& dataset, const RobustKernel& kernel);

double inlier_rate(const Eigen::VectorXd& residual_norms, double threshold);
double inlier_rate(const Problem& problem, const Eigen::VectorXd& theta,
                   double threshold = 1.0);

// ---------------------------------------------------------------------------
// Synthetic bundle adjustment with planted outliers

struct SynthBaConfig {
  int cameras = 10;
  int points = 200;
  int observations_per_point = 3;
  double noise_px = 1.0;          // inlier noise bound; Gaussian sigma = noise_px/3
  double outlier_fraction = 0.2;  // exact count round(fraction * observations)
  unsigned seed = 0;
  double focal = 500.0;
  double half_width = 256.0;      // measurements live in [-half, half]^2
  double half_height = 256.0;
  double scene_radius = 5.0;
  double camera_ring_radius = 15.0;
  bool distortion = false;        // small nonzero k1/k2 when set
};

struct SynthBa {
  BalDataset dataset;              // cameras/points hold the ground truth
  Eigen::VectorXd ground_truth;    // reprojection-problem state layout
  std::vector<bool> outlier_mask;  // one flag per observation
};

// Deterministic for a fixed config (seed included). Inlier observations are
// perturbed by zero-mean Gaussian noise (sigma = noise_px/3 per coordinate)
// truncated so the noise norm never exceeds noise_px, keeping the planted
// inlier/outlier mask exact at the 1 px threshold. Outlier observations are
// uniform draws over the image rectangle.
SynthBa synth_ba(const SynthBaConfig& config);

// ---------------------------------------------------------------------------
// 1-D robust mean family and brute-force oracle

struct RobustMean1D {
  Eigen::VectorXd data;
  RobustKernel kernel;
};

Problem make_robust_mean_problem(const RobustMean1D& spec, double theta0);

struct BruteForce1DResult {
  double argmin = 0.0;
  double value = 0.0;
};

// Exhaustive grid over [lo, hi] followed by a golden-section refinement on
// the winning grid point's neighborhood.
BruteForce1DResult brute_force_1d(const RobustMean1D& spec, double lo, double hi,
                                  double step);

}  // namespace rnls
