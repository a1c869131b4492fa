#include "rnls/ba.h"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace rnls {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Rodrigues coefficients a = sin(t)/t and b = (1-cos(t))/t^2 with series
// expansions near zero.
void rodrigues_coeffs(double theta, double& a, double& b) {
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
}

}  // namespace

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& w) {
  double a, b;
  rodrigues_coeffs(w.norm(), a, b);
  const Eigen::Matrix3d W = skew(w);
  return Eigen::Matrix3d::Identity() + a * W + b * W * W;
}

Eigen::Vector3d rotate_point(const Eigen::Vector3d& w, const Eigen::Vector3d& x) {
  double a, b;
  rodrigues_coeffs(w.norm(), a, b);
  const Eigen::Vector3d wx = w.cross(x);
  return x + a * wx + b * w.cross(wx);
}

Eigen::Matrix3d rotate_point_jacobian(const Eigen::Vector3d& w,
                                      const Eigen::Vector3d& x) {
  const double theta = w.norm();
  double a, b;
  rodrigues_coeffs(theta, a, b);
  // Derivatives of the coefficients divided by theta: a'(t)/t and b'(t)/t.
  double da_t, db_t;
  if (theta < 1e-3) {
    const double t2 = theta * theta;
    da_t = -1.0 / 3.0 + t2 / 30.0;
    db_t = -1.0 / 12.0 + t2 / 180.0;
  } else {
    const double t2 = theta * theta;
    da_t = (theta * std::cos(theta) - std::sin(theta)) / (t2 * theta);
    db_t = (theta * std::sin(theta) - 2.0 * (1.0 - std::cos(theta))) / (t2 * t2);
  }
  const Eigen::Vector3d wx = w.cross(x);
  const Eigen::Vector3d wwx = w.cross(wx);
  Eigen::Matrix3d J = da_t * wx * w.transpose() + db_t * wwx * w.transpose() -
                      a * skew(x) +
                      b * (w.dot(x) * Eigen::Matrix3d::Identity() +
                           w * x.transpose() - 2.0 * x * w.transpose());
  return J;
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& R) {
  const double cos_theta =
      std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Eigen::Vector3d vee(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)),
                            0.5 * (R(1, 0) - R(0, 1)));  // sin(theta) * axis
  if (theta < 1e-8) return vee;
  if (theta < std::numbers::pi - 1e-4) return (theta / std::sin(theta)) * vee;
  // Near pi: recover the axis from the symmetric part R ~ 2 a a^T - I.
  Eigen::Vector3d axis;
  for (int i = 0; i < 3; ++i)
    axis[i] = std::sqrt(std::max(0.0, (R(i, i) - cos_theta) / (1.0 - cos_theta)));
  int k = 0;
  axis.cwiseAbs().maxCoeff(&k);
  for (int j = 0; j < 3; ++j) {
    if (j == k) continue;
    const double prod = 0.5 * (R(k, j) + R(j, k)) / (1.0 - cos_theta);
    axis[j] = prod / axis[k];
  }
  axis.normalize();
  if (axis.dot(vee) < 0.0) axis = -axis;
  return theta * axis;
}

Eigen::Vector3d normalize_axis_angle(const Eigen::Vector3d& w) {
  Eigen::Vector3d out = w;
  double theta = out.norm();
  while (theta > std::numbers::pi) {
    out *= 1.0 - 2.0 * std::numbers::pi / theta;
    theta = out.norm();
  }
  return out;
}

// ---------------------------------------------------------------------------
// BAL I/O

namespace {

// Whitespace-separated token reader that tracks line numbers for errors.
class Tokenizer {
 public:
  explicit Tokenizer(std::istream& in) : in_(in) {}

  int line() const { return line_; }

  double next_double(const std::string& what) {
    skip_space();
    double v = 0.0;
    if (!(in_ >> v))
      throw ParseError(line_, "expected " + what);
    return v;
  }

  int next_int(const std::string& what) {
    skip_space();
    int v = 0;
    if (!(in_ >> v)) throw ParseError(line_, "expected " + what);
    return v;
  }

  bool at_end() {
    skip_space();
    return in_.peek() == std::char_traits<char>::eof();
  }

 private:
  void skip_space() {
    int c;
    while ((c = in_.peek()) != std::char_traits<char>::eof() &&
           std::isspace(c)) {
      if (c == '\n') ++line_;
      in_.get();
    }
  }

  std::istream& in_;
  int line_ = 1;
};

}  // namespace

BalDataset parse_bal(std::istream& in) {
  Tokenizer tok(in);
  BalDataset d;
  const int nc = tok.next_int("camera count");
  const int np = tok.next_int("point count");
  const int no = tok.next_int("observation count");
  if (nc <= 0 || np <= 0 || no <= 0)
    throw ValidationError("header counts must be positive");

  d.observations.reserve(no);
  for (int i = 0; i < no; ++i) {
    BalObservation o;
    const std::string tag = "observation " + std::to_string(i) + " of " +
                            std::to_string(no);
    o.camera = tok.next_int("camera index (" + tag + ")");
    o.point = tok.next_int("point index (" + tag + ")");
    o.x = tok.next_double("x coordinate (" + tag + ")");
    o.y = tok.next_double("y coordinate (" + tag + ")");
    if (o.camera < 0 || o.camera >= nc)
      throw ValidationError("observation " + std::to_string(i) +
                            ": camera index " + std::to_string(o.camera) +
                            " out of range [0, " + std::to_string(nc) + ")");
    if (o.point < 0 || o.point >= np)
      throw ValidationError("observation " + std::to_string(i) +
                            ": point index " + std::to_string(o.point) +
                            " out of range [0, " + std::to_string(np) + ")");
    d.observations.push_back(o);
  }

  d.cameras.resize(nc);
  for (int c = 0; c < nc; ++c) {
    const std::string tag =
        "camera " + std::to_string(c) + " of " + std::to_string(nc);
    for (int k = 0; k < 3; ++k)
      d.cameras[c].rotation[k] = tok.next_double("rotation value (" + tag + ")");
    for (int k = 0; k < 3; ++k)
      d.cameras[c].translation[k] =
          tok.next_double("translation value (" + tag + ")");
    d.cameras[c].focal = tok.next_double("focal length (" + tag + ")");
    d.cameras[c].k1 = tok.next_double("distortion k1 (" + tag + ")");
    d.cameras[c].k2 = tok.next_double("distortion k2 (" + tag + ")");
  }

  d.points.resize(np);
  for (int p = 0; p < np; ++p) {
    const std::string tag =
        "point " + std::to_string(p) + " of " + std::to_string(np);
    for (int k = 0; k < 3; ++k)
      d.points[p][k] = tok.next_double("coordinate (" + tag + ")");
  }
  return d;
}

void write_bal(const BalDataset& d, std::ostream& out) {
  char buf[96];
  out << d.num_cameras() << ' ' << d.num_points() << ' ' << d.num_observations()
      << '\n';
  for (const auto& o : d.observations) {
    std::snprintf(buf, sizeof(buf), "%d %d %.17g %.17g\n", o.camera, o.point, o.x,
                  o.y);
    out << buf;
  }
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  };
  for (const auto& c : d.cameras) {
    for (int k = 0; k < 3; ++k) emit(c.rotation[k]);
    for (int k = 0; k < 3; ++k) emit(c.translation[k]);
    emit(c.focal);
    emit(c.k1);
    emit(c.k2);
  }
  for (const auto& p : d.points)
    for (int k = 0; k < 3; ++k) emit(p[k]);
}

// ---------------------------------------------------------------------------
// Projection

bool project_point(const BalCamera& camera, const Eigen::Vector3d& X,
                   Eigen::Vector2d& uv, Eigen::Matrix<double, 2, 6>* J_camera,
                   Eigen::Matrix<double, 2, 3>* J_point) {
  const Eigen::Vector3d P = rotate_point(camera.rotation, X) + camera.translation;
  if (std::abs(P.z()) < 1e-12) return false;

  const Eigen::Vector2d q(-P.x() / P.z(), -P.y() / P.z());
  const double l = q.squaredNorm();
  const double dist = 1.0 + camera.k1 * l + camera.k2 * l * l;
  uv = camera.focal * dist * q;

  if (!J_camera && !J_point) return true;

  Eigen::Matrix<double, 2, 3> dq_dP;
  dq_dP << -1.0 / P.z(), 0.0, P.x() / (P.z() * P.z()),
      0.0, -1.0 / P.z(), P.y() / (P.z() * P.z());
  const Eigen::Matrix2d duv_dq =
      camera.focal * (dist * Eigen::Matrix2d::Identity() +
                      2.0 * (camera.k1 + 2.0 * camera.k2 * l) * q * q.transpose());
  const Eigen::Matrix<double, 2, 3> duv_dP = duv_dq * dq_dP;

  if (J_camera) {
    J_camera->leftCols<3>() = duv_dP * rotate_point_jacobian(camera.rotation, X);
    J_camera->rightCols<3>() = duv_dP;
  }
  if (J_point)
    *J_point = duv_dP * axis_angle_to_matrix(camera.rotation);
  return true;
}

Eigen::Vector2d project(const BalCamera& camera, const Eigen::Vector3d& X) {
  Eigen::Vector2d uv;
  if (!project_point(camera, X, uv, nullptr, nullptr))
    throw EvaluationError(-1, "project: point at zero depth");
  return uv;
}

// ---------------------------------------------------------------------------
// Reprojection problem

namespace {

class ReprojectionResidual : public ResidualFunction {
 public:
  ReprojectionResidual(const Eigen::Vector2d& measurement, double focal, double k1,
                       double k2)
      : u_(measurement), focal_(focal), k1_(k1), k2_(k2) {}

  int dimension() const override { return 2; }

  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    BalCamera cam;
    cam.rotation = params[0].head<3>();
    cam.translation = params[0].tail<3>();
    cam.focal = focal_;
    cam.k1 = k1_;
    cam.k2 = k2_;
    const Eigen::Vector3d X = params[1];

    Eigen::Vector2d uv;
    Eigen::Matrix<double, 2, 6> Jc;
    Eigen::Matrix<double, 2, 3> Jp;
    if (!project_point(cam, X, uv, jacobians ? &Jc : nullptr,
                       jacobians ? &Jp : nullptr))
      return false;
    residual = u_ - uv;
    if (jacobians) {
      (*jacobians)[0] = -Jc;
      (*jacobians)[1] = -Jp;
    }
    return true;
  }

 private:
  Eigen::Vector2d u_;
  double focal_, k1_, k2_;
};

}  // namespace

Problem make_reprojection_problem(const BalDataset& dataset,
                                  const RobustKernel& kernel) {
  std::vector<int> camera_obs(dataset.num_cameras(), 0);
  std::vector<int> point_obs(dataset.num_points(), 0);
  for (const auto& o : dataset.observations) {
    ++camera_obs[o.camera];
    ++point_obs[o.point];
  }
  for (int c = 0; c < dataset.num_cameras(); ++c)
    if (camera_obs[c] == 0)
      throw ValidationError("camera " + std::to_string(c) + " has no observations");
  for (int p = 0; p < dataset.num_points(); ++p)
    if (point_obs[p] == 0)
      throw ValidationError("point " + std::to_string(p) + " has no observations");

  Problem problem(kernel);
  for (const auto& cam : dataset.cameras) {
    Eigen::VectorXd v(6);
    v << cam.rotation, cam.translation;
    problem.add_block(v);
  }
  const int point_base = dataset.num_cameras();
  for (const auto& p : dataset.points) problem.add_block(p);

  for (const auto& o : dataset.observations) {
    const BalCamera& cam = dataset.cameras[o.camera];
    problem.add_residual(
        std::make_shared<ReprojectionResidual>(Eigen::Vector2d(o.x, o.y), cam.focal,
                                               cam.k1, cam.k2),
        {o.camera, point_base + o.point});
  }

  const int num_cameras = dataset.num_cameras();
  problem.set_state_normalizer([num_cameras](Eigen::VectorXd& theta) {
    for (int c = 0; c < num_cameras; ++c) {
      Eigen::Vector3d w = theta.segment<3>(6 * c);
      if (w.norm() > std::numbers::pi)
        theta.segment<3>(6 * c) = normalize_axis_angle(w);
    }
  });
  return problem;
}

double inlier_rate(const Eigen::VectorXd& residual_norms, double threshold) {
  if (!(threshold > 0.0))
    throw std::invalid_argument("inlier_rate: threshold must be > 0");
  if (residual_norms.size() == 0) return 0.0;
  const auto count =
      (residual_norms.array() <= threshold).count();
  return static_cast<double>(count) / static_cast<double>(residual_norms.size());
}

double inlier_rate(const Problem& problem, const Eigen::VectorXd& theta,
                   double threshold) {
  return inlier_rate(problem.evaluate_objective(theta).norms, threshold);
}

// ---------------------------------------------------------------------------
// Synthetic bundle adjustment

SynthBa synth_ba(const SynthBaConfig& cfg) {
  if (cfg.cameras < 2 || cfg.points < 1)
    throw std::invalid_argument("synth_ba: need >= 2 cameras and >= 1 point");
  if (cfg.outlier_fraction < 0.0 || cfg.outlier_fraction > 1.0)
    throw std::invalid_argument("synth_ba: outlier fraction must be in [0, 1]");
  if (cfg.observations_per_point < 2 ||
      cfg.observations_per_point > cfg.cameras)
    throw std::invalid_argument("synth_ba: observations per point must be in [2, cameras]");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthBa out;
  BalDataset& d = out.dataset;

  d.cameras.resize(cfg.cameras);
  for (int c = 0; c < cfg.cameras; ++c) {
    const double phi = 2.0 * std::numbers::pi * c / cfg.cameras + uniform(-0.1, 0.1);
    const Eigen::Vector3d center(cfg.camera_ring_radius * std::cos(phi),
                                 cfg.camera_ring_radius * std::sin(phi),
                                 uniform(-0.2, 0.2) * cfg.camera_ring_radius);
    // Camera looks at the origin; visible points have negative depth in the
    // camera frame (the projection negates the normalized coordinates).
    const Eigen::Vector3d z = center.normalized();
    Eigen::Vector3d up(0.0, 0.0, 1.0);
    if (std::abs(up.dot(z)) > 0.9) up = Eigen::Vector3d(0.0, 1.0, 0.0);
    const Eigen::Vector3d x = up.cross(z).normalized();
    const Eigen::Vector3d y = z.cross(x);
    Eigen::Matrix3d R;
    R.row(0) = x;
    R.row(1) = y;
    R.row(2) = z;
    d.cameras[c].rotation = matrix_to_axis_angle(R);
    d.cameras[c].translation = -R * center;
    d.cameras[c].focal = cfg.focal;
    if (cfg.distortion) {
      d.cameras[c].k1 = uniform(-0.02, 0.0);
      d.cameras[c].k2 = uniform(0.0, 0.002);
    }
  }

  auto visible = [&](int cam, const Eigen::Vector3d& X, Eigen::Vector2d& uv) {
    if (!project_point(d.cameras[cam], X, uv, nullptr, nullptr)) return false;
    const Eigen::Vector3d P =
        rotate_point(d.cameras[cam].rotation, X) + d.cameras[cam].translation;
    if (P.z() > -1e-2) return false;  // in front means negative depth
    return std::abs(uv.x()) <= cfg.half_width && std::abs(uv.y()) <= cfg.half_height;
  };

  // Points with a deterministic camera subset each; a point is regenerated
  // until its whole subset sees it inside the image.
  d.points.resize(cfg.points);
  std::vector<int> cam_order(cfg.cameras);
  std::vector<std::vector<int>> point_cams(cfg.points);
  for (int p = 0; p < cfg.points; ++p) {
    for (int c = 0; c < cfg.cameras; ++c) cam_order[c] = c;
    for (int k = 0; k < cfg.observations_per_point; ++k) {
      const int j = k + static_cast<int>(rng() % (cfg.cameras - k));
      std::swap(cam_order[k], cam_order[j]);
    }
    point_cams[p].assign(cam_order.begin(),
                         cam_order.begin() + cfg.observations_per_point);

    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      Eigen::Vector3d X(uniform(-cfg.scene_radius, cfg.scene_radius),
                        uniform(-cfg.scene_radius, cfg.scene_radius),
                        uniform(-cfg.scene_radius, cfg.scene_radius));
      Eigen::Vector2d uv;
      bool all_ok = true;
      for (int cam : point_cams[p])
        if (!visible(cam, X, uv)) {
          all_ok = false;
          break;
        }
      if (all_ok) {
        d.points[p] = X;
        placed = true;
      }
    }
    if (!placed)
      throw ValidationError("synth_ba: failed to place point " + std::to_string(p) +
                            " inside all selected views");
  }

  // Guarantee every camera is referenced by swapping an assignment.
  std::vector<int> camera_obs(cfg.cameras, 0);
  for (const auto& cams : point_cams)
    for (int c : cams) ++camera_obs[c];
  for (int c = 0; c < cfg.cameras; ++c) {
    if (camera_obs[c] > 0) continue;
    for (int p = 0; p < cfg.points && camera_obs[c] == 0; ++p) {
      Eigen::Vector2d uv;
      if (!visible(c, d.points[p], uv)) continue;
      if (std::find(point_cams[p].begin(), point_cams[p].end(), c) !=
          point_cams[p].end())
        continue;
      int donor = -1, donor_count = 0;
      for (size_t k = 0; k < point_cams[p].size(); ++k)
        if (camera_obs[point_cams[p][k]] > std::max(donor_count, 1)) {
          donor = static_cast<int>(k);
          donor_count = camera_obs[point_cams[p][k]];
        }
      if (donor < 0) continue;
      --camera_obs[point_cams[p][donor]];
      point_cams[p][donor] = c;
      ++camera_obs[c];
    }
    if (camera_obs[c] == 0)
      throw ValidationError("synth_ba: camera " + std::to_string(c) +
                            " sees no points");
  }

  // Noise-free observations first.
  for (int p = 0; p < cfg.points; ++p)
    for (int cam : point_cams[p]) {
      Eigen::Vector2d uv = project(d.cameras[cam], d.points[p]);
      d.observations.push_back({cam, p, uv.x(), uv.y()});
    }

  const int n_obs = d.num_observations();
  out.outlier_mask.assign(n_obs, false);
  const int n_outliers =
      static_cast<int>(std::llround(cfg.outlier_fraction * n_obs));
  std::vector<int> order(n_obs);
  for (int i = 0; i < n_obs; ++i) order[i] = i;
  for (int k = 0; k < n_outliers; ++k) {
    const int j = k + static_cast<int>(rng() % (n_obs - k));
    std::swap(order[k], order[j]);
  }
  for (int k = 0; k < n_outliers; ++k) out.outlier_mask[order[k]] = true;

  for (int i = 0; i < n_obs; ++i) {
    BalObservation& o = d.observations[i];
    if (out.outlier_mask[i]) {
      o.x = uniform(-cfg.half_width, cfg.half_width);
      o.y = uniform(-cfg.half_height, cfg.half_height);
    } else if (cfg.noise_px > 0.0) {
      const double sigma = cfg.noise_px / 3.0;
      Eigen::Vector2d n;
      do {
        n = sigma * Eigen::Vector2d(gauss(rng), gauss(rng));
      } while (n.norm() > cfg.noise_px);
      o.x += n.x();
      o.y += n.y();
    }
  }

  Problem problem = make_reprojection_problem(d, RobustKernel());
  out.ground_truth = problem.initial_state();
  return out;
}

// ---------------------------------------------------------------------------
// 1-D robust mean

namespace {

class OffsetResidual : public ResidualFunction {
 public:
  explicit OffsetResidual(double datum) : datum_(datum) {}
  int dimension() const override { return 1; }
  bool evaluate(const std::vector<Eigen::Ref<const Eigen::VectorXd>>& params,
                Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    residual[0] = params[0][0] - datum_;
    if (jacobians) (*jacobians)[0] = Eigen::MatrixXd::Ones(1, 1);
    return true;
  }

 private:
  double datum_;
};

}  // namespace

Problem make_robust_mean_problem(const RobustMean1D& spec, double theta0) {
  if (spec.data.size() < 1)
    throw std::invalid_argument("robust mean: need at least one datum");
  Problem problem(spec.kernel);
  Eigen::VectorXd init(1);
  init << theta0;
  const int block = problem.add_block(init);
  for (Eigen::Index i = 0; i < spec.data.size(); ++i)
    problem.add_residual(std::make_shared<OffsetResidual>(spec.data[i]), {block});
  return problem;
}

BruteForce1DResult brute_force_1d(const RobustMean1D& spec, double lo, double hi,
                                  double step) {
  if (!(step > 0.0)) throw std::invalid_argument("brute_force_1d: step must be > 0");
  auto value = [&](double theta) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < spec.data.size(); ++i)
      total += psi(spec.kernel, theta - spec.data[i]);
    return total;
  };

  BruteForce1DResult best{lo, value(lo)};
  for (double t = lo; t <= hi + 0.5 * step; t += step) {
    const double v = value(t);
    if (v < best.value) best = {t, v};
  }

  // Golden-section refinement around the winning grid point.
  double a = best.argmin - step, b = best.argmin + step;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), dd = a + gr * (b - a);
  double fc = value(c), fd = value(dd);
  for (int it = 0; it < 200 && (b - a) > 1e-14; ++it) {
    if (fc < fd) {
      b = dd;
      dd = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = dd;
      fc = fd;
      dd = a + gr * (b - a);
      fd = value(dd);
    }
  }
  const double refined = 0.5 * (a + b);
  const double fv = value(refined);
  if (fv < best.value) best = {refined, fv};
  return best;
}

}  // namespace rnls
