#include "satpose/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace satpose {

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  if (n <= 0.0) throw InvalidInputError("from_axis_angle: zero axis");
  const double half = 0.5 * angle_rad;
  const double s = std::sin(half) / n;
  return {std::cos(half), axis.x() * s, axis.y() * s, axis.z() * s};
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (n < 1e-12) throw InvalidInputError("quaternion norm is zero");
  return {w / n, x / n, y / n, z / n};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
  // q * (0, v) * conj(q), expanded.
  const Vec3 u(x, y, z);
  const Vec3 uv = u.cross(v);
  return v + 2.0 * (w * uv + u.cross(uv));
}

Quaternion random_unit_quaternion(Rng& rng) {
  double w, x, y, z, n2;
  do {
    w = rng.normal();
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n2 = w * w + x * x + y * y + z * z;
  } while (n2 < 1e-12);
  const double inv = 1.0 / std::sqrt(n2);
  return Quaternion{w * inv, x * inv, y * inv, z * inv}.canonical();
}

Mat3 quat_to_rotmat(const Quaternion& q_in) {
  const double n = q_in.norm();
  if (n < 1e-12) throw InvalidInputError("quat_to_rotmat: zero quaternion");
  Quaternion q = q_in;
  if (std::abs(n - 1.0) > 1e-6) q = q_in.normalized();
  else {
    // Still divide out the tiny residual so R is orthonormal to 1e-15.
    q = {q.w / n, q.x / n, q.y / n, q.z / n};
  }
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quaternion rotmat_to_quat(const Mat3& r) {
  // Shepperd's method: pick the largest of the four squared components.
  const double tr = r.trace();
  Quaternion q;
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized().canonical();
}

CameraIntrinsics::CameraIntrinsics(int nu, int nv, double fx, double fy,
                                   double du_, double dv_)
    : n_u(nu), n_v(nv), f_x(fx), f_y(fy), du(du_), dv(dv_),
      c_x(0.5 * nu), c_y(0.5 * nv) {
  validate();
}

CameraIntrinsics::CameraIntrinsics(int nu, int nv, double fx, double fy,
                                   double du_, double dv_, double cx, double cy)
    : n_u(nu), n_v(nv), f_x(fx), f_y(fy), du(du_), dv(dv_), c_x(cx), c_y(cy) {
  validate();
}

void CameraIntrinsics::validate() const {
  if (n_u <= 0 || n_v <= 0) throw InvalidInputError("camera: image size must be positive");
  if (!(f_x > 0.0) || !(f_y > 0.0)) throw InvalidInputError("camera: focal length must be positive");
  if (!(du > 0.0) || !(dv > 0.0)) throw InvalidInputError("camera: pixel pitch must be positive");
  if (!std::isfinite(fpx()) || !std::isfinite(fpy()))
    throw InvalidInputError("camera: derived pixel focal length is not finite");
}

Mat3 CameraIntrinsics::pixel_matrix() const {
  Mat3 k = Mat3::Zero();
  k(0, 0) = fpx();
  k(1, 1) = fpy();
  k(0, 2) = c_x;
  k(1, 2) = c_y;
  k(2, 2) = 1.0;
  return k;
}

CameraIntrinsics CameraIntrinsics::prisma() {
  return CameraIntrinsics(752, 580, 0.0200, 0.0193, 8.6e-6, 8.3e-6);
}

int KeypointSet3D::spatial_rank(double tol) const {
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(kKeypointCount);
  Eigen::Matrix<double, kKeypointCount, 3> m;
  for (int i = 0; i < kKeypointCount; ++i)
    m.row(i) = (points[static_cast<std::size_t>(i)] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const double scale = svd.singularValues()(0);
  if (scale <= 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < 3; ++i)
    if (svd.singularValues()(i) > tol * scale) ++rank;
  return rank;
}

void KeypointSet3D::validate_noncoplanar() const {
  if (spatial_rank() < 3)
    throw DegenerateGeometryError("model keypoints are coplanar");
}

int KeypointSet2D::visible_count() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

bool KeypointSet2D::visible_within(const CameraIntrinsics& cam) const {
  for (int i = 0; i < kKeypointCount; ++i) {
    if (!visible[static_cast<std::size_t>(i)]) continue;
    const Vec2& p = points[static_cast<std::size_t>(i)];
    if (p.x() < 0.0 || p.x() >= cam.n_u || p.y() < 0.0 || p.y() >= cam.n_v)
      return false;
  }
  return true;
}

KeypointSet3D default_spacecraft_model() {
  KeypointSet3D m;
  // Bottom plate corners
  m[0] = {-0.40, -0.40, 0.00};
  m[1] = {0.40, -0.40, 0.00};
  m[2] = {0.40, 0.40, 0.00};
  m[3] = {-0.40, 0.40, 0.00};
  // Top plate (solar panel) corners
  m[4] = {-0.30, -0.30, 0.35};
  m[5] = {0.30, -0.30, 0.35};
  m[6] = {0.30, 0.30, 0.35};
  m[7] = {-0.30, 0.30, 0.35};
  // Antenna tips
  m[8] = {-0.55, 0.00, 0.62};
  m[9] = {0.00, 0.58, 0.70};
  m[10] = {0.52, -0.18, 0.66};
  return m;
}

std::span<const std::pair<int, int>> default_model_edges() {
  static constexpr std::array<std::pair<int, int>, 15> kEdges{{
      {0, 1}, {1, 2}, {2, 3}, {3, 0},          // bottom loop
      {4, 5}, {5, 6}, {6, 7}, {7, 4},          // top loop
      {0, 4}, {1, 5}, {2, 6}, {3, 7},          // pillars
      {7, 8}, {6, 9}, {5, 10},                 // antennae
  }};
  return kEdges;
}

Vec2 project_point(const CameraIntrinsics& cam, const Pose& pose, const Vec3& p,
                   int index_for_error) {
  const Vec3 pc = pose.apply(p);
  if (pc.z() <= 0.0)
    throw BehindCameraError("point behind camera (index " +
                                std::to_string(index_for_error) + ", z=" +
                                std::to_string(pc.z()) + ")",
                            index_for_error);
  return {cam.fpx() * pc.x() / pc.z() + cam.c_x,
          cam.fpy() * pc.y() / pc.z() + cam.c_y};
}

KeypointSet2D project(const CameraIntrinsics& cam, const Pose& pose,
                      const KeypointSet3D& pts) {
  KeypointSet2D out;
  for (int i = 0; i < kKeypointCount; ++i) {
    out[i] = project_point(cam, pose, pts[i], i);
    out.visible[static_cast<std::size_t>(i)] =
        out[i].x() >= 0.0 && out[i].x() < cam.n_u &&
        out[i].y() >= 0.0 && out[i].y() < cam.n_v;
  }
  return out;
}

Vec3 translation_error(const Vec3& t_pred, const Vec3& t_true) {
  return (t_pred - t_true).cwiseAbs();
}

double rotation_error(const Quaternion& q_pred, const Quaternion& q_true) {
  if (std::abs(q_pred.norm() - 1.0) > 1e-6 || std::abs(q_true.norm() - 1.0) > 1e-6)
    throw InvalidInputError("rotation_error: quaternions must be unit norm");
  const double d = std::clamp(std::abs(q_pred.dot(q_true)), -1.0, 1.0);
  return 2.0 * std::acos(d);
}

double pose_score(const Pose& pred, const Pose& truth) {
  const double tn = truth.t.norm();
  if (tn <= 0.0)
    throw InvalidInputError("pose_score: ground-truth translation has zero norm");
  return (pred.t - truth.t).norm() / tn + rotation_error(pred.q, truth.q);
}

double slab_esa_score(std::span<const std::pair<Pose, Pose>> samples) {
  if (samples.empty()) throw InvalidInputError("slab_esa_score: empty sample list");
  double sum = 0.0;
  for (const auto& [pred, truth] : samples) sum += pose_score(pred, truth);
  return sum / static_cast<double>(samples.size());
}

}  // namespace satpose
