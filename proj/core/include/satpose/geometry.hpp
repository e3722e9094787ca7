#ifndef SATPOSE_GEOMETRY_HPP
#define SATPOSE_GEOMETRY_HPP

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "satpose/errors.hpp"
#include "satpose/rng.hpp"

namespace satpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Number of model keypoints: four bottom-plate corners (0-3), four
/// top-plate corners (4-7), three antenna tips (8-10). The ordering is a
/// fixed contract shared by every 2D/3D keypoint container.
inline constexpr int kKeypointCount = 11;

/// Unit quaternion, scalar-first (w, x, y, z), Hamilton product convention.
/// Represents the passive rotation aligning the target body frame with the
/// camera frame: p_C = R(q) * p_B + t.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

  static Quaternion from_axis_angle(const Vec3& axis, double angle_rad);

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  /// Throws InvalidInputError on a (near-)zero quaternion.
  Quaternion normalized() const;

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  double dot(const Quaternion& o) const {
    return w * o.w + x * o.x + y * o.y + z * o.z;
  }

  /// Hamilton product.
  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }

  /// Sandwich product q * (0, v) * q^-1 for unit q.
  Vec3 rotate(const Vec3& v) const;

  /// Same rotation with scalar component >= 0, for stable serialization.
  Quaternion canonical() const {
    if (w < 0.0 || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0))))))
      return {-w, -x, -y, -z};
    return *this;
  }
};

/// Uniform random rotation via a normalized 4-component Gaussian draw.
Quaternion random_unit_quaternion(Rng& rng);

/// Rotation matrix of a unit quaternion. Inputs off unit norm by more than
/// 1e-6 are normalized internally; a zero quaternion is an error.
/// quat_to_rotmat(-q) == quat_to_rotmat(q).
Mat3 quat_to_rotmat(const Quaternion& q);

/// Quaternion of a rotation matrix (Shepperd's method), canonical sign.
Quaternion rotmat_to_quat(const Mat3& r);

/// Rigid transform from the target body frame B to the camera frame C.
/// t is the position of the B origin expressed in frame C (meters).
struct Pose {
  Quaternion q;
  Vec3 t = Vec3::Zero();

  Mat3 rotation() const { return quat_to_rotmat(q); }

  /// p_C = R * p_B + t
  Vec3 apply(const Vec3& p_body) const { return q.rotate(p_body) + t; }

  Pose inverse() const {
    const Quaternion qi = q.conjugate();
    return {qi, -qi.rotate(t)};
  }
};

/// Pinhole camera with physical focal lengths and pixel pitch.
/// Pixel focal lengths are fx/du and fy/dv; the principal point defaults to
/// the exact image center.
struct CameraIntrinsics {
  int n_u = 0;        ///< horizontal pixels
  int n_v = 0;        ///< vertical pixels
  double f_x = 0.0;   ///< horizontal focal length [m]
  double f_y = 0.0;   ///< vertical focal length [m]
  double du = 0.0;    ///< horizontal pixel pitch [m/px]
  double dv = 0.0;    ///< vertical pixel pitch [m/px]
  double c_x = 0.0;   ///< principal point [px]
  double c_y = 0.0;

  CameraIntrinsics() = default;
  CameraIntrinsics(int nu, int nv, double fx, double fy, double du_, double dv_);
  CameraIntrinsics(int nu, int nv, double fx, double fy, double du_, double dv_,
                   double cx, double cy);

  double fpx() const { return f_x / du; }
  double fpy() const { return f_y / dv; }

  /// Intrinsic matrix in pixel units.
  Mat3 pixel_matrix() const;

  /// The PRISMA mission rendezvous camera.
  static CameraIntrinsics prisma();

private:
  void validate() const;
};

/// Ordered 3D model keypoints in the body frame (meters).
struct KeypointSet3D {
  std::array<Vec3, kKeypointCount> points{};

  const Vec3& operator[](int i) const { return points[static_cast<std::size_t>(i)]; }
  Vec3& operator[](int i) { return points[static_cast<std::size_t>(i)]; }

  /// Rank of the centered point matrix; 3 means full spatial extent.
  int spatial_rank(double tol = 1e-9) const;

  /// Throws DegenerateGeometryError when the points are coplanar.
  void validate_noncoplanar() const;
};

/// Ordered 2D keypoints in image pixels with per-point visibility.
struct KeypointSet2D {
  std::array<Vec2, kKeypointCount> points{};
  std::array<bool, kKeypointCount> visible{};

  KeypointSet2D() { visible.fill(true); }

  const Vec2& operator[](int i) const { return points[static_cast<std::size_t>(i)]; }
  Vec2& operator[](int i) { return points[static_cast<std::size_t>(i)]; }

  int visible_count() const;

  /// True when every visible point lies inside [0, n_u) x [0, n_v).
  bool visible_within(const CameraIntrinsics& cam) const;
};

/// Built-in 11-point spacecraft wireframe model used by the dataset
/// generator and the demos. Deliberately asymmetric so that pose recovery
/// has no ambiguity.
KeypointSet3D default_spacecraft_model();

/// Wireframe edges of the default model as keypoint index pairs.
std::span<const std::pair<int, int>> default_model_edges();

/// Projects body-frame points through a pose into pixel coordinates.
/// Throws BehindCameraError (with the offending index) when any point has
/// non-positive depth in the camera frame. Points falling outside the image
/// bounds are marked not visible; projection coordinates are still filled.
KeypointSet2D project(const CameraIntrinsics& cam, const Pose& pose,
                      const KeypointSet3D& pts);

/// Projects a single body-frame point; throws BehindCameraError on z <= 0.
Vec2 project_point(const CameraIntrinsics& cam, const Pose& pose, const Vec3& p,
                   int index_for_error = -1);

// ---------------------------------------------------------------------------
// Evaluation metrics
// ---------------------------------------------------------------------------

/// Componentwise absolute translation error |t_pred - t_true| [m].
Vec3 translation_error(const Vec3& t_pred, const Vec3& t_true);

/// Attitude error 2*acos(|<q_pred, q_true>|) in radians, in [0, pi].
/// Invariant to a sign flip of either quaternion. Inputs must be unit norm
/// within 1e-6.
double rotation_error(const Quaternion& q_pred, const Quaternion& q_true);

/// One term of the challenge score: ||t_pred - t_true|| / ||t_true|| plus the
/// rotation error in radians.
double pose_score(const Pose& pred, const Pose& truth);

/// Mean of pose_score over all (predicted, ground-truth) pairs. Empty input
/// or a zero-norm ground-truth translation is an error.
double slab_esa_score(std::span<const std::pair<Pose, Pose>> samples);

}  // namespace satpose

#endif  // SATPOSE_GEOMETRY_HPP
