#ifndef SATPOSE_KEYPOINT_RECOVERY_HPP
#define SATPOSE_KEYPOINT_RECOVERY_HPP

#include <span>
#include <string>
#include <vector>

#include "satpose/geometry.hpp"

namespace satpose {

/// One manually picked 2D keypoint in one image.
struct Pick {
  int index = 0;  ///< keypoint index in [0, 10]
  Vec2 uv = Vec2::Zero();
};

/// One training image: its known pose and the picks visible in it.
struct Observation {
  int image_id = 0;
  Pose pose;
  std::vector<Pick> picks;
};

/// Result of the multi-view 3D keypoint recovery.
struct RecoverySolution {
  KeypointSet3D points3d;
  /// Projective scale per (observation, pick), in observation order. For a
  /// pinhole model the scale equals the point's camera-frame depth, so it is
  /// strictly positive for points in front of the camera.
  std::vector<std::vector<double>> scales;
  /// Root-mean-square pixel reprojection residual over all picks.
  double residual_px = 0.0;
};

/// Recovers the 3D model coordinates of all keypoints from 2D picks across
/// posed images by minimizing, per keypoint, the homogeneous reprojection
/// residual || s_j * p2d_h - K [R_j | t_j] p3d_h ||_2 jointly over the 3D
/// point and the per-view scales. With the homogeneous coordinate of p3d
/// fixed to 1, the problem is linear and is solved by minimum-norm
/// orthogonal factorization, independently per keypoint.
///
/// Every keypoint index must be picked in at least two observations with
/// distinct poses; violations raise UnobservablePointError (naming the
/// index) or DegenerateGeometryError.
RecoverySolution recover_keypoints(const CameraIntrinsics& cam,
                                   std::span<const Observation> observations);

/// Mean pixel reprojection error of recovered vs. true keypoints, binned by
/// relative distance ||t||.
struct ReprojectionBin {
  double range_lo = 0.0;   ///< [m]
  double range_hi = 0.0;   ///< [m]
  int point_count = 0;
  double mean_error_px = 0.0;
};

struct ReprojectionReport {
  std::vector<ReprojectionBin> bins;
  std::string to_csv() const;
};

/// Projects both the recovered and the true keypoints through each pose and
/// reports the mean pixel distance per relative-range bin.
ReprojectionReport reprojection_report(const CameraIntrinsics& cam,
                                       const RecoverySolution& solution,
                                       const KeypointSet3D& truth,
                                       std::span<const Pose> poses,
                                       int num_bins = 8);

/// Reads observations from a picks file: a JSON array of
/// {image_id, pose:{q:[4],t:[3]}, picks:[{index,u,v}]}.
std::vector<Observation> read_picks_file(const std::string& path);
void write_picks_file(const std::string& path, std::span<const Observation> obs);

}  // namespace satpose

#endif  // SATPOSE_KEYPOINT_RECOVERY_HPP
