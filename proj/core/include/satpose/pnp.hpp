#ifndef SATPOSE_PNP_HPP
#define SATPOSE_PNP_HPP

#include <vector>

#include "satpose/geometry.hpp"

namespace satpose {

/// Pose from 2D-3D keypoint correspondences with the EPnP algorithm:
/// four barycentric control points (three on near-planar input), a 12x12
/// M^T M eigen-decomposition, beta cases N = 1..3 with Gauss-Newton beta
/// refinement, and a closed-form absolute-orientation fit for the final
/// rotation and translation. Candidates placing the model centroid behind
/// the camera are rejected.
///
/// Only correspondences with visible == true participate. Throws
/// InsufficientCorrespondencesError (< 4 visible), DegenerateGeometryError
/// (collinear control-point basis), or NoValidPoseError (every candidate
/// fails the positive-depth check). The returned quaternion is canonical
/// (scalar component >= 0).
Pose solve_epnp(const CameraIntrinsics& cam, const KeypointSet3D& pts3d,
                const KeypointSet2D& pts2d);

/// Result of iterative pose polish.
struct RefineResult {
  Pose pose;
  /// RMS pixel reprojection residual before each accepted step and after
  /// the last; non-increasing by construction.
  std::vector<double> rms_history;
  /// False when no step improved on the initial pose.
  bool made_progress = false;
  int iterations = 0;
};

/// Gauss-Newton refinement of a pose over the visible correspondences,
/// minimizing pixel reprojection error. Steps that do not reduce the RMS
/// residual are rejected (with step halving); on a singular normal matrix
/// or no improvement the input pose is returned with made_progress == false.
RefineResult refine_gauss_newton(const CameraIntrinsics& cam,
                                 const KeypointSet3D& pts3d,
                                 const KeypointSet2D& pts2d, const Pose& init,
                                 int max_iterations = 20);

/// RMS pixel reprojection residual of a pose over visible correspondences.
double reprojection_rms(const CameraIntrinsics& cam, const KeypointSet3D& pts3d,
                        const KeypointSet2D& pts2d, const Pose& pose);

}  // namespace satpose

#endif  // SATPOSE_PNP_HPP
