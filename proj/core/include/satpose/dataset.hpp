#ifndef SATPOSE_DATASET_HPP
#define SATPOSE_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "satpose/detection.hpp"
#include "satpose/geometry.hpp"
#include "satpose/image.hpp"
#include "satpose/stylemix.hpp"

namespace satpose {

/// One labeled sample: pose plus the labels derived from it. The bounding
/// box is always the min/max envelope of the projected keypoints, and the
/// keypoints re-project exactly from the pose for generated data.
struct DatasetSample {
  std::int64_t id = 0;
  Pose pose;
  KeypointSet2D keypoints;
  BoundingBox bbox;
  SampleSource source = SampleSource::synthetic;
  std::string camera_id = "prisma";
};

/// Envelope of the projected keypoints (all of them, visible or not).
BoundingBox keypoint_envelope(const KeypointSet2D& kps);

/// Pose sampling ranges for the generator. Attitude is uniform over
/// rotations; range is uniform in [range_min, range_max]; the target center
/// direction is uniform within the central `offcenter_frac` of the image.
struct PoseDistribution {
  double range_min_m = 3.0;
  double range_max_m = 30.0;
  double offcenter_frac = 0.5;
  /// Poses with fewer visible keypoints are resampled.
  int min_visible_keypoints = 4;
};

struct GeneratedDataset {
  std::vector<DatasetSample> samples;
  /// Poses rejected (behind camera or too few visible points) and redrawn.
  int resample_count = 0;
};

/// Generates n samples with labels derived by projection; deterministic per
/// seed. Throws on n < 1 or a coplanar model.
GeneratedDataset generate_dataset(int n, const CameraIntrinsics& camera,
                                  const KeypointSet3D& model,
                                  const PoseDistribution& dist,
                                  std::uint64_t seed);

// --- label file I/O ---------------------------------------------------------

/// Labels are JSON lines. The first line is a header
/// {"schema":"satpose.labels/1","camera":{...},"model_points":[[x,y,z]*11]},
/// each following line one sample:
/// {"id":..,"source":"synthetic"|"texture_randomized","q":[w,x,y,z],
///  "t":[x,y,z],"keypoints":[[u,v]*11],"visible":[...],
///  "bbox":{"x":..,"y":..,"w":..,"h":..},"camera_id":".."}
struct LabelFile {
  CameraIntrinsics camera;
  KeypointSet3D model;
  std::vector<DatasetSample> samples;
};

void write_labels(const std::string& path, const LabelFile& labels);
LabelFile read_labels(const std::string& path);

/// Camera intrinsics as a standalone JSON object (the same schema embedded
/// in the label-file header). c_x/c_y are optional and default to center.
CameraIntrinsics camera_from_json_file(const std::string& path);
void camera_to_json_file(const std::string& path, const CameraIntrinsics& cam);

/// Model points as JSON {"points":[[x,y,z]*11]}.
KeypointSet3D model_from_json_file(const std::string& path);
void model_to_json_file(const std::string& path, const KeypointSet3D& model);

// --- procedural rendering ---------------------------------------------------

/// Stand-in grayscale render of a sample: the wireframe model projected and
/// drawn with anti-alias-free lines and keypoint splats, plus the matching
/// foreground bitmask. Purely deterministic.
struct RenderedSample {
  ImageU8 image;
  ImageU8 mask;
};
RenderedSample render_sample(const CameraIntrinsics& camera,
                             const KeypointSet3D& model, const Pose& pose);

}  // namespace satpose

#endif  // SATPOSE_DATASET_HPP
