#ifndef SATPOSE_AUGMENT_HPP
#define SATPOSE_AUGMENT_HPP

#include <optional>
#include <string>

#include "satpose/detection.hpp"
#include "satpose/geometry.hpp"
#include "satpose/image.hpp"
#include "satpose/rng.hpp"

namespace satpose {

/// Rectangle-erasing parameters. The area fraction and aspect ratio ranges
/// follow the common random-erasing defaults; the fill value is 0 to mimic
/// shadowing on grayscale imagery.
struct EraseParams {
  double probability = 0.5;
  double area_lo = 0.02;
  double area_hi = 0.33;
  double aspect_lo = 0.3;
  double aspect_hi = 3.3;
};

/// Sampling ranges for the augmentation pipeline. Matches the training
/// distribution table: brightness U(-25, 25), contrast U(0.5, 2.0), noise
/// N(0, 25) (10 for texture-randomized runs), RoI enlargement U(0, 50)%,
/// RoI shift U(-10, 10)%. Photometric transforms and the flip/rotation
/// group each apply with `apply_probability`.
struct AugmentConfig {
  double brightness_lo = -25.0;
  double brightness_hi = 25.0;
  double contrast_lo = 0.5;
  double contrast_hi = 2.0;
  double noise_stddev = 25.0;
  double roi_enlarge_lo_pct = 0.0;
  double roi_enlarge_hi_pct = 50.0;
  double roi_shift_lo_pct = -10.0;
  double roi_shift_hi_pct = 10.0;
  double apply_probability = 0.5;
  EraseParams erase;

  void validate() const;
};

/// Reads an AugmentConfig from a JSON file with the table field names:
/// {"brightness":[lo,hi],"contrast":[lo,hi],"gaussian_noise_stddev":s,
///  "roi_enlargement_pct":[lo,hi],"roi_shift_pct":[lo,hi],
///  "apply_probability":p,"erase":{...}}. Missing fields keep defaults.
AugmentConfig load_augment_config(const std::string& path);
void save_augment_config(const std::string& path, const AugmentConfig& config);

/// p' = clamp(round(alpha * p + beta + n), 0, 255) with n ~ N(0, sigma),
/// rounding half away from zero. Dimensions are preserved.
ImageU8 photometric(const ImageU8& img, double alpha, double beta,
                    double noise_stddev, Rng& rng);

/// Axis-aligned geometric ops. Rotations are counter-clockwise.
enum class GeomOp { hflip, vflip, rot90, rot180, rot270 };

GeomOp inverse_op(GeomOp op);

/// Transforms image pixels; rot90/rot270 swap the output dimensions.
ImageU8 transform_image(const ImageU8& img, GeomOp op);

/// Maps a continuous pixel-center coordinate through `op` for an image of
/// the given original size. hflip sends u to (width - 1) - u.
Vec2 transform_point(const Vec2& pt, GeomOp op, int width, int height);

/// Keypoints and box transformed consistently with transform_image; the box
/// is recomputed from its transformed corners.
struct Labels {
  KeypointSet2D keypoints;
  BoundingBox bbox;
};
Labels transform_labels(const Labels& labels, GeomOp op, int width, int height);

/// Square crop region in continuous image coordinates.
struct CropRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double side = 0.0;
};

/// Square RoI around a detection: side = max(w, h) grown by `enlarge_pct`,
/// shifted by the given percentages of the enlarged side, then shifted
/// inward (never truncated) to stay inside the image. If the square cannot
/// fit, the side shrinks to the smaller image dimension.
CropRect roi_policy(const BoundingBox& bbox, int image_w, int image_h,
                    double enlarge_pct, double shift_x_pct, double shift_y_pct);

/// Test-time policy: fixed 20% enlargement, no shift.
CropRect roi_test_policy(const BoundingBox& bbox, int image_w, int image_h);

/// Affine map between original-image and crop coordinates, where the crop
/// is resampled to out_size x out_size. Exact bijection.
Vec2 image_to_crop(const Vec2& pt, const CropRect& crop, double out_size);
Vec2 crop_to_image(const Vec2& pt, const CropRect& crop, double out_size);

/// With probability `params.probability`, fills a random rectangle with 0.
ImageU8 random_erase(const ImageU8& img, const EraseParams& params, Rng& rng);

/// One sampled augmentation: which transforms fire and with what values.
/// Applying a recorded plan is deterministic, and the geometric part can be
/// inverted exactly on labels.
struct AugmentPlan {
  bool apply_brightness = false;
  double brightness = 0.0;
  bool apply_contrast = false;
  double contrast = 1.0;
  bool apply_noise = false;
  bool apply_flip = false;
  GeomOp flip = GeomOp::hflip;
  bool apply_rotation = false;
  GeomOp rotation = GeomOp::rot90;
  double roi_enlarge_pct = 0.0;
  double roi_shift_x_pct = 0.0;
  double roi_shift_y_pct = 0.0;
  bool apply_erase = false;
};

AugmentPlan sample_plan(const AugmentConfig& config, Rng& rng);

/// Applies the plan's photometric and geometric parts to an image and its
/// labels. Erasing runs only when the plan requests it.
struct AugmentedSample {
  ImageU8 image;
  Labels labels;
};
AugmentedSample apply_plan(const ImageU8& img, const Labels& labels,
                           const AugmentPlan& plan, const AugmentConfig& config,
                           Rng& rng);

/// Undoes the plan's geometric ops on labels (photometric parts have no
/// label effect). `width`/`height` are the ORIGINAL image dimensions.
Labels invert_plan_on_labels(const Labels& labels, const AugmentPlan& plan,
                             int width, int height);

}  // namespace satpose

#endif  // SATPOSE_AUGMENT_HPP
