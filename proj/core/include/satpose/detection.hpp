#ifndef SATPOSE_DETECTION_HPP
#define SATPOSE_DETECTION_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "satpose/geometry.hpp"

namespace satpose {

/// Axis-aligned box, center/size form, pixels.
struct BoundingBox {
  double x = 0.0;  ///< center
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return x - 0.5 * w; }
  double right() const { return x + 0.5 * w; }
  double top() const { return y - 0.5 * h; }
  double bottom() const { return y + 0.5 * h; }
  double area() const { return w * h; }

  static BoundingBox from_corners(double x0, double y0, double x1, double y1) {
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
  }
};

/// Prior box size, pixels.
struct Anchor {
  double p_w = 0.0;
  double p_h = 0.0;
};

inline constexpr int kAnchorsPerStage = 3;
inline constexpr int kLogitsPerAnchor = 5;  // t0, tx, ty, tw, th

/// Raw per-cell, per-anchor logits of one prediction stage on an N x N grid.
/// Layout: row-major over cells, anchor innermost, 5 channels per anchor.
class GridPrediction {
public:
  GridPrediction(int grid_size, std::vector<double> logits);

  /// All-zero logits.
  explicit GridPrediction(int grid_size);

  int grid_size() const { return n_; }

  double& at(int row, int col, int anchor, int channel) {
    return data_[offset(row, col, anchor, channel)];
  }
  double at(int row, int col, int anchor, int channel) const {
    return data_[offset(row, col, anchor, channel)];
  }

  std::span<const double> raw() const { return data_; }
  std::span<double> raw() { return data_; }

private:
  std::size_t offset(int row, int col, int anchor, int channel) const;
  int n_;
  std::vector<double> data_;
};

/// IoU of two boxes in [0, 1]. Degenerate (zero-area) boxes give 0.
double iou(const BoundingBox& a, const BoundingBox& b);

/// GIoU loss 1 - GIoU with the analytic gradient with respect to the
/// prediction's (x, y, w, h). The gradient is exact away from the
/// measure-zero configurations where box edges coincide.
struct GiouResult {
  double loss = 0.0;
  double giou = 0.0;
  double iou = 0.0;
  std::array<double, 4> grad{};  ///< d(loss)/d(x, y, w, h) of pred
};
GiouResult giou_loss(const BoundingBox& pred, const BoundingBox& truth);

/// One decoded grid cell/anchor.
struct DecodedBox {
  double objectness = 0.0;  ///< p(c) = sigmoid(t0)
  BoundingBox box;          ///< image pixels
  int row = 0;
  int col = 0;
  int anchor = 0;
};

/// Decodes a stage's raw logits: p = sigmoid(t0), center = (sigmoid(t_xy) +
/// cell origin) * stride, size = anchor * exp(t_wh). `anchors` must hold
/// exactly 3 entries for the stage.
std::vector<DecodedBox> decode(const GridPrediction& pred,
                               std::span<const Anchor> anchors,
                               double image_size);

/// Inverse of decode for one cell/anchor. The box center must lie strictly
/// inside the cell and the size must be positive.
std::array<double, kLogitsPerAnchor> encode(const BoundingBox& box,
                                            double objectness,
                                            const Anchor& anchor, int grid_size,
                                            double image_size, int row, int col);

/// Highest-objectness detection across stages. Ties break lexicographically
/// by (stage, row, col, anchor), stages in the order given.
struct Detection {
  int stage = 0;  ///< index into the decoded-stage list
  DecodedBox best;
};
Detection select_best(std::span<const std::vector<DecodedBox>> stages);

/// Grid layout shared by target assignment and the detection loss.
/// `anchors` are stage-major: entry stage*3+a belongs to sizes[stage].
struct GridConfig {
  std::vector<int> sizes{13, 26, 52};
  double image_size = 416.0;

  double stride(int stage) const { return image_size / sizes[static_cast<std::size_t>(stage)]; }
};

/// Ground-truth objectness: exactly one (stage, cell, anchor) is 1 — the
/// anchor with the best IoU against the truth box at a shared center, at the
/// cell containing the truth center in that anchor's stage.
struct ObjectnessTarget {
  int stage = 0;
  int row = 0;
  int col = 0;
  int anchor = 0;  ///< within the stage, 0..2
  /// Per stage, same layout as GridPrediction with one channel (N*N*3).
  std::vector<std::vector<double>> stage_tensors;

  double sum() const;
};
ObjectnessTarget assign_targets(const BoundingBox& truth,
                                std::span<const Anchor> anchors,
                                const GridConfig& grid);

/// Combined detection loss: lambda_giou * GIoU loss of the decoded box at
/// the assigned location plus lambda_conf * binary cross-entropy of every
/// objectness logit against the one-hot target.
struct DetectionLossWeights {
  double lambda_giou = 1.0;
  double lambda_conf = 1.0;
};
double detection_loss(std::span<const GridPrediction> preds,
                      std::span<const Anchor> anchors, const GridConfig& grid,
                      const BoundingBox& truth,
                      const DetectionLossWeights& weights = {});

/// K-means clustering of box sizes under the distance 1 - IoU at a shared
/// center, centroid update = per-cluster mean of (w, h). Iterates until the
/// assignment is stable or the objective stops decreasing; the returned
/// objective log is therefore non-increasing. Deterministic per seed.
struct KmeansResult {
  std::vector<Anchor> anchors;           ///< sorted by area ascending
  std::vector<double> objective_history; ///< mean 1 - IoU after each iteration
};
KmeansResult kmeans_anchors(std::span<const BoundingBox> boxes, int k,
                            std::uint64_t seed, int max_iterations = 100);

/// Splits 9 anchors across 3 stages: largest areas to the coarsest grid.
/// Output is stage-major for GridConfig{13, 26, 52}, descending area within
/// each stage.
std::vector<Anchor> allocate_anchors_to_stages(std::span<const Anchor> anchors9);

// --- serialization ----------------------------------------------------------

/// Anchors as a JSON array of {p_w, p_h}.
void write_anchors_json(const std::string& path, std::span<const Anchor> anchors);
std::vector<Anchor> read_anchors_json(const std::string& path);

/// Raw prediction tensors: one file, first line a JSON header
/// {"dtype":"f64"|"f32","image_size":416,"stages":[13,26,52],
///  "anchors_per_stage":3,"channels":5}, then the flat little-endian values,
/// stage-major, row-major over cells, anchor innermost.
void write_prediction_tensors(const std::string& path,
                              std::span<const GridPrediction> preds,
                              double image_size);
struct PredictionTensors {
  std::vector<GridPrediction> stages;
  double image_size = 416.0;
};
PredictionTensors read_prediction_tensors(const std::string& path);

}  // namespace satpose

#endif  // SATPOSE_DETECTION_HPP
