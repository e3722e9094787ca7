#include "satpose/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "satpose/rng.hpp"

namespace satpose {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

/// Binary cross-entropy from the raw logit, numerically stable.
double bce_from_logit(double t, double target) {
  return std::max(t, 0.0) - t * target + std::log1p(std::exp(-std::abs(t)));
}

}  // namespace

GridPrediction::GridPrediction(int grid_size, std::vector<double> logits)
    : n_(grid_size), data_(std::move(logits)) {
  if (n_ < 1) throw InvalidInputError("GridPrediction: grid size must be >= 1");
  const std::size_t expected = static_cast<std::size_t>(n_) * n_ *
                               kAnchorsPerStage * kLogitsPerAnchor;
  if (data_.size() != expected)
    throw ShapeError("GridPrediction: expected " + std::to_string(expected) +
                     " logits, got " + std::to_string(data_.size()));
  for (double v : data_)
    if (!std::isfinite(v))
      throw InvalidInputError("GridPrediction: non-finite logit");
}

GridPrediction::GridPrediction(int grid_size)
    : GridPrediction(grid_size,
                     std::vector<double>(static_cast<std::size_t>(grid_size) *
                                             grid_size * kAnchorsPerStage *
                                             kLogitsPerAnchor,
                                         0.0)) {}

std::size_t GridPrediction::offset(int row, int col, int anchor,
                                   int channel) const {
  return ((static_cast<std::size_t>(row) * n_ + col) * kAnchorsPerStage +
          anchor) *
             kLogitsPerAnchor +
         channel;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double i = iw * ih;
  const double u = a.area() + b.area() - i;
  if (u <= 0.0) return 0.0;
  return i / u;
}

GiouResult giou_loss(const BoundingBox& pred, const BoundingBox& truth) {
  if (truth.area() <= 0.0)
    throw InvalidInputError("giou_loss: truth box must have positive area");

  const double l = pred.left(), r = pred.right(), t = pred.top(), b = pred.bottom();
  const double lt = truth.left(), rt = truth.right(), tt = truth.top(),
               bt = truth.bottom();

  const double iw = std::min(r, rt) - std::max(l, lt);
  const double ih = std::min(b, bt) - std::max(t, tt);
  const bool overlap = iw > 0.0 && ih > 0.0;
  const double inter = overlap ? iw * ih : 0.0;
  const double uni = pred.area() + truth.area() - inter;
  const double cw = std::max(r, rt) - std::min(l, lt);
  const double ch = std::max(b, bt) - std::min(t, tt);
  const double ac = cw * ch;

  GiouResult out;
  out.iou = inter / uni;
  out.giou = out.iou - (ac - uni) / ac;
  out.loss = 1.0 - out.giou;

  // Gradients over the prediction's corner variables (l, r, t, b), then
  // chained to (x, y, w, h). Ties between corresponding edges sit on the
  // subgradient boundary; the one-sided choice below matches the convention
  // of treating the prediction as the moving box.
  const double dap[4] = {-pred.h, pred.h, -pred.w, pred.w};

  double di[4] = {0, 0, 0, 0};
  if (overlap) {
    const double diw_dl = (l > lt) ? -1.0 : 0.0;
    const double diw_dr = (r < rt) ? 1.0 : 0.0;
    const double dih_dt = (t > tt) ? -1.0 : 0.0;
    const double dih_db = (b < bt) ? 1.0 : 0.0;
    di[0] = ih * diw_dl;
    di[1] = ih * diw_dr;
    di[2] = iw * dih_dt;
    di[3] = iw * dih_db;
  }

  const double dcw_dl = (l < lt) ? -1.0 : 0.0;
  const double dcw_dr = (r > rt) ? 1.0 : 0.0;
  const double dch_dt = (t < tt) ? -1.0 : 0.0;
  const double dch_db = (b > bt) ? 1.0 : 0.0;
  const double dac[4] = {ch * dcw_dl, ch * dcw_dr, cw * dch_dt, cw * dch_db};

  // loss = 2 - I/U - U/Ac
  double dloss_corner[4];
  for (int c = 0; c < 4; ++c) {
    const double dun = dap[c] - di[c];
    const double d_iou = (di[c] * uni - inter * dun) / (uni * uni);
    const double d_uac = (dun * ac - uni * dac[c]) / (ac * ac);
    dloss_corner[c] = -d_iou - d_uac;
  }

  // (l, r, t, b) -> (x, y, w, h)
  out.grad[0] = dloss_corner[0] + dloss_corner[1];
  out.grad[1] = dloss_corner[2] + dloss_corner[3];
  out.grad[2] = 0.5 * (dloss_corner[1] - dloss_corner[0]);
  out.grad[3] = 0.5 * (dloss_corner[3] - dloss_corner[2]);
  return out;
}

std::vector<DecodedBox> decode(const GridPrediction& pred,
                               std::span<const Anchor> anchors,
                               double image_size) {
  if (anchors.size() != kAnchorsPerStage)
    throw ConfigError("decode: expected " + std::to_string(kAnchorsPerStage) +
                      " anchors per stage, got " + std::to_string(anchors.size()));
  const int n = pred.grid_size();
  const double stride = image_size / n;
  std::vector<DecodedBox> out;
  out.reserve(static_cast<std::size_t>(n) * n * kAnchorsPerStage);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col)
      for (int a = 0; a < kAnchorsPerStage; ++a) {
        DecodedBox d;
        d.row = row;
        d.col = col;
        d.anchor = a;
        d.objectness = sigmoid(pred.at(row, col, a, 0));
        d.box.x = (sigmoid(pred.at(row, col, a, 1)) + col) * stride;
        d.box.y = (sigmoid(pred.at(row, col, a, 2)) + row) * stride;
        d.box.w = anchors[static_cast<std::size_t>(a)].p_w * std::exp(pred.at(row, col, a, 3));
        d.box.h = anchors[static_cast<std::size_t>(a)].p_h * std::exp(pred.at(row, col, a, 4));
        out.push_back(d);
      }
  return out;
}

std::array<double, kLogitsPerAnchor> encode(const BoundingBox& box,
                                            double objectness,
                                            const Anchor& anchor, int grid_size,
                                            double image_size, int row, int col) {
  const double stride = image_size / grid_size;
  const double fx = box.x / stride - col;
  const double fy = box.y / stride - row;
  if (fx <= 0.0 || fx >= 1.0 || fy <= 0.0 || fy >= 1.0)
    throw InvalidInputError("encode: box center not strictly inside cell");
  if (box.w <= 0.0 || box.h <= 0.0)
    throw InvalidInputError("encode: box size must be positive");
  if (objectness <= 0.0 || objectness >= 1.0)
    throw InvalidInputError("encode: objectness must be in (0, 1)");
  return {logit(objectness), logit(fx), logit(fy), std::log(box.w / anchor.p_w),
          std::log(box.h / anchor.p_h)};
}

Detection select_best(std::span<const std::vector<DecodedBox>> stages) {
  if (stages.empty()) throw InvalidInputError("select_best: no stages");
  Detection best;
  bool first = true;
  for (int s = 0; s < static_cast<int>(stages.size()); ++s) {
    for (const auto& d : stages[static_cast<std::size_t>(s)]) {
      // Decoded boxes arrive in (row, col, anchor) order, so a strict
      // comparison yields the lexicographic tie-break.
      if (first || d.objectness > best.best.objectness) {
        best.stage = s;
        best.best = d;
        first = false;
      }
    }
  }
  if (first) throw InvalidInputError("select_best: stages are all empty");
  return best;
}

double ObjectnessTarget::sum() const {
  double s = 0.0;
  for (const auto& t : stage_tensors) s = std::accumulate(t.begin(), t.end(), s);
  return s;
}

ObjectnessTarget assign_targets(const BoundingBox& truth,
                                std::span<const Anchor> anchors,
                                const GridConfig& grid) {
  const std::size_t expected = grid.sizes.size() * kAnchorsPerStage;
  if (anchors.size() != expected)
    throw ConfigError("assign_targets: expected " + std::to_string(expected) +
                      " anchors, got " + std::to_string(anchors.size()));
  if (truth.x < 0.0 || truth.x >= grid.image_size || truth.y < 0.0 ||
      truth.y >= grid.image_size)
    throw InvalidInputError("assign_targets: truth center outside image");

  // Best anchor by IoU with the truth at a shared center.
  int best_index = 0;
  double best_iou = -1.0;
  for (int i = 0; i < static_cast<int>(anchors.size()); ++i) {
    const BoundingBox anchor_box{truth.x, truth.y,
                                 anchors[static_cast<std::size_t>(i)].p_w,
                                 anchors[static_cast<std::size_t>(i)].p_h};
    const double v = iou(anchor_box, truth);
    if (v > best_iou) {
      best_iou = v;
      best_index = i;
    }
  }

  ObjectnessTarget target;
  target.stage = best_index / kAnchorsPerStage;
  target.anchor = best_index % kAnchorsPerStage;
  const int n = grid.sizes[static_cast<std::size_t>(target.stage)];
  const double stride = grid.stride(target.stage);
  target.col = std::min(n - 1, static_cast<int>(truth.x / stride));
  target.row = std::min(n - 1, static_cast<int>(truth.y / stride));

  for (int s = 0; s < static_cast<int>(grid.sizes.size()); ++s) {
    const int ns = grid.sizes[static_cast<std::size_t>(s)];
    target.stage_tensors.emplace_back(
        static_cast<std::size_t>(ns) * ns * kAnchorsPerStage, 0.0);
  }
  auto& tensor = target.stage_tensors[static_cast<std::size_t>(target.stage)];
  tensor[(static_cast<std::size_t>(target.row) * n + target.col) *
             kAnchorsPerStage +
         target.anchor] = 1.0;
  return target;
}

double detection_loss(std::span<const GridPrediction> preds,
                      std::span<const Anchor> anchors, const GridConfig& grid,
                      const BoundingBox& truth,
                      const DetectionLossWeights& weights) {
  if (preds.size() != grid.sizes.size())
    throw ConfigError("detection_loss: stage count mismatch");
  for (std::size_t s = 0; s < preds.size(); ++s)
    if (preds[s].grid_size() != grid.sizes[s])
      throw ConfigError("detection_loss: stage " + std::to_string(s) +
                        " grid size mismatch");
  if (weights.lambda_giou < 0.0 || weights.lambda_conf < 0.0)
    throw InvalidInputError("detection_loss: weights must be nonnegative");

  const ObjectnessTarget target = assign_targets(truth, anchors, grid);

  // Confidence: BCE of every logit against the one-hot target.
  double conf = 0.0;
  for (int s = 0; s < static_cast<int>(preds.size()); ++s) {
    const auto& pred = preds[static_cast<std::size_t>(s)];
    const int n = pred.grid_size();
    for (int row = 0; row < n; ++row)
      for (int col = 0; col < n; ++col)
        for (int a = 0; a < kAnchorsPerStage; ++a) {
          const double y = (s == target.stage && row == target.row &&
                            col == target.col && a == target.anchor)
                               ? 1.0
                               : 0.0;
          conf += bce_from_logit(pred.at(row, col, a, 0), y);
        }
  }

  // Box regression at the assigned location only.
  const auto& pred = preds[static_cast<std::size_t>(target.stage)];
  const double stride = grid.stride(target.stage);
  const Anchor& anchor =
      anchors[static_cast<std::size_t>(target.stage * kAnchorsPerStage + target.anchor)];
  BoundingBox decoded;
  decoded.x = (sigmoid(pred.at(target.row, target.col, target.anchor, 1)) + target.col) * stride;
  decoded.y = (sigmoid(pred.at(target.row, target.col, target.anchor, 2)) + target.row) * stride;
  decoded.w = anchor.p_w * std::exp(pred.at(target.row, target.col, target.anchor, 3));
  decoded.h = anchor.p_h * std::exp(pred.at(target.row, target.col, target.anchor, 4));

  return weights.lambda_giou * giou_loss(decoded, truth).loss +
         weights.lambda_conf * conf;
}

namespace {

double cluster_distance(const BoundingBox& box, const Anchor& anchor) {
  return 1.0 - iou(BoundingBox{box.x, box.y, anchor.p_w, anchor.p_h}, box);
}

std::vector<int> assign_clusters(std::span<const BoundingBox> boxes,
                                 const std::vector<Anchor>& centroids) {
  std::vector<int> assign(boxes.size(), 0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double best = cluster_distance(boxes[i], centroids[0]);
    for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
      const double d = cluster_distance(boxes[i], centroids[static_cast<std::size_t>(c)]);
      if (d < best) {
        best = d;
        assign[i] = c;
      }
    }
  }
  return assign;
}

double cluster_objective(std::span<const BoundingBox> boxes,
                         const std::vector<int>& assign,
                         const std::vector<Anchor>& centroids) {
  double sum = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    sum += cluster_distance(boxes[i], centroids[static_cast<std::size_t>(assign[i])]);
  return sum / static_cast<double>(boxes.size());
}

}  // namespace

KmeansResult kmeans_anchors(std::span<const BoundingBox> boxes, int k,
                            std::uint64_t seed, int max_iterations) {
  if (k < 1) throw InvalidInputError("kmeans_anchors: k must be >= 1");
  if (static_cast<int>(boxes.size()) < k)
    throw InvalidInputError("kmeans_anchors: " + std::to_string(boxes.size()) +
                            " boxes for k=" + std::to_string(k));
  for (const auto& b : boxes)
    if (b.w <= 0.0 || b.h <= 0.0)
      throw InvalidInputError("kmeans_anchors: boxes must have positive size");

  // Distinct (w, h) values in first-seen order, for seeding.
  std::vector<Anchor> unique_sizes;
  for (const auto& b : boxes) {
    bool seen = false;
    for (const auto& u : unique_sizes)
      if (u.p_w == b.w && u.p_h == b.h) {
        seen = true;
        break;
      }
    if (!seen) unique_sizes.push_back({b.w, b.h});
  }
  if (static_cast<int>(unique_sizes.size()) < k)
    throw InvalidInputError("kmeans_anchors: fewer than k distinct box sizes");

  // k-means++ seeding over the distinct sizes.
  Rng rng(seed);
  std::vector<Anchor> centroids;
  centroids.push_back(unique_sizes[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(unique_sizes.size()) - 1))]);
  while (static_cast<int>(centroids.size()) < k) {
    std::vector<double> d2(unique_sizes.size());
    double total = 0.0;
    for (std::size_t i = 0; i < unique_sizes.size(); ++i) {
      double best = 2.0;
      const BoundingBox as_box{0.0, 0.0, unique_sizes[i].p_w, unique_sizes[i].p_h};
      for (const auto& c : centroids)
        best = std::min(best, cluster_distance(as_box, c));
      d2[i] = best * best;
      total += d2[i];
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = unique_sizes.size() - 1;
    for (std::size_t i = 0; i < unique_sizes.size(); ++i) {
      pick -= d2[i];
      if (pick <= 0.0) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(unique_sizes[chosen]);
  }

  std::vector<int> assign = assign_clusters(boxes, centroids);
  double objective = cluster_objective(boxes, assign, centroids);

  KmeansResult result;
  result.objective_history.push_back(objective);

  for (int it = 0; it < max_iterations; ++it) {
    // Centroid update: per-cluster mean of (w, h).
    std::vector<Anchor> updated(static_cast<std::size_t>(k), Anchor{0.0, 0.0});
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      auto& c = updated[static_cast<std::size_t>(assign[i])];
      c.p_w += boxes[i].w;
      c.p_h += boxes[i].h;
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        updated[static_cast<std::size_t>(c)] = centroids[static_cast<std::size_t>(c)];
        continue;
      }
      updated[static_cast<std::size_t>(c)].p_w /= counts[static_cast<std::size_t>(c)];
      updated[static_cast<std::size_t>(c)].p_h /= counts[static_cast<std::size_t>(c)];
    }

    std::vector<int> new_assign = assign_clusters(boxes, updated);
    const double new_objective = cluster_objective(boxes, new_assign, updated);
    // The mean update is a heuristic for the IoU distance, so guard the
    // iteration: keep the previous state whenever it fails to improve.
    if (new_objective >= objective - 1e-15) break;
    const bool stable = new_assign == assign;
    centroids = std::move(updated);
    assign = std::move(new_assign);
    objective = new_objective;
    result.objective_history.push_back(objective);
    if (stable) break;
  }

  std::sort(centroids.begin(), centroids.end(), [](const Anchor& a, const Anchor& b) {
    return a.p_w * a.p_h < b.p_w * b.p_h;
  });
  result.anchors = std::move(centroids);
  return result;
}

std::vector<Anchor> allocate_anchors_to_stages(std::span<const Anchor> anchors9) {
  if (anchors9.size() != 9)
    throw ConfigError("allocate_anchors_to_stages: expected 9 anchors");
  std::vector<Anchor> sorted(anchors9.begin(), anchors9.end());
  std::sort(sorted.begin(), sorted.end(), [](const Anchor& a, const Anchor& b) {
    return a.p_w * a.p_h > b.p_w * b.p_h;
  });
  return sorted;  // stage-major for {13, 26, 52}: largest areas to coarsest grid
}

void write_anchors_json(const std::string& path, std::span<const Anchor> anchors) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& a : anchors) doc.push_back({{"p_w", a.p_w}, {"p_h", a.p_h}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write anchors file: " + path);
  out << doc.dump(2) << '\n';
}

std::vector<Anchor> read_anchors_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open anchors file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("anchors file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw IoError("anchors file must be a JSON array");
  std::vector<Anchor> anchors;
  for (const auto& item : doc) {
    Anchor a{item.at("p_w").get<double>(), item.at("p_h").get<double>()};
    if (a.p_w <= 0.0 || a.p_h <= 0.0)
      throw InvalidInputError("anchor sizes must be strictly positive");
    anchors.push_back(a);
  }
  return anchors;
}

void write_prediction_tensors(const std::string& path,
                              std::span<const GridPrediction> preds,
                              double image_size) {
  nlohmann::json header;
  header["dtype"] = "f64";
  header["image_size"] = image_size;
  header["anchors_per_stage"] = kAnchorsPerStage;
  header["channels"] = kLogitsPerAnchor;
  std::vector<int> sizes;
  for (const auto& p : preds) sizes.push_back(p.grid_size());
  header["stages"] = sizes;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write prediction tensors: " + path);
  out << header.dump() << '\n';
  for (const auto& p : preds) {
    const auto raw = p.raw();
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write: " + path);
}

PredictionTensors read_prediction_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open prediction tensors: " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw IoError("prediction tensors: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("prediction tensors header: ") + e.what());
  }

  const std::string dtype = header.value("dtype", "f64");
  if (dtype != "f64" && dtype != "f32")
    throw IoError("prediction tensors: unsupported dtype " + dtype);
  if (header.value("anchors_per_stage", kAnchorsPerStage) != kAnchorsPerStage ||
      header.value("channels", kLogitsPerAnchor) != kLogitsPerAnchor)
    throw IoError("prediction tensors: unsupported layout");

  PredictionTensors out;
  out.image_size = header.value("image_size", 416.0);
  for (int n : header.at("stages").get<std::vector<int>>()) {
    const std::size_t count =
        static_cast<std::size_t>(n) * n * kAnchorsPerStage * kLogitsPerAnchor;
    std::vector<double> values(count);
    if (dtype == "f64") {
      in.read(reinterpret_cast<char*>(values.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    } else {
      std::vector<float> f(count);
      in.read(reinterpret_cast<char*>(f.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
      std::copy(f.begin(), f.end(), values.begin());
    }
    if (!in) throw IoError("prediction tensors: truncated data");
    out.stages.emplace_back(n, std::move(values));
  }
  return out;
}

}  // namespace satpose
