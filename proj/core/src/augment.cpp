#include "satpose/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace satpose {

void AugmentConfig::validate() const {
  if (apply_probability < 0.0 || apply_probability > 1.0)
    throw InvalidInputError("augment config: apply_probability outside [0, 1]");
  if (erase.probability < 0.0 || erase.probability > 1.0)
    throw InvalidInputError("augment config: erase probability outside [0, 1]");
  if (roi_enlarge_lo_pct < 0.0 || roi_enlarge_hi_pct < roi_enlarge_lo_pct)
    throw InvalidInputError("augment config: bad RoI enlargement range");
  if (noise_stddev < 0.0)
    throw InvalidInputError("augment config: negative noise stddev");
}

AugmentConfig load_augment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open augment config: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("augment config " + path + ": " + e.what());
  }

  AugmentConfig cfg;
  auto range = [&](const char* key, double& lo, double& hi) {
    if (doc.contains(key)) {
      const auto& v = doc.at(key);
      if (!v.is_array() || v.size() != 2)
        throw IoError(std::string("augment config: ") + key + " must be [lo, hi]");
      lo = v[0].get<double>();
      hi = v[1].get<double>();
    }
  };
  range("brightness", cfg.brightness_lo, cfg.brightness_hi);
  range("contrast", cfg.contrast_lo, cfg.contrast_hi);
  range("roi_enlargement_pct", cfg.roi_enlarge_lo_pct, cfg.roi_enlarge_hi_pct);
  range("roi_shift_pct", cfg.roi_shift_lo_pct, cfg.roi_shift_hi_pct);
  if (doc.contains("gaussian_noise_stddev"))
    cfg.noise_stddev = doc.at("gaussian_noise_stddev").get<double>();
  if (doc.contains("apply_probability"))
    cfg.apply_probability = doc.at("apply_probability").get<double>();
  if (doc.contains("erase")) {
    const auto& e = doc.at("erase");
    if (e.contains("probability")) cfg.erase.probability = e.at("probability").get<double>();
    if (e.contains("area_fraction")) {
      cfg.erase.area_lo = e.at("area_fraction")[0].get<double>();
      cfg.erase.area_hi = e.at("area_fraction")[1].get<double>();
    }
    if (e.contains("aspect_ratio")) {
      cfg.erase.aspect_lo = e.at("aspect_ratio")[0].get<double>();
      cfg.erase.aspect_hi = e.at("aspect_ratio")[1].get<double>();
    }
  }
  cfg.validate();
  return cfg;
}

void save_augment_config(const std::string& path, const AugmentConfig& cfg) {
  nlohmann::json doc{
      {"brightness", {cfg.brightness_lo, cfg.brightness_hi}},
      {"contrast", {cfg.contrast_lo, cfg.contrast_hi}},
      {"gaussian_noise_stddev", cfg.noise_stddev},
      {"roi_enlargement_pct", {cfg.roi_enlarge_lo_pct, cfg.roi_enlarge_hi_pct}},
      {"roi_shift_pct", {cfg.roi_shift_lo_pct, cfg.roi_shift_hi_pct}},
      {"apply_probability", cfg.apply_probability},
      {"erase",
       {{"probability", cfg.erase.probability},
        {"area_fraction", {cfg.erase.area_lo, cfg.erase.area_hi}},
        {"aspect_ratio", {cfg.erase.aspect_lo, cfg.erase.aspect_hi}}}}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write augment config: " + path);
  out << doc.dump(2) << '\n';
}

ImageU8 photometric(const ImageU8& img, double alpha, double beta,
                    double noise_stddev, Rng& rng) {
  ImageU8 out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    double v = alpha * img.pixels[i] + beta;
    if (noise_stddev > 0.0) v += rng.normal(0.0, noise_stddev);
    const long rounded = std::lround(v);  // half away from zero
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp<long>(rounded, 0, 255));
  }
  return out;
}

GeomOp inverse_op(GeomOp op) {
  switch (op) {
    case GeomOp::rot90: return GeomOp::rot270;
    case GeomOp::rot270: return GeomOp::rot90;
    default: return op;  // hflip, vflip, rot180 are involutions
  }
}

Vec2 transform_point(const Vec2& pt, GeomOp op, int width, int height) {
  const double w1 = width - 1.0;
  const double h1 = height - 1.0;
  switch (op) {
    case GeomOp::hflip: return {w1 - pt.x(), pt.y()};
    case GeomOp::vflip: return {pt.x(), h1 - pt.y()};
    case GeomOp::rot90: return {pt.y(), w1 - pt.x()};
    case GeomOp::rot180: return {w1 - pt.x(), h1 - pt.y()};
    case GeomOp::rot270: return {h1 - pt.y(), pt.x()};
  }
  return pt;
}

ImageU8 transform_image(const ImageU8& img, GeomOp op) {
  const bool swaps = op == GeomOp::rot90 || op == GeomOp::rot270;
  ImageU8 out(swaps ? img.height : img.width, swaps ? img.width : img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const Vec2 dst = transform_point(Vec2(x, y), op, img.width, img.height);
      out.at(static_cast<int>(dst.x()), static_cast<int>(dst.y())) = img.at(x, y);
    }
  return out;
}

Labels transform_labels(const Labels& labels, GeomOp op, int width, int height) {
  Labels out;
  out.keypoints.visible = labels.keypoints.visible;
  for (int i = 0; i < kKeypointCount; ++i)
    out.keypoints[i] = transform_point(labels.keypoints[i], op, width, height);

  const Vec2 c0 = transform_point(
      Vec2(labels.bbox.left(), labels.bbox.top()), op, width, height);
  const Vec2 c1 = transform_point(
      Vec2(labels.bbox.right(), labels.bbox.bottom()), op, width, height);
  out.bbox = BoundingBox::from_corners(std::min(c0.x(), c1.x()),
                                       std::min(c0.y(), c1.y()),
                                       std::max(c0.x(), c1.x()),
                                       std::max(c0.y(), c1.y()));
  return out;
}

CropRect roi_policy(const BoundingBox& bbox, int image_w, int image_h,
                    double enlarge_pct, double shift_x_pct, double shift_y_pct) {
  if (bbox.right() < 0.0 || bbox.left() >= image_w || bbox.bottom() < 0.0 ||
      bbox.top() >= image_h)
    throw InvalidInputError("roi_policy: box entirely outside image");

  double side = std::max(bbox.w, bbox.h) * (1.0 + enlarge_pct / 100.0);
  side = std::min({side, static_cast<double>(image_w), static_cast<double>(image_h)});

  const double cx = bbox.x + shift_x_pct / 100.0 * side;
  const double cy = bbox.y + shift_y_pct / 100.0 * side;

  CropRect crop;
  crop.side = side;
  crop.x0 = std::clamp(cx - 0.5 * side, 0.0, image_w - side);
  crop.y0 = std::clamp(cy - 0.5 * side, 0.0, image_h - side);
  return crop;
}

CropRect roi_test_policy(const BoundingBox& bbox, int image_w, int image_h) {
  return roi_policy(bbox, image_w, image_h, 20.0, 0.0, 0.0);
}

Vec2 image_to_crop(const Vec2& pt, const CropRect& crop, double out_size) {
  const double s = out_size / crop.side;
  return {(pt.x() - crop.x0) * s, (pt.y() - crop.y0) * s};
}

Vec2 crop_to_image(const Vec2& pt, const CropRect& crop, double out_size) {
  const double s = crop.side / out_size;
  return {pt.x() * s + crop.x0, pt.y() * s + crop.y0};
}

ImageU8 random_erase(const ImageU8& img, const EraseParams& params, Rng& rng) {
  ImageU8 out = img;
  if (!rng.bernoulli(params.probability)) return out;

  for (int attempt = 0; attempt < 100; ++attempt) {
    const double target_area =
        rng.uniform(params.area_lo, params.area_hi) * img.width * img.height;
    const double aspect = rng.uniform(params.aspect_lo, params.aspect_hi);
    const int eh = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
    const int ew = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
    if (eh < 1 || ew < 1 || eh > img.height || ew > img.width) continue;
    const int x0 = static_cast<int>(rng.uniform_int(0, img.width - ew));
    const int y0 = static_cast<int>(rng.uniform_int(0, img.height - eh));
    for (int y = y0; y < y0 + eh; ++y)
      for (int x = x0; x < x0 + ew; ++x) out.at(x, y) = 0;
    break;
  }
  return out;
}

AugmentPlan sample_plan(const AugmentConfig& config, Rng& rng) {
  config.validate();
  AugmentPlan plan;
  plan.apply_brightness = rng.bernoulli(config.apply_probability);
  plan.brightness = rng.uniform(config.brightness_lo, config.brightness_hi);
  plan.apply_contrast = rng.bernoulli(config.apply_probability);
  plan.contrast = rng.uniform(config.contrast_lo, config.contrast_hi);
  plan.apply_noise = rng.bernoulli(config.apply_probability);
  plan.apply_flip = rng.bernoulli(config.apply_probability);
  plan.flip = rng.bernoulli(0.5) ? GeomOp::hflip : GeomOp::vflip;
  plan.apply_rotation = rng.bernoulli(config.apply_probability);
  switch (rng.uniform_int(0, 2)) {
    case 0: plan.rotation = GeomOp::rot90; break;
    case 1: plan.rotation = GeomOp::rot180; break;
    default: plan.rotation = GeomOp::rot270; break;
  }
  plan.roi_enlarge_pct =
      rng.uniform(config.roi_enlarge_lo_pct, config.roi_enlarge_hi_pct);
  plan.roi_shift_x_pct = rng.uniform(config.roi_shift_lo_pct, config.roi_shift_hi_pct);
  plan.roi_shift_y_pct = rng.uniform(config.roi_shift_lo_pct, config.roi_shift_hi_pct);
  plan.apply_erase = rng.bernoulli(config.erase.probability);
  return plan;
}

AugmentedSample apply_plan(const ImageU8& img, const Labels& labels,
                           const AugmentPlan& plan, const AugmentConfig& config,
                           Rng& rng) {
  AugmentedSample out{img, labels};

  const double alpha = plan.apply_contrast ? plan.contrast : 1.0;
  const double beta = plan.apply_brightness ? plan.brightness : 0.0;
  const double sigma = plan.apply_noise ? config.noise_stddev : 0.0;
  if (alpha != 1.0 || beta != 0.0 || sigma > 0.0)
    out.image = photometric(out.image, alpha, beta, sigma, rng);

  if (plan.apply_flip) {
    out.labels = transform_labels(out.labels, plan.flip, out.image.width,
                                  out.image.height);
    out.image = transform_image(out.image, plan.flip);
  }
  if (plan.apply_rotation) {
    out.labels = transform_labels(out.labels, plan.rotation, out.image.width,
                                  out.image.height);
    out.image = transform_image(out.image, plan.rotation);
  }
  if (plan.apply_erase) {
    EraseParams always = config.erase;
    always.probability = 1.0;  // the plan already made the coin flip
    out.image = random_erase(out.image, always, rng);
  }
  return out;
}

Labels invert_plan_on_labels(const Labels& labels, const AugmentPlan& plan,
                             int width, int height) {
  Labels out = labels;
  // Undo in reverse application order. Flips preserve dimensions, so the
  // rotation always saw (width, height); its inverse must be applied with
  // the rotated dimensions.
  if (plan.apply_rotation) {
    const bool swaps =
        plan.rotation == GeomOp::rot90 || plan.rotation == GeomOp::rot270;
    const int rw = swaps ? height : width;
    const int rh = swaps ? width : height;
    out = transform_labels(out, inverse_op(plan.rotation), rw, rh);
  }
  if (plan.apply_flip)
    out = transform_labels(out, inverse_op(plan.flip), width, height);
  return out;
}

}  // namespace satpose
