#include "satpose/stylemix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace satpose {

void StyleSamplerConfig::validate() const {
  if (mu.size() < 1) throw InvalidInputError("style stats: empty mean vector");
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size())
    throw ShapeError("style stats: sigma must be square and match mu");
  if (alpha < 0.0 || alpha > 1.0)
    throw InvalidInputError("style stats: alpha outside [0, 1]");

  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw InvalidCovarianceError("style stats: covariance is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.eigenvalues().minCoeff() < -1e-9 * scale)
    throw InvalidCovarianceError(
        "style stats: covariance has negative eigenvalues");
}

StyleSampler::StyleSampler(StyleSamplerConfig config)
    : config_(std::move(config)) {
  config_.validate();

  // Cholesky when strictly positive definite; otherwise the symmetric
  // eigen-factor, which handles semi-definite input exactly (a zero
  // covariance gives a zero factor).
  Eigen::LLT<Eigen::MatrixXd> llt(config_.sigma);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(config_.sigma);
    factor_ = es.eigenvectors() *
              es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
}

Eigen::VectorXd StyleSampler::sample(const Eigen::VectorXd& content_embedding,
                                     std::uint64_t seed) const {
  if (content_embedding.size() != config_.mu.size())
    throw ShapeError("sample: content embedding dimension mismatch");
  Rng rng(seed);
  Eigen::VectorXd eps(config_.mu.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  return config_.alpha * (config_.mu + factor_ * eps) +
         (1.0 - config_.alpha) * content_embedding;
}

Eigen::VectorXd sample_embedding(const StyleSamplerConfig& config,
                                 const Eigen::VectorXd& content_embedding,
                                 std::uint64_t seed) {
  return StyleSampler(config).sample(content_embedding, seed);
}

ImageU8 composite(const ImageU8& stylized, const ImageU8& original,
                  const ImageU8& mask) {
  if (!stylized.same_size(original) || !stylized.same_size(mask))
    throw ShapeError("composite: image dimensions differ");
  ImageU8 out(original.width, original.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const std::uint8_t m = mask.pixels[i];
    if (m > 1) throw InvalidInputError("composite: mask values must be 0 or 1");
    out.pixels[i] = m ? stylized.pixels[i] : original.pixels[i];
  }
  return out;
}

SampleSource mix_choice(double p_tr, std::uint64_t seed, std::uint64_t index) {
  if (p_tr < 0.0 || p_tr > 1.0)
    throw InvalidInputError("mix_choice: p_tr outside [0, 1]");
  const double draw =
      static_cast<double>(mix_seed(seed, index) >> 11) * 0x1.0p-53;  // [0, 1)
  return draw < p_tr ? SampleSource::texture_randomized
                     : SampleSource::synthetic;
}

ImageU8 ProceduralStylizer::stylize(const ImageU8& content,
                                    const Eigen::VectorXd& embedding,
                                    std::uint64_t seed) const {
  // Fold the embedding into the texture seed so different styles differ.
  std::uint64_t style_seed = seed;
  for (Eigen::Index i = 0; i < embedding.size(); ++i) {
    const auto bits = static_cast<std::uint64_t>(
        std::llround(embedding(i) * 4096.0));
    style_seed = mix_seed(style_seed, bits + static_cast<std::uint64_t>(i));
  }
  Rng rng(style_seed);

  // Value-noise lattice, bilinearly interpolated.
  const int cell = 4 + static_cast<int>(rng.uniform_int(0, 12));
  const int gw = content.width / cell + 2;
  const int gh = content.height / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = rng.uniform(0.0, 255.0);
  const double blend = rng.uniform(0.55, 0.85);

  ImageU8 out(content.width, content.height);
  for (int y = 0; y < content.height; ++y)
    for (int x = 0; x < content.width; ++x) {
      const double gx = static_cast<double>(x) / cell;
      const double gy = static_cast<double>(y) / cell;
      const int ix = static_cast<int>(gx);
      const int iy = static_cast<int>(gy);
      const double fx = gx - ix;
      const double fy = gy - iy;
      auto lat = [&](int xx, int yy) {
        return lattice[static_cast<std::size_t>(yy) * gw + xx];
      };
      const double noise =
          (1 - fx) * (1 - fy) * lat(ix, iy) + fx * (1 - fy) * lat(ix + 1, iy) +
          (1 - fx) * fy * lat(ix, iy + 1) + fx * fy * lat(ix + 1, iy + 1);
      const double v = blend * noise + (1.0 - blend) * content.at(x, y);
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    }
  return out;
}

StyleSamplerConfig read_style_stats(const std::string& path, double alpha) {
  StyleSamplerConfig cfg;
  cfg.alpha = alpha;

  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open style stats: " + path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("style stats " + path + ": " + e.what());
    }
    const auto mu = doc.at("mu").get<std::vector<double>>();
    cfg.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(),
                                               static_cast<Eigen::Index>(mu.size()));
    const auto& rows = doc.at("sigma");
    cfg.sigma.resize(static_cast<Eigen::Index>(mu.size()),
                     static_cast<Eigen::Index>(mu.size()));
    if (rows.size() != mu.size()) throw IoError("style stats: sigma row count");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = rows[r].get<std::vector<double>>();
      if (row.size() != mu.size()) throw IoError("style stats: sigma column count");
      for (std::size_t c = 0; c < row.size(); ++c)
        cfg.sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open style stats: " + path);
    std::string header_line;
    if (!std::getline(in, header_line)) throw IoError("style stats: missing header");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("style stats header: ") + e.what());
    }
    const auto dim = header.at("dim").get<Eigen::Index>();
    if (header.value("dtype", "f64") != "f64")
      throw IoError("style stats: unsupported dtype");
    cfg.mu.resize(dim);
    cfg.sigma.resize(dim, dim);
    in.read(reinterpret_cast<char*>(cfg.mu.data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (Eigen::Index r = 0; r < dim; ++r) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(sizeof(double) * dim));
      for (Eigen::Index c = 0; c < dim; ++c)
        cfg.sigma(r, c) = row[static_cast<std::size_t>(c)];
    }
    if (!in) throw IoError("style stats: truncated data");
  }
  cfg.validate();
  return cfg;
}

void write_style_stats(const std::string& path, const StyleSamplerConfig& cfg) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json doc;
    doc["mu"] = std::vector<double>(cfg.mu.data(), cfg.mu.data() + cfg.mu.size());
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < cfg.sigma.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(cfg.sigma.cols()));
      for (Eigen::Index c = 0; c < cfg.sigma.cols(); ++c)
        row[static_cast<std::size_t>(c)] = cfg.sigma(r, c);
      rows.push_back(row);
    }
    doc["sigma"] = rows;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write style stats: " + path);
    out << doc.dump() << '\n';
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write style stats: " + path);
    nlohmann::json header{{"dim", cfg.mu.size()}, {"dtype", "f64"}};
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(cfg.mu.data()),
              static_cast<std::streamsize>(sizeof(double) * cfg.mu.size()));
    for (Eigen::Index r = 0; r < cfg.sigma.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(cfg.sigma.cols()));
      for (Eigen::Index c = 0; c < cfg.sigma.cols(); ++c)
        row[static_cast<std::size_t>(c)] = cfg.sigma(r, c);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(double) * cfg.sigma.cols()));
    }
    if (!out) throw IoError("short write: " + path);
  }
}

}  // namespace satpose
