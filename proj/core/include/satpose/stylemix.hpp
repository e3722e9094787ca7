#ifndef SATPOSE_STYLEMIX_HPP
#define SATPOSE_STYLEMIX_HPP

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "satpose/image.hpp"
#include "satpose/rng.hpp"

namespace satpose {

/// Statistics of the style-embedding distribution plus the mixing strength.
/// The embedding dimension is 100 in the pretrained pipeline this models,
/// but any consistent dimension is accepted.
struct StyleSamplerConfig {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double alpha = 0.25;

  /// Throws on asymmetry beyond 1e-9, eigenvalues below -1e-9 (relative),
  /// or alpha outside [0, 1].
  void validate() const;
};

/// Draws style embeddings z = alpha * N(mu, Sigma) + (1 - alpha) * P(c).
/// The PSD factor of Sigma is computed once at construction (Cholesky when
/// positive definite, symmetric eigen-factor otherwise, so a zero covariance
/// yields exactly mu). Identical seeds give bit-identical draws.
class StyleSampler {
public:
  explicit StyleSampler(StyleSamplerConfig config);

  Eigen::VectorXd sample(const Eigen::VectorXd& content_embedding,
                         std::uint64_t seed) const;

  const StyleSamplerConfig& config() const { return config_; }

private:
  StyleSamplerConfig config_;
  Eigen::MatrixXd factor_;  // factor_ * factor_^T == sigma
};

/// One-shot convenience wrapper around StyleSampler.
Eigen::VectorXd sample_embedding(const StyleSamplerConfig& config,
                                 const Eigen::VectorXd& content_embedding,
                                 std::uint64_t seed);

/// out = mask * stylized + (1 - mask) * original, exact per pixel.
/// Mask values must be 0 or 1 and all dimensions must agree.
ImageU8 composite(const ImageU8& stylized, const ImageU8& original,
                  const ImageU8& mask);

enum class SampleSource { synthetic, texture_randomized };

/// Bernoulli(p_tr) choice of training source for sample `index` of a run.
/// Integer-hash based: the stream replays identically across platforms.
SampleSource mix_choice(double p_tr, std::uint64_t seed, std::uint64_t index);

/// Stylizer interface standing in for an external style-transfer backend:
/// content image + style embedding -> stylized image.
class Stylizer {
public:
  virtual ~Stylizer() = default;
  virtual ImageU8 stylize(const ImageU8& content,
                          const Eigen::VectorXd& embedding,
                          std::uint64_t seed) const = 0;
};

/// Built-in procedural backend: seeded value-noise texture blended with the
/// content so the compositing and mixing paths run fully offline. The
/// embedding steers the texture scale and contrast.
class ProceduralStylizer : public Stylizer {
public:
  ImageU8 stylize(const ImageU8& content, const Eigen::VectorXd& embedding,
                  std::uint64_t seed) const override;
};

/// Embedding statistics file: JSON {"mu":[...],"sigma":[[...]]} when the
/// path ends in .json, otherwise a flat binary layout with a JSON header
/// line {"dim":n,"dtype":"f64"} followed by mu then sigma row-major.
StyleSamplerConfig read_style_stats(const std::string& path, double alpha = 0.25);
void write_style_stats(const std::string& path, const StyleSamplerConfig& config);

}  // namespace satpose

#endif  // SATPOSE_STYLEMIX_HPP
