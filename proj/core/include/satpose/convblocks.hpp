#ifndef SATPOSE_CONVBLOCKS_HPP
#define SATPOSE_CONVBLOCKS_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "satpose/errors.hpp"
#include "satpose/geometry.hpp"

namespace satpose {

/// Convolution unit shape. The toy forward pass supports stride 1 only;
/// padding pads the input with zeros on all sides.
struct ConvSpec {
  int kernel = 3;
  int c_in = 1;
  int c_out = 1;
  int stride = 1;
  int padding = 0;

  void validate() const {
    if (kernel < 1 || c_in < 1 || c_out < 1)
      throw InvalidInputError("ConvSpec: kernel and channel counts must be >= 1");
    if (stride < 1 || padding < 0)
      throw InvalidInputError("ConvSpec: invalid stride or padding");
  }
};

/// Exact rational number, used so parameter-count identities hold without
/// rounding.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

/// Tunable parameters of a conventional convolution: K^2 * C_in * C_out.
std::int64_t params_conv(const ConvSpec& spec);

/// Tunable parameters of the depthwise-separable replacement:
/// K^2 * C_in + C_in * C_out.
std::int64_t params_dws(const ConvSpec& spec);

/// Parameter ratio dws/conv = 1/C_out + 1/K^2, exact.
/// params_dws == params_conv * reduction_factor as an integer identity.
Rational reduction_factor(const ConvSpec& spec);

/// Dense H x W x C tensor, channel innermost.
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;

  Tensor3() = default;
  Tensor3(int h, int w, int c)
      : height(h), width(w), channels(c),
        values(static_cast<std::size_t>(h) * w * c, 0.0) {}

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Depthwise kernels: one K x K filter per input channel, stored as a
/// K x K x C_in tensor.
using DepthwiseKernels = Tensor3;

/// Pointwise kernels: a C_in x C_out mixing matrix (the 1x1 convolution).
using PointwiseKernels = Eigen::MatrixXd;

/// Depthwise K x K convolution per channel followed by a pointwise 1 x 1
/// convolution across channels. Stride must be 1; `spec.padding` zeros are
/// added on every side, so the output is (H - K + 1 + 2p) square-reduced.
/// Equals a full convolution whose kernel is the per-channel rank-1
/// composition of the two factors.
Tensor3 dws_forward(const Tensor3& input, const DepthwiseKernels& depthwise,
                    const PointwiseKernels& pointwise, const ConvSpec& spec);

/// Keypoint regression loss. The `absolute` form sums |dx| + |dy| per point
/// (the norm of a scalar difference); `squared` sums dx^2 + dy^2.
enum class KrnLossForm { absolute, squared };
double krn_loss(const KeypointSet2D& pred, const KeypointSet2D& truth,
                KrnLossForm form = KrnLossForm::absolute);

}  // namespace satpose

#endif  // SATPOSE_CONVBLOCKS_HPP
