#include "satpose/convblocks.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace satpose {

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (den == 0) throw InvalidInputError("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

std::int64_t params_conv(const ConvSpec& spec) {
  spec.validate();
  return static_cast<std::int64_t>(spec.kernel) * spec.kernel * spec.c_in *
         spec.c_out;
}

std::int64_t params_dws(const ConvSpec& spec) {
  spec.validate();
  return static_cast<std::int64_t>(spec.kernel) * spec.kernel * spec.c_in +
         static_cast<std::int64_t>(spec.c_in) * spec.c_out;
}

Rational reduction_factor(const ConvSpec& spec) {
  spec.validate();
  // 1/C_out + 1/K^2 = (K^2 + C_out) / (K^2 * C_out)
  const std::int64_t k2 = static_cast<std::int64_t>(spec.kernel) * spec.kernel;
  return Rational(k2 + spec.c_out, k2 * spec.c_out);
}

Tensor3 dws_forward(const Tensor3& input, const DepthwiseKernels& depthwise,
                    const PointwiseKernels& pointwise, const ConvSpec& spec) {
  spec.validate();
  if (spec.stride != 1)
    throw InvalidInputError("dws_forward: only stride 1 is supported");
  if (input.channels != spec.c_in)
    throw ShapeError("dws_forward: input has " + std::to_string(input.channels) +
                     " channels, spec says " + std::to_string(spec.c_in));
  if (depthwise.height != spec.kernel || depthwise.width != spec.kernel ||
      depthwise.channels != spec.c_in)
    throw ShapeError("dws_forward: depthwise kernels must be K x K x C_in");
  if (pointwise.rows() != spec.c_in || pointwise.cols() != spec.c_out)
    throw ShapeError("dws_forward: pointwise kernels must be C_in x C_out");

  const int k = spec.kernel;
  const int p = spec.padding;
  const int out_h = input.height - k + 1 + 2 * p;
  const int out_w = input.width - k + 1 + 2 * p;
  if (out_h < 1 || out_w < 1)
    throw ShapeError("dws_forward: kernel larger than padded input");

  // Depthwise stage: one K x K filter per channel, zeros outside the input.
  Tensor3 mid(out_h, out_w, spec.c_in);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < spec.c_in; ++c) {
        double acc = 0.0;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int iy = y + ky - p;
            const int ix = x + kx - p;
            if (iy < 0 || iy >= input.height || ix < 0 || ix >= input.width)
              continue;
            acc += depthwise.at(ky, kx, c) * input.at(iy, ix, c);
          }
        mid.at(y, x, c) = acc;
      }

  // Pointwise stage: 1 x 1 mix across channels.
  Tensor3 out(out_h, out_w, spec.c_out);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      for (int co = 0; co < spec.c_out; ++co) {
        double acc = 0.0;
        for (int ci = 0; ci < spec.c_in; ++ci)
          acc += mid.at(y, x, ci) * pointwise(ci, co);
        out.at(y, x, co) = acc;
      }
  return out;
}

double krn_loss(const KeypointSet2D& pred, const KeypointSet2D& truth,
                KrnLossForm form) {
  double loss = 0.0;
  for (int i = 0; i < kKeypointCount; ++i) {
    const double dx = pred[i].x() - truth[i].x();
    const double dy = pred[i].y() - truth[i].y();
    if (form == KrnLossForm::absolute)
      loss += std::abs(dx) + std::abs(dy);
    else
      loss += dx * dx + dy * dy;
  }
  return loss;
}

}  // namespace satpose
