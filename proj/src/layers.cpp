#include "ldd/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ldd/errors.hpp"

namespace ldd::layers {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

// Sequential sums: Eigen's vectorised reductions peel by buffer alignment,
// which would make gradients differ bit-wise between allocations.
void add_row_sums(const ConstRowMap& m, Tensor& out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double* row = m.data() + r * m.cols();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) sum += row[c];
    out.values[r] += sum;
  }
}

// Column matrix (Cin·9) × (Ho·Wo) for a padded 3×3 window.
RowMat im2col(const FeatureMaps& x, int stride, int ho, int wo) {
  RowMat col = RowMat::Zero(static_cast<long>(x.channels) * 9, static_cast<long>(ho) * wo);
  for (int c = 0; c < x.channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col.data() + (static_cast<long>(c) * 9 + ky * 3 + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= x.height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < x.width) row[oy * wo + ox] = x.at(c, iy, ix);
          }
        }
      }
  return col;
}

void col2im(const RowMat& col, int stride, int ho, int wo, FeatureMaps& x) {
  for (int c = 0; c < x.channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col.data() + (static_cast<long>(c) * 9 + ky * 3 + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= x.height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < x.width) x.at(c, iy, ix) += row[oy * wo + ox];
          }
        }
      }
}

FeatureMaps subsample(const FeatureMaps& x, int stride) {
  if (stride == 1) return x;
  const int ho = conv_output_size(x.height, stride);
  const int wo = conv_output_size(x.width, stride);
  FeatureMaps out(x.channels, ho, wo);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx) out.at(c, y, xx) = x.at(c, y * stride, xx * stride);
  return out;
}

}  // namespace

int conv_output_size(int in, int stride) { return (in - 1) / stride + 1; }

FeatureMaps conv3x3(const FeatureMaps& x, const Tensor& weight, const Tensor& bias, int stride) {
  if (weight.shape.size() != 4 || weight.shape[1] != x.channels || weight.shape[2] != 3 ||
      weight.shape[3] != 3) {
    throw ValidationError("conv weight " + shape_string(weight.shape) + " does not accept " +
                          std::to_string(x.channels) + " input channels");
  }
  const int cout = weight.shape[0];
  const int ho = conv_output_size(x.height, stride);
  const int wo = conv_output_size(x.width, stride);
  const RowMat col = im2col(x, stride, ho, wo);
  FeatureMaps y(cout, ho, wo);
  RowMap ym(y.data.data(), cout, static_cast<long>(ho) * wo);
  ym.noalias() = ConstRowMap(weight.data(), cout, static_cast<long>(x.channels) * 9) * col;
  ym.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data(), cout);
  return y;
}

void conv3x3_backward(const FeatureMaps& x, const Tensor& weight, int stride,
                      const FeatureMaps& grad_out, FeatureMaps* grad_x, Tensor& grad_weight,
                      Tensor& grad_bias) {
  const int cout = weight.shape[0];
  const int ho = grad_out.height;
  const int wo = grad_out.width;
  const long k = static_cast<long>(x.channels) * 9;
  const RowMat col = im2col(x, stride, ho, wo);
  ConstRowMap gy(grad_out.data.data(), cout, static_cast<long>(ho) * wo);
  RowMap(grad_weight.data(), cout, k).noalias() += gy * col.transpose();
  add_row_sums(gy, grad_bias);
  if (grad_x) {
    const RowMat gcol = ConstRowMap(weight.data(), cout, k).transpose() * gy;
    *grad_x = FeatureMaps(x.channels, x.height, x.width);
    col2im(gcol, stride, ho, wo, *grad_x);
  }
}

FeatureMaps depthwise3x3(const FeatureMaps& x, const Tensor& weight, int stride) {
  if (weight.shape.size() != 3 || weight.shape[0] != x.channels) {
    throw ValidationError("depthwise weight " + shape_string(weight.shape) + " does not match " +
                          std::to_string(x.channels) + " channels");
  }
  const int ho = conv_output_size(x.height, stride);
  const int wo = conv_output_size(x.width, stride);
  FeatureMaps y(x.channels, ho, wo);
  for (int c = 0; c < x.channels; ++c) {
    const double* w = weight.data() + c * 9;
    for (int oy = 0; oy < ho; ++oy)
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= x.height) continue;
        const double* src = x.data.data() + c * x.plane_size() + static_cast<long>(iy) * x.width;
        double* dst = y.data.data() + c * y.plane_size() + static_cast<long>(oy) * wo;
        for (int kx = 0; kx < 3; ++kx) {
          const double wk = w[ky * 3 + kx];
          const int ox_lo = kx == 0 ? 1 : 0;
          const int ox_hi = std::min(wo, (x.width - kx) / stride + 1);
          for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] += wk * src[ox * stride + kx - 1];
        }
      }
  }
  return y;
}

void depthwise3x3_backward(const FeatureMaps& x, const Tensor& weight, int stride,
                           const FeatureMaps& grad_out, FeatureMaps& grad_x, Tensor& grad_weight) {
  const int ho = grad_out.height;
  const int wo = grad_out.width;
  grad_x = FeatureMaps(x.channels, x.height, x.width);
  for (int c = 0; c < x.channels; ++c) {
    const double* w = weight.data() + c * 9;
    double* gw = grad_weight.data() + c * 9;
    for (int oy = 0; oy < ho; ++oy)
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride + ky - 1;
        if (iy < 0 || iy >= x.height) continue;
        const double* src = x.data.data() + c * x.plane_size() + static_cast<long>(iy) * x.width;
        double* gsrc = grad_x.data.data() + c * x.plane_size() + static_cast<long>(iy) * x.width;
        const double* g = grad_out.data.data() + c * grad_out.plane_size() + static_cast<long>(oy) * wo;
        for (int kx = 0; kx < 3; ++kx) {
          const double wk = w[ky * 3 + kx];
          const int ox_lo = kx == 0 ? 1 : 0;
          const int ox_hi = std::min(wo, (x.width - kx) / stride + 1);
          double acc = 0.0;
          for (int ox = ox_lo; ox < ox_hi; ++ox) {
            acc += g[ox] * src[ox * stride + kx - 1];
            gsrc[ox * stride + kx - 1] += wk * g[ox];
          }
          gw[ky * 3 + kx] += acc;
        }
      }
  }
}

FeatureMaps pointwise(const FeatureMaps& x, const Tensor& weight, const Tensor& bias, int stride) {
  if (weight.shape.size() != 2 || weight.shape[1] != x.channels) {
    throw ValidationError("pointwise weight " + shape_string(weight.shape) + " does not accept " +
                          std::to_string(x.channels) + " input channels");
  }
  const FeatureMaps strided = stride == 1 ? FeatureMaps() : subsample(x, stride);
  const FeatureMaps& xs = stride == 1 ? x : strided;
  const int cout = weight.shape[0];
  FeatureMaps y(cout, xs.height, xs.width);
  RowMap ym(y.data.data(), cout, static_cast<long>(xs.plane_size()));
  ym.noalias() = ConstRowMap(weight.data(), cout, x.channels) *
                 ConstRowMap(xs.data.data(), x.channels, static_cast<long>(xs.plane_size()));
  ym.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.data(), cout);
  return y;
}

void pointwise_backward(const FeatureMaps& x, const Tensor& weight, int stride,
                        const FeatureMaps& grad_out, FeatureMaps& grad_x, Tensor& grad_weight,
                        Tensor& grad_bias) {
  const FeatureMaps strided = stride == 1 ? FeatureMaps() : subsample(x, stride);
  const FeatureMaps& xs = stride == 1 ? x : strided;
  const int cout = weight.shape[0];
  const long hw = static_cast<long>(xs.plane_size());
  ConstRowMap gy(grad_out.data.data(), cout, hw);
  RowMap(grad_weight.data(), cout, x.channels).noalias() +=
      gy * ConstRowMap(xs.data.data(), x.channels, hw).transpose();
  add_row_sums(gy, grad_bias);
  FeatureMaps gxs(x.channels, xs.height, xs.width);
  RowMap(gxs.data.data(), x.channels, hw).noalias() =
      ConstRowMap(weight.data(), cout, x.channels).transpose() * gy;
  if (stride == 1) {
    grad_x = std::move(gxs);
    return;
  }
  grad_x = FeatureMaps(x.channels, x.height, x.width);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < xs.height; ++y)
      for (int xx = 0; xx < xs.width; ++xx) grad_x.at(c, y * stride, xx * stride) = gxs.at(c, y, xx);
}

FeatureMaps relu(const FeatureMaps& x) {
  FeatureMaps y = x;
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

FeatureMaps relu_backward(const FeatureMaps& x, const FeatureMaps& grad_out) {
  FeatureMaps g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (!(x.data[i] > 0.0)) g.data[i] = 0.0;
  return g;
}

namespace {
constexpr double kNormEps = 1e-5;
}

int norm_groups(int channels, int group_size) {
  if (group_size < 1 || channels % group_size != 0) return 1;
  return channels / group_size;
}

FeatureMaps group_norm(const FeatureMaps& x, const Tensor& gamma, const Tensor& beta, int groups,
                       GroupNormTape* tape) {
  if (groups < 1 || x.channels % groups != 0) {
    throw ValidationError(std::to_string(x.channels) + " channels do not split into " +
                          std::to_string(groups) + " groups");
  }
  if (static_cast<int>(gamma.size()) != x.channels || static_cast<int>(beta.size()) != x.channels) {
    throw ValidationError("group norm parameters do not match " + std::to_string(x.channels) + " channels");
  }
  const int per = x.channels / groups;
  const std::size_t area = x.plane_size();
  const double count = static_cast<double>(per) * area;
  FeatureMaps xhat(x.channels, x.height, x.width);
  std::vector<double> inv_std(groups);
  for (int g = 0; g < groups; ++g) {
    const double* src = x.data.data() + g * per * area;
    double mean = 0.0;
    for (std::size_t i = 0; i < per * area; ++i) mean += src[i];
    mean /= count;
    double var = 0.0;
    for (std::size_t i = 0; i < per * area; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= count;
    inv_std[g] = 1.0 / std::sqrt(var + kNormEps);
    double* dst = xhat.data.data() + g * per * area;
    for (std::size_t i = 0; i < per * area; ++i) dst[i] = (src[i] - mean) * inv_std[g];
  }
  FeatureMaps y(x.channels, x.height, x.width);
  for (int c = 0; c < x.channels; ++c) {
    const auto in = xhat.plane(c);
    auto out = y.plane(c);
    for (std::size_t i = 0; i < area; ++i) out[i] = gamma.values[c] * in[i] + beta.values[c];
  }
  if (tape) {
    tape->groups = groups;
    tape->normalized = std::move(xhat);
    tape->inv_std = std::move(inv_std);
  }
  return y;
}

void group_norm_backward(const GroupNormTape& tape, const Tensor& gamma, const FeatureMaps& grad_out,
                         FeatureMaps& grad_x, Tensor& grad_gamma, Tensor& grad_beta) {
  const FeatureMaps& xhat = tape.normalized;
  const int per = xhat.channels / tape.groups;
  const std::size_t area = xhat.plane_size();
  const double count = static_cast<double>(per) * area;
  grad_x = FeatureMaps(xhat.channels, xhat.height, xhat.width);
  for (int c = 0; c < xhat.channels; ++c) {
    const auto go = grad_out.plane(c);
    const auto xh = xhat.plane(c);
    double gg = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < area; ++i) {
      gg += go[i] * xh[i];
      gb += go[i];
    }
    grad_gamma.values[c] += gg;
    grad_beta.values[c] += gb;
  }
  for (int g = 0; g < tape.groups; ++g) {
    double sum = 0.0, dot = 0.0;
    for (int c = g * per; c < (g + 1) * per; ++c) {
      const auto go = grad_out.plane(c);
      const auto xh = xhat.plane(c);
      for (std::size_t i = 0; i < area; ++i) {
        const double d = go[i] * gamma.values[c];
        sum += d;
        dot += d * xh[i];
      }
    }
    for (int c = g * per; c < (g + 1) * per; ++c) {
      const auto go = grad_out.plane(c);
      const auto xh = xhat.plane(c);
      auto gx = grad_x.plane(c);
      for (std::size_t i = 0; i < area; ++i) {
        const double d = go[i] * gamma.values[c];
        gx[i] = tape.inv_std[g] * (d - sum / count - xh[i] * dot / count);
      }
    }
  }
}

std::vector<double> global_average_pool(const FeatureMaps& x) {
  std::vector<double> pooled(x.channels);
  for (int c = 0; c < x.channels; ++c) {
    double sum = 0.0;
    for (double v : x.plane(c)) sum += v;
    pooled[c] = sum / static_cast<double>(x.plane_size());
  }
  return pooled;
}

double min_abs(const FeatureMaps& x) {
  double best = std::numeric_limits<double>::infinity();
  for (double v : x.data) best = std::min(best, std::abs(v));
  return best;
}

}  // namespace ldd::layers
