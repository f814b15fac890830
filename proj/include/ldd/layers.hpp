#pragma once

#include "ldd/tensor.hpp"

// Forward/backward kernels for the backbone. Convolutions are 3×3 with
// padding 1; output size is (in - 1) / stride + 1. Backward functions
// accumulate into parameter gradients and overwrite input gradients.
namespace ldd::layers {

int conv_output_size(int in, int stride);

/// Dense 3×3 convolution; weight is Cout × Cin × 3 × 3, bias Cout.
FeatureMaps conv3x3(const FeatureMaps& x, const Tensor& weight, const Tensor& bias, int stride);
void conv3x3_backward(const FeatureMaps& x, const Tensor& weight, int stride,
                      const FeatureMaps& grad_out, FeatureMaps* grad_x, Tensor& grad_weight,
                      Tensor& grad_bias);

/// Per-channel 3×3 convolution without bias; weight is C × 3 × 3.
FeatureMaps depthwise3x3(const FeatureMaps& x, const Tensor& weight, int stride);
void depthwise3x3_backward(const FeatureMaps& x, const Tensor& weight, int stride,
                           const FeatureMaps& grad_out, FeatureMaps& grad_x, Tensor& grad_weight);

/// 1×1 convolution over a stride-subsampled input; weight Cout × Cin, bias Cout.
FeatureMaps pointwise(const FeatureMaps& x, const Tensor& weight, const Tensor& bias,
                      int stride = 1);
void pointwise_backward(const FeatureMaps& x, const Tensor& weight, int stride,
                        const FeatureMaps& grad_out, FeatureMaps& grad_x, Tensor& grad_weight,
                        Tensor& grad_bias);

FeatureMaps relu(const FeatureMaps& x);
/// grad_x = grad_out where x > 0, else 0.
FeatureMaps relu_backward(const FeatureMaps& x, const FeatureMaps& grad_out);

/// Normalises each group of consecutive channels to zero mean and unit
/// variance over the group's channels and positions, then applies a
/// per-channel scale and shift.
struct GroupNormTape {
  int groups = 1;
  FeatureMaps normalized;
  std::vector<double> inv_std;  // per group
};

FeatureMaps group_norm(const FeatureMaps& x, const Tensor& gamma, const Tensor& beta, int groups,
                       GroupNormTape* tape = nullptr);
void group_norm_backward(const GroupNormTape& tape, const Tensor& gamma,
                         const FeatureMaps& grad_out, FeatureMaps& grad_x, Tensor& grad_gamma,
                         Tensor& grad_beta);

/// Groups used for `channels` channels: channels / group_size when that
/// divides evenly, otherwise a single group.
int norm_groups(int channels, int group_size);

std::vector<double> global_average_pool(const FeatureMaps& x);

/// Smallest |x| over the entries; used to keep finite differences off ReLU kinks.
double min_abs(const FeatureMaps& x);

}  // namespace ldd::layers
