#include "ldd/attention.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "ldd/errors.hpp"

namespace ldd::attention {

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> linear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - lo};
  }
  return taps;
}

void check_head(const LatentHead& head, int feature_dim) {
  if (head.transform.shape.size() != 2 || head.transform.shape[0] != feature_dim) {
    throw ValidationError("latent transform " + shape_string(head.transform.shape) +
                          " does not accept features of dim " + std::to_string(feature_dim));
  }
  if (head.templ.shape.size() != 1 || head.templ.shape[0] != head.transform.shape[1]) {
    throw ValidationError("template " + shape_string(head.templ.shape) +
                          " does not match latent dim " + std::to_string(head.transform.shape[1]));
  }
}

// Fixed-order loops rather than Eigen reductions, whose alignment peeling
// would make results depend on where buffers happen to be allocated.
double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// y = M v for a row-major rows × cols matrix.
std::vector<double> mat_vec(const double* m, int rows, int cols, const double* v) {
  std::vector<double> y(rows);
  for (int r = 0; r < rows; ++r) y[r] = dot(m + static_cast<std::size_t>(r) * cols, v, cols);
  return y;
}

void check_finite_activation(double score, int patch) {
  if (!std::isfinite(score)) {
    std::ostringstream msg;
    msg << "non-finite template score " << score << " at patch " << patch;
    throw NumericalError(msg.str());
  }
}

}  // namespace

HeadBank make_head_bank(int heads, int maps, int embed_dim, int latent_dim,
                        double combiner_bias, Rng& rng) {
  HeadBank bank;
  const double u_scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (int k = 0; k < heads; ++k) {
    LatentHead head{Tensor({embed_dim, latent_dim}), Tensor({latent_dim})};
    for (double& u : head.transform.values) u = rng.normal(0.0, u_scale);
    for (double& t : head.templ.values) t = rng.normal(0.0, 1.0);
    bank.heads.push_back(std::move(head));
  }
  bank.combiner.weights = Tensor({heads, maps});
  bank.combiner.bias = Tensor({maps}, combiner_bias);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(heads));
  for (double& w : bank.combiner.weights.values) w = rng.normal(0.0, w_scale);
  return bank;
}

HeadBank zeros_like(const HeadBank& bank) {
  HeadBank out;
  for (const auto& h : bank.heads)
    out.heads.push_back({Tensor(h.transform.shape), Tensor(h.templ.shape)});
  out.combiner = {Tensor(bank.combiner.weights.shape), Tensor(bank.combiner.bias.shape)};
  return out;
}

Representation latent_transform(const FeatureSequence& features, const LatentHead& head) {
  check_head(head, features.dim);
  const int d_out = head.latent_dim();
  Representation x(features.count, d_out);
  for (int i = 0; i < features.count; ++i) {
    const auto f = features.row(i);
    auto xi = x.row(i);
    for (int d = 0; d < features.dim; ++d)
      for (int e = 0; e < d_out; ++e) xi[e] += f[d] * head.transform.values[d * d_out + e];
  }
  return x;
}

ActivationVector template_activation(const Representation& x, const Tensor& templ) {
  if (templ.shape.size() != 1 || templ.shape[0] != x.dim) {
    throw ValidationError("template " + shape_string(templ.shape) +
                          " does not match representation dim " + std::to_string(x.dim));
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(x.dim));
  ActivationVector a;
  a.weights.resize(x.count);
  for (int i = 0; i < x.count; ++i) {
    double dot = 0.0;
    const auto row = x.row(i);
    for (int k = 0; k < x.dim; ++k) dot += templ.values[k] * row[k];
    const double score = dot * inv_scale;
    check_finite_activation(score, i);
    a.weights[i] = sigmoid(score);
  }
  return a;
}

AttentionGrid reshape_activations(const ActivationVector& a, int rows, int cols) {
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows) * cols != a.weights.size()) {
    throw ValidationError(std::to_string(a.weights.size()) + " activations cannot form a " +
                          std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  AttentionGrid g(rows, cols);
  g.values = a.weights;
  return g;
}

AttentionGrid head_forward(const FeatureSequence& features, const LatentHead& head, int rows,
                           int cols) {
  if (static_cast<long>(rows) * cols != features.count) {
    throw ValidationError(std::to_string(features.count) + " patch features cannot form a " +
                          std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  return reshape_activations(template_activation(latent_transform(features, head), head.templ),
                             rows, cols);
}

AttentionMapSet combine_heads(std::span<const AttentionGrid> grids, const Combiner& combiner) {
  if (combiner.weights.shape.size() != 2 || combiner.bias.shape.size() != 1 ||
      combiner.bias.shape[0] != combiner.maps()) {
    throw ValidationError("combiner weights " + shape_string(combiner.weights.shape) +
                          " and bias " + shape_string(combiner.bias.shape) + " are inconsistent");
  }
  if (static_cast<int>(grids.size()) != combiner.heads()) {
    throw ValidationError("combiner expects " + std::to_string(combiner.heads()) +
                          " head grids, got " + std::to_string(grids.size()));
  }
  const int rows = grids.front().rows;
  const int cols = grids.front().cols;
  for (const auto& g : grids) {
    if (g.rows != rows || g.cols != cols) {
      throw ValidationError("head grids must share one shape");
    }
  }
  const int k_count = combiner.heads();
  const int m = combiner.maps();
  AttentionMapSet out;
  out.maps.assign(m, Grid(rows, cols));
  const std::size_t cells = static_cast<std::size_t>(rows) * cols;
  for (int j = 0; j < m; ++j) {
    auto& dst = out.maps[j].values;
    for (std::size_t p = 0; p < cells; ++p) {
      double z = combiner.bias.values[j];
      for (int k = 0; k < k_count; ++k) z += combiner.weights.values[k * m + j] * grids[k].values[p];
      dst[p] = sigmoid(z);
    }
  }
  return out;
}

Grid resize_map(const Grid& grid, int height, int width) {
  if (height < 1 || width < 1) {
    throw ValidationError("resize target must be at least 1x1");
  }
  if (height == grid.rows && width == grid.cols) return grid;
  const auto row_taps = linear_taps(grid.rows, height);
  const auto col_taps = linear_taps(grid.cols, width);
  Grid horizontal(grid.rows, width);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < width; ++c) {
      const Tap& t = col_taps[c];
      horizontal.at(r, c) = std::lerp(grid.at(r, t.lo), grid.at(r, t.hi), t.frac);
    }
  Grid out(height, width);
  for (int r = 0; r < height; ++r) {
    const Tap& t = row_taps[r];
    for (int c = 0; c < width; ++c)
      out.at(r, c) = std::lerp(horizontal.at(t.lo, c), horizontal.at(t.hi, c), t.frac);
  }
  return out;
}

Grid resize_map_backward(const Grid& grad_resized, int rows, int cols) {
  if (grad_resized.rows == rows && grad_resized.cols == cols) return grad_resized;
  const auto row_taps = linear_taps(rows, grad_resized.rows);
  const auto col_taps = linear_taps(cols, grad_resized.cols);
  Grid horizontal(rows, grad_resized.cols);
  for (int r = 0; r < grad_resized.rows; ++r) {
    const Tap& t = row_taps[r];
    for (int c = 0; c < grad_resized.cols; ++c) {
      const double g = grad_resized.at(r, c);
      horizontal.at(t.lo, c) += (1.0 - t.frac) * g;
      horizontal.at(t.hi, c) += t.frac * g;
    }
  }
  Grid out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < grad_resized.cols; ++c) {
      const Tap& t = col_taps[c];
      const double g = horizontal.at(r, c);
      out.at(r, t.lo) += (1.0 - t.frac) * g;
      out.at(r, t.hi) += t.frac * g;
    }
  return out;
}

AttentionMapSet resize_maps(const AttentionMapSet& maps, int height, int width) {
  AttentionMapSet out;
  out.maps.reserve(maps.maps.size());
  for (const auto& g : maps.maps) out.maps.push_back(resize_map(g, height, width));
  return out;
}

int channel_group(int channel, int channels, int maps) {
  const int size = channels / maps;
  return std::min(channel / size, maps - 1);
}

FeatureMaps recalibrate(const FeatureMaps& features, const AttentionMapSet& resized) {
  const int m = resized.count();
  if (m < 1 || m > features.channels) {
    throw ValidationError(std::to_string(m) + " attention maps cannot split " +
                          std::to_string(features.channels) + " channels");
  }
  if (resized.rows() != features.height || resized.cols() != features.width) {
    throw ValidationError("attention maps " + std::to_string(resized.rows()) + "x" +
                          std::to_string(resized.cols()) + " do not match feature maps " +
                          std::to_string(features.height) + "x" + std::to_string(features.width));
  }
  FeatureMaps out(features.channels, features.height, features.width);
  for (int c = 0; c < features.channels; ++c) {
    const auto& map = resized.maps[channel_group(c, features.channels, m)].values;
    auto src = features.plane(c);
    auto dst = out.plane(c);
    for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = src[p] * map[p];
  }
  return out;
}

void recalibrate_backward(const FeatureMaps& features, const AttentionMapSet& resized,
                          const FeatureMaps& grad_out, FeatureMaps& grad_features,
                          AttentionMapSet& grad_maps) {
  const int m = resized.count();
  grad_features = FeatureMaps(features.channels, features.height, features.width);
  grad_maps.maps.assign(m, Grid(features.height, features.width));
  for (int c = 0; c < features.channels; ++c) {
    const int j = channel_group(c, features.channels, m);
    const auto& map = resized.maps[j].values;
    auto& gmap = grad_maps.maps[j].values;
    auto src = features.plane(c);
    auto g = grad_out.plane(c);
    auto gf = grad_features.plane(c);
    for (std::size_t p = 0; p < g.size(); ++p) {
      gf[p] = g[p] * map[p];
      gmap[p] += g[p] * src[p];
    }
  }
}

ActivationVector aggregate_slices(const ActivationVector& a, int slices, Aggregation mode) {
  if (slices < 1 || a.weights.size() % slices != 0) {
    throw ValidationError(std::to_string(a.weights.size()) + " activations do not split into " +
                          std::to_string(slices) + " equal slices");
  }
  if (slices == 1) return a;
  const std::size_t n = a.weights.size() / slices;
  ActivationVector out;
  out.weights.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (mode == Aggregation::Mean) {
      double sum = 0.0;
      for (int k = 0; k < slices; ++k) sum += a.weights[k * n + i];
      out.weights[i] = sum / slices;
    } else {
      double best = a.weights[i];
      for (int k = 1; k < slices; ++k) best = std::max(best, a.weights[k * n + i]);
      out.weights[i] = best;
    }
  }
  return out;
}

AttentionMapSet bank_forward(const HeadBank& bank, const FeatureSequence& features, int slices,
                             int rows, int cols, Aggregation aggregation, BankTape* tape) {
  if (static_cast<long>(slices) * rows * cols != features.count) {
    throw ValidationError(std::to_string(features.count) + " features do not form " +
                          std::to_string(slices) + " slices of a " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " grid");
  }
  const int n_total = features.count;
  std::vector<AttentionGrid> grids;
  grids.reserve(bank.heads.size());
  std::vector<ActivationVector> activations;
  for (const auto& head : bank.heads) {
    check_head(head, features.dim);
    // score_i = f_i · (U t) / sqrt(D'), identical to consulting t against x_i = Uᵀ f_i.
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head.latent_dim()));
    const std::vector<double> probe = mat_vec(head.transform.data(), head.input_dim(), head.latent_dim(),
                                              head.templ.data());
    ActivationVector a;
    a.weights.resize(n_total);
    for (int i = 0; i < n_total; ++i) {
      const double score = dot(features.row(i).data(), probe.data(), features.dim) * inv_scale;
      check_finite_activation(score, i);
      a.weights[i] = sigmoid(score);
    }
    grids.push_back(reshape_activations(aggregate_slices(a, slices, aggregation), rows, cols));
    if (tape) activations.push_back(std::move(a));
  }
  AttentionMapSet maps = combine_heads(grids, bank.combiner);
  if (tape) {
    tape->features = features;
    tape->slices = slices;
    tape->aggregation = aggregation;
    tape->activations = std::move(activations);
    tape->grids = std::move(grids);
    tape->maps = maps;
  }
  return maps;
}

void bank_backward(const HeadBank& bank, const BankTape& tape, const AttentionMapSet& grad_maps,
                   HeadBank& grad, VectorSequence& grad_features) {
  const int k_count = static_cast<int>(bank.heads.size());
  const int m = bank.combiner.maps();
  const std::size_t cells = tape.grids.front().values.size();
  const int n_total = tape.features.count;
  const int d = tape.features.dim;

  // Through the combiner sigmoid.
  std::vector<std::vector<double>> dz(m, std::vector<double>(cells));
  for (int j = 0; j < m; ++j) {
    const auto& map = tape.maps.maps[j].values;
    const auto& gm = grad_maps.maps[j].values;
    double bias_grad = 0.0;
    for (std::size_t p = 0; p < cells; ++p) {
      dz[j][p] = gm[p] * map[p] * (1.0 - map[p]);
      bias_grad += dz[j][p];
    }
    grad.combiner.bias.values[j] += bias_grad;
  }

  grad_features = VectorSequence(n_total, d);

  for (int k = 0; k < k_count; ++k) {
    const auto& grid = tape.grids[k].values;
    std::vector<double> dgrid(cells, 0.0);
    for (int j = 0; j < m; ++j) {
      const double w = bank.combiner.weights.values[k * m + j];
      double wg = 0.0;
      for (std::size_t p = 0; p < cells; ++p) {
        wg += dz[j][p] * grid[p];
        dgrid[p] += w * dz[j][p];
      }
      grad.combiner.weights.values[k * m + j] += wg;
    }

    // Through slice aggregation and the template sigmoid.
    const auto& a = tape.activations[k].weights;
    std::vector<double> dscore(n_total);
    for (int i = 0; i < n_total; ++i) {
      const std::size_t p = static_cast<std::size_t>(i) % cells;
      double da = 0.0;
      if (tape.slices == 1 || tape.aggregation == Aggregation::Mean) {
        da = dgrid[p] / tape.slices;
      } else {
        // Max routes the gradient to the first slice attaining the maximum.
        const int slice = i / static_cast<int>(cells);
        int best = 0;
        for (int s = 1; s < tape.slices; ++s)
          if (a[s * cells + p] > a[best * cells + p]) best = s;
        da = (slice == best) ? dgrid[p] : 0.0;
      }
      dscore[i] = da * a[i] * (1.0 - a[i]);
    }

    const LatentHead& head = bank.heads[k];
    const int dl = head.latent_dim();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dl));
    const double* u = head.transform.data();
    const double* t = head.templ.data();
    // g = Σ_i dscore_i f_i; dU = g tᵀ / √D'; dt = Uᵀ g / √D'; df_i = dscore_i U t / √D'.
    std::vector<double> g(d, 0.0);
    for (int i = 0; i < n_total; ++i)
      for (int e = 0; e < d; ++e) g[e] += dscore[i] * tape.features.data[static_cast<std::size_t>(i) * d + e];
    for (int e = 0; e < d; ++e)
      for (int l = 0; l < dl; ++l) {
        grad.heads[k].transform.values[e * dl + l] += g[e] * t[l] * inv_scale;
        grad.heads[k].templ.values[l] += u[e * dl + l] * g[e] * inv_scale;
      }
    const std::vector<double> probe = mat_vec(u, d, dl, t);
    for (int i = 0; i < n_total; ++i)
      for (int e = 0; e < d; ++e)
        grad_features.data[static_cast<std::size_t>(i) * d + e] += dscore[i] * probe[e] * inv_scale;
  }
}

}  // namespace ldd::attention
