#include "salnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace salnet {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedRowMatrix = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedRowMatrix = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// im2col scratch is bounded to this many floats; convolutions over larger
// maps are processed in bands of output rows.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

struct ConvGeometry {
  std::size_t in_channels, in_h, in_w;
  std::size_t out_channels, out_h, out_w;
  std::size_t kernel, pad;

  std::size_t patch() const { return in_channels * kernel * kernel; }

  std::size_t band_rows() const {
    return std::clamp<std::size_t>(kColumnBudget / (patch() * out_w), 1, out_h);
  }
};

ConvGeometry conv_geometry(const Shape& in_shape, const Tensor& kernels, std::size_t pad,
                           bool input_is_output) {
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3) || kernels.dim(2) % 2 == 0) {
    throw ShapeError("conv2d: kernels must be C_out x C_in x k x k with odd k, got " +
                     to_string(kernels.shape()));
  }
  if (in_shape.size() != 3) {
    throw ShapeError("conv2d: expected a C x H x W tensor, got " + to_string(in_shape));
  }
  ConvGeometry g{};
  g.kernel = kernels.dim(2);
  g.pad = pad;
  g.out_channels = kernels.dim(0);
  g.in_channels = kernels.dim(1);
  const std::size_t shrink = g.kernel - 1;
  if (!input_is_output) {
    if (in_shape[0] != g.in_channels) {
      throw ShapeError("conv2d: input has " + std::to_string(in_shape[0]) +
                       " channels, kernels expect " + std::to_string(g.in_channels) +
                       " (input " + to_string(in_shape) + ", kernels " +
                       to_string(kernels.shape()) + ")");
    }
    g.in_h = in_shape[1];
    g.in_w = in_shape[2];
    if (g.in_h + 2 * pad < g.kernel || g.in_w + 2 * pad < g.kernel) {
      throw ShapeError("conv2d: kernel larger than padded input " + to_string(in_shape));
    }
    g.out_h = g.in_h + 2 * pad - shrink;
    g.out_w = g.in_w + 2 * pad - shrink;
  } else {
    if (in_shape[0] != g.out_channels) {
      throw ShapeError("conv2d_backward_input: gradient has " + std::to_string(in_shape[0]) +
                       " channels, kernels produce " + std::to_string(g.out_channels));
    }
    g.out_h = in_shape[1];
    g.out_w = in_shape[2];
    if (g.out_h + shrink <= 2 * pad || g.out_w + shrink <= 2 * pad) {
      throw ShapeError("conv2d_backward_input: gradient too small for padding");
    }
    g.in_h = g.out_h + shrink - 2 * pad;
    g.in_w = g.out_w + shrink - 2 * pad;
  }
  return g;
}

// Column layout: row index (c*k + ky)*k + kx, column index (y - y0)*out_w + x.
void im2col_band(const float* input, const ConvGeometry& g, std::size_t y0, std::size_t y1,
                 float* cols) {
  const std::size_t n = (y1 - y0) * g.out_w;
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto in_h = static_cast<std::ptrdiff_t>(g.in_h);
  const auto in_w = static_cast<std::ptrdiff_t>(g.in_w);
  const auto out_w = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        float* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * n;
        const auto shift = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x_lo = std::clamp<std::ptrdiff_t>(-shift, 0, out_w);
        const std::ptrdiff_t x_hi = std::clamp<std::ptrdiff_t>(in_w - shift, x_lo, out_w);
        for (std::size_t y = y0; y < y1; ++y) {
          float* dst = row + (y - y0) * g.out_w;
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (iy < 0 || iy >= in_h) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = input + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          std::fill(dst, dst + x_lo, 0.0f);
          std::copy(src + x_lo + shift, src + x_hi + shift, dst + x_lo);
          std::fill(dst + x_hi, dst + g.out_w, 0.0f);
        }
      }
    }
  }
}

void col2im_band_accumulate(const float* cols, const ConvGeometry& g, std::size_t y0,
                            std::size_t y1, float* grad_input) {
  const std::size_t n = (y1 - y0) * g.out_w;
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto in_h = static_cast<std::ptrdiff_t>(g.in_h);
  const auto in_w = static_cast<std::ptrdiff_t>(g.in_w);
  const auto out_w = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const float* row = cols + ((c * g.kernel + ky) * g.kernel + kx) * n;
        const auto shift = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t x_lo = std::clamp<std::ptrdiff_t>(-shift, 0, out_w);
        const std::ptrdiff_t x_hi = std::clamp<std::ptrdiff_t>(in_w - shift, x_lo, out_w);
        for (std::size_t y = y0; y < y1; ++y) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - pad;
          if (iy < 0 || iy >= in_h) continue;
          const float* src = row + (y - y0) * g.out_w;
          float* dst = grad_input + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
          for (std::ptrdiff_t x = x_lo; x < x_hi; ++x) dst[x + shift] += src[x];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      std::size_t pad) {
  const ConvGeometry g = conv_geometry(input.shape(), kernels, pad, false);
  if (bias.size() != g.out_channels) {
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " != C_out " +
                     std::to_string(g.out_channels));
  }
  Tensor out({g.out_channels, g.out_h, g.out_w});
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t band = g.band_rows();
  std::vector<float> cols(g.patch() * band * g.out_w);

  Eigen::Map<const RowMatrix> w(kernels.raw(), static_cast<Eigen::Index>(g.out_channels),
                                static_cast<Eigen::Index>(g.patch()));
  for (std::size_t y0 = 0; y0 < g.out_h; y0 += band) {
    const std::size_t y1 = std::min(g.out_h, y0 + band);
    const auto n = static_cast<Eigen::Index>((y1 - y0) * g.out_w);
    im2col_band(input.raw(), g, y0, y1, cols.data());
    Eigen::Map<const RowMatrix> col_mat(cols.data(), static_cast<Eigen::Index>(g.patch()), n);
    StridedRowMatrix dst(out.raw() + y0 * g.out_w, static_cast<Eigen::Index>(g.out_channels),
                         n, Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
    dst.noalias() = w * col_mat;
  }
  for (std::size_t c = 0; c < g.out_channels; ++c) {
    float* p = out.raw() + c * plane;
    const float b = bias[c];
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& kernels,
                             std::size_t pad) {
  const ConvGeometry g = conv_geometry(grad_output.shape(), kernels, pad, true);
  Tensor grad_in({g.in_channels, g.in_h, g.in_w});
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t band = g.band_rows();
  std::vector<float> cols(g.patch() * band * g.out_w);

  Eigen::Map<const RowMatrix> w(kernels.raw(), static_cast<Eigen::Index>(g.out_channels),
                                static_cast<Eigen::Index>(g.patch()));
  for (std::size_t y0 = 0; y0 < g.out_h; y0 += band) {
    const std::size_t y1 = std::min(g.out_h, y0 + band);
    const auto n = static_cast<Eigen::Index>((y1 - y0) * g.out_w);
    ConstStridedRowMatrix src(grad_output.raw() + y0 * g.out_w,
                              static_cast<Eigen::Index>(g.out_channels), n,
                              Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
    Eigen::Map<RowMatrix> col_mat(cols.data(), static_cast<Eigen::Index>(g.patch()), n);
    col_mat.noalias() = w.transpose() * src;
    col2im_band_accumulate(cols.data(), g, y0, y1, grad_in.raw());
  }
  return grad_in;
}

ReluResult relu_forward(const Tensor& x) {
  ReluResult r{x, Tensor(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = x[i] > 0.0f;
    r.output[i] = on ? x[i] : 0.0f;
    r.mask[i] = on ? 1.0f : 0.0f;
  }
  return r;
}

Tensor relu_backward(const Tensor& grad, const Tensor& mask, bool guided) {
  require_same_shape(grad, mask, "relu_backward");
  Tensor out(grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const float g = grad[i];
    const bool pass = mask[i] != 0.0f && (!guided || g > 0.0f);
    out[i] = pass ? g : 0.0f;
  }
  return out;
}

PoolResult maxpool_forward(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("maxpool: expected C x H x W, got " + to_string(x.shape()));
  const std::size_t channels = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool: spatial extents must be even, got " + to_string(x.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult r{Tensor({channels, oh, ow}), PoolIndexMap{x.shape(), {channels, oh, ow}, {}}};
  r.indices.indices.resize(channels * oh * ow);
  std::size_t o = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo, ++o) {
        const std::size_t base = (c * h + 2 * y) * w + 2 * xo;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (std::size_t k = 1; k < 4; ++k) {
          if (x[cand[k]] > x[best]) best = cand[k];
        }
        r.output[o] = x[best];
        r.indices.indices[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Tensor& grad, const PoolIndexMap& indices) {
  if (grad.shape() != indices.output_shape || indices.indices.size() != grad.size()) {
    throw ShapeError("maxpool_backward: gradient " + to_string(grad.shape()) +
                     " does not match pooled shape " + to_string(indices.output_shape));
  }
  const Shape& in = indices.input_shape;
  if (in.size() != 3) throw ShapeError("maxpool_backward: corrupt input shape");
  Tensor out(in);
  const std::size_t h = in[1], w = in[2], ow = w / 2, oh = h / 2;
  for (std::size_t o = 0; o < grad.size(); ++o) {
    const std::size_t idx = indices.indices[o];
    // The winner must lie inside output cell o's own 2x2 window.
    const std::size_t c = o / (oh * ow), y = (o / ow) % oh, x = o % ow;
    const std::size_t base = (c * h + 2 * y) * w + 2 * x;
    if (idx != base && idx != base + 1 && idx != base + w && idx != base + w + 1) {
      throw std::out_of_range("maxpool_backward: index " + std::to_string(idx) +
                              " outside window of output " + std::to_string(o));
    }
    out[idx] += grad[o];
  }
  return out;
}

Tensor fc_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw ShapeError("fc: weights must be rank 2, got " + to_string(weights.shape()));
  const std::size_t out_n = weights.dim(0), in_n = weights.dim(1);
  if (x.size() != in_n) {
    throw ShapeError("fc: input has " + std::to_string(x.size()) + " elements, weights " +
                     to_string(weights.shape()) + " expect " + std::to_string(in_n));
  }
  if (bias.size() != out_n) {
    throw ShapeError("fc: bias length " + std::to_string(bias.size()) + " != " + std::to_string(out_n));
  }
  Tensor y({out_n});
  Eigen::Map<const RowMatrix> w(weights.raw(), static_cast<Eigen::Index>(out_n),
                                static_cast<Eigen::Index>(in_n));
  Eigen::Map<const Eigen::VectorXf> xv(x.raw(), static_cast<Eigen::Index>(in_n));
  Eigen::Map<const Eigen::VectorXf> bv(bias.raw(), static_cast<Eigen::Index>(out_n));
  Eigen::Map<Eigen::VectorXf> yv(y.raw(), static_cast<Eigen::Index>(out_n));
  yv.noalias() = w * xv;
  yv += bv;
  return y;
}

Tensor fc_backward_input(const Tensor& grad, const Tensor& weights) {
  if (weights.rank() != 2) throw ShapeError("fc_backward_input: weights must be rank 2");
  const std::size_t out_n = weights.dim(0), in_n = weights.dim(1);
  if (grad.size() != out_n) {
    throw ShapeError("fc_backward_input: gradient has " + std::to_string(grad.size()) +
                     " elements, weights " + to_string(weights.shape()));
  }
  Tensor g({in_n});
  Eigen::Map<const RowMatrix> w(weights.raw(), static_cast<Eigen::Index>(out_n),
                                static_cast<Eigen::Index>(in_n));
  Eigen::Map<const Eigen::VectorXf> gv(grad.raw(), static_cast<Eigen::Index>(out_n));
  Eigen::Map<Eigen::VectorXf> out(g.raw(), static_cast<Eigen::Index>(in_n));
  out.noalias() = w.transpose() * gv;
  return g;
}

Tensor softmax(const Tensor& x) {
  const float peak = max_value(x);
  Tensor y(x.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = std::exp(static_cast<double>(x[i]) - peak);
    y[i] = static_cast<float>(e);
    total += e;
  }
  for (float& v : y.data()) v = static_cast<float>(v / total);
  return y;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  float frac;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, in - 1), static_cast<float>(src - static_cast<double>(lo))};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 2) throw ShapeError("resize_bilinear: expected H x W, got " + to_string(map.shape()));
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: empty output size");
  const std::size_t w = map.dim(1);
  const auto ty = bilinear_taps(map.dim(0), out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor out({out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    const float* r0 = map.raw() + ty[y].lo * w;
    const float* r1 = map.raw() + ty[y].hi * w;
    const float fy = ty[y].frac;
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& t = tx[x];
      const float top = r0[t.lo] + (r0[t.hi] - r0[t.lo]) * t.frac;
      const float bottom = r1[t.lo] + (r1[t.hi] - r1[t.lo]) * t.frac;
      out.at(y, x) = top + (bottom - top) * fy;
    }
  }
  return out;
}

std::vector<float> gaussian_kernel(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) {
    throw std::invalid_argument("gaussian_kernel: size must be odd, got " + std::to_string(size));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const auto center = static_cast<double>(size / 2);
  std::vector<double> taps(size);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[i];
  }
  std::vector<float> out(size);
  for (std::size_t i = 0; i < size; ++i) out[i] = static_cast<float>(taps[i] / total);
  return out;
}

Tensor gaussian_blur(const Tensor& map, std::size_t size, double sigma) {
  if (map.rank() != 2) throw ShapeError("gaussian_blur: expected H x W, got " + to_string(map.shape()));
  const auto taps = gaussian_kernel(size, sigma);
  const auto h = static_cast<std::ptrdiff_t>(map.dim(0));
  const auto w = static_cast<std::ptrdiff_t>(map.dim(1));
  const auto radius = static_cast<std::ptrdiff_t>(size / 2);
  auto clamp_to = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };

  Tensor horizontal(map.shape());
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    const float* row = map.raw() + y * w;
    float* dst = horizontal.raw() + y * w;
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += static_cast<double>(taps[static_cast<std::size_t>(k + radius)]) * row[clamp_to(x + k, w)];
      }
      dst[x] = static_cast<float>(acc);
    }
  }
  Tensor out(map.shape());
  std::vector<double> acc(static_cast<std::size_t>(w));
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
      const double t = taps[static_cast<std::size_t>(k + radius)];
      const float* src = horizontal.raw() + clamp_to(y + k, h) * w;
      for (std::ptrdiff_t x = 0; x < w; ++x) acc[static_cast<std::size_t>(x)] += t * src[x];
    }
    float* dst = out.raw() + y * w;
    for (std::ptrdiff_t x = 0; x < w; ++x) dst[x] = static_cast<float>(acc[static_cast<std::size_t>(x)]);
  }
  return out;
}

}  // namespace salnet
