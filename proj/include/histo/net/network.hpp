#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <thread>
#include <utility>
#include <vector>

#include "histo/errors.hpp"
#include "histo/net/tensor.hpp"
#include "histo/rng.hpp"

namespace histo::net {

template <typename T>
using RowMat =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecX = Eigen::Vector<T, Eigen::Dynamic>;

enum class LayerKind { Conv, Pool, Softmax };

struct LayerDesc {
  LayerKind kind = LayerKind::Conv;
  int kernel = 0;   // conv only, square
  int filters = 0;  // conv only
  bool same_pad = false;
  bool relu = false;
};

struct NetworkSpec {
  std::vector<LayerDesc> layers;
  int input_channels = 3;
  int num_classes = 0;
  int min_input = 1;

  int weight_layer_count() const {
    int n = 0;
    for (const auto& l : layers)
      if (l.kind == LayerKind::Conv) ++n;
    return n;
  }
};

/// The stack used throughout: four same-padded convs interleaved with
/// 2x2 pools, a valid 9x9 conv, a 1x1 conv, and a 1x1 classifier feeding
/// the softmax. width_divisor shrinks every filter bank for cheap
/// test/desk-scale variants of the same geometry.
NetworkSpec canonical_spec(int num_classes, int width_divisor = 1);

template <typename T>
struct ConvParams {
  // weight(co, j), j = (ky*kernel + kx)*in_ch + ci
  RowMat<T> weight;
  VecX<T> bias;
  int kernel = 0, in_ch = 0, out_ch = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(weight.size()) + bias.size();
  }
};

template <typename T>
struct NetworkParams {
  std::vector<ConvParams<T>> conv;

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& l : conv) total += l.count();
    return total;
  }

  void set_zero() {
    for (auto& l : conv) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.conv.resize(conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i) {
      out.conv[i].kernel = conv[i].kernel;
      out.conv[i].in_ch = conv[i].in_ch;
      out.conv[i].out_ch = conv[i].out_ch;
      out.conv[i].weight = conv[i].weight.template cast<U>();
      out.conv[i].bias = conv[i].bias.template cast<U>();
    }
    return out;
  }
};

struct Extent {
  int h = 0, w = 0;
};

/// Spatial shape recurrence. Throws InputTooSmall when the input is below
/// the network's minimum or collapses before the final layer.
inline Extent output_extent(const NetworkSpec& spec, int in_h, int in_w) {
  if (in_h < spec.min_input || in_w < spec.min_input)
    fail(ErrorCode::InputTooSmall,
         "input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
             " is below the minimum " + std::to_string(spec.min_input));
  Extent e{in_h, in_w};
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
        if (!l.same_pad) {
          e.h -= l.kernel - 1;
          e.w -= l.kernel - 1;
        }
        break;
      case LayerKind::Pool:
        e.h /= 2;
        e.w /= 2;
        break;
      case LayerKind::Softmax:
        break;
    }
    if (e.h < 1 || e.w < 1)
      fail(ErrorCode::InputTooSmall, "input collapses inside the network");
  }
  return e;
}

/// He-style initialization: N(0, sqrt(2/fan_in)) weights, zero biases,
/// fully determined by the seed.
template <typename T>
NetworkParams<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkParams<T> params;
  Rng rng(seed);
  int in_ch = spec.input_channels;
  for (const auto& l : spec.layers) {
    if (l.kind != LayerKind::Conv) continue;
    ConvParams<T> p;
    p.kernel = l.kernel;
    p.in_ch = in_ch;
    p.out_ch = l.filters;
    const int fan_in = l.kernel * l.kernel * in_ch;
    const double stddev = std::sqrt(2.0 / fan_in);
    p.weight.resize(p.out_ch, fan_in);
    for (Eigen::Index i = 0; i < p.weight.size(); ++i)
      p.weight.data()[i] = static_cast<T>(rng.gaussian() * stddev);
    p.bias = VecX<T>::Zero(p.out_ch);
    params.conv.push_back(std::move(p));
    in_ch = l.filters;
  }
  return params;
}

std::pair<NetworkSpec, NetworkParams<float>> build_network(
    int num_classes, std::uint64_t seed, int width_divisor = 1);

namespace detail {

// Rows [oy0, oy1) of the im2col matrix: one row per output position,
// column j = (ky*k + kx)*c + ci. Out-of-image taps are zero.
template <typename T>
void im2col_rows(const T* in, int h, int w, int c, int k, int pad, int oy0,
                 int oy1, int out_w, RowMat<T>& cols) {
  const Eigen::Index patch = static_cast<Eigen::Index>(k) * k * c;
  cols.resize(static_cast<Eigen::Index>(oy1 - oy0) * out_w, patch);
  for (int oy = oy0; oy < oy1; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      T* dst = cols.data() +
               (static_cast<std::size_t>(oy - oy0) * out_w + ox) * patch;
      const int sx0 = ox - pad;
      const int lo = std::max(0, -sx0);
      const int hi = std::min(k, w - sx0);
      for (int ky = 0; ky < k; ++ky) {
        const int sy = oy + ky - pad;
        T* seg = dst + static_cast<std::size_t>(ky) * k * c;
        if (sy < 0 || sy >= h) {
          std::fill(seg, seg + static_cast<std::size_t>(k) * c, T(0));
          continue;
        }
        if (lo > 0) std::fill(seg, seg + static_cast<std::size_t>(lo) * c, T(0));
        if (hi < k)
          std::fill(seg + static_cast<std::size_t>(hi) * c,
                    seg + static_cast<std::size_t>(k) * c, T(0));
        if (hi > lo)
          std::memcpy(seg + static_cast<std::size_t>(lo) * c,
                      in + (static_cast<std::size_t>(sy) * w + sx0 + lo) * c,
                      static_cast<std::size_t>(hi - lo) * c * sizeof(T));
      }
    }
  }
}

// Transpose of im2col: scatter-add the column rows back onto the image.
template <typename T>
void col2im_add_rows(const RowMat<T>& cols, T* d_in, int h, int w, int c,
                     int k, int pad, int oy0, int oy1, int out_w) {
  const Eigen::Index patch = static_cast<Eigen::Index>(k) * k * c;
  for (int oy = oy0; oy < oy1; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const T* src = cols.data() +
                     (static_cast<std::size_t>(oy - oy0) * out_w + ox) * patch;
      const int sx0 = ox - pad;
      const int lo = std::max(0, -sx0);
      const int hi = std::min(k, w - sx0);
      for (int ky = 0; ky < k; ++ky) {
        const int sy = oy + ky - pad;
        if (sy < 0 || sy >= h) continue;
        const T* seg = src + (static_cast<std::size_t>(ky) * k + lo) * c;
        T* dst = d_in + (static_cast<std::size_t>(sy) * w + sx0 + lo) * c;
        const std::size_t len = static_cast<std::size_t>(hi - lo) * c;
        for (std::size_t i = 0; i < len; ++i) dst[i] += seg[i];
      }
    }
  }
}

constexpr std::size_t kColsBudgetBytes = std::size_t(96) << 20;

template <typename T>
int conv_strip_rows(int out_w, int patch) {
  std::size_t row_bytes =
      static_cast<std::size_t>(out_w) * patch * sizeof(T);
  std::size_t rows = std::max<std::size_t>(1, kColsBudgetBytes / row_bytes);
  return static_cast<int>(std::min<std::size_t>(rows, 1 << 20));
}

template <typename T>
void conv_forward(const T* in, int h, int w, int c, const ConvParams<T>& p,
                  bool same_pad, bool relu, T* out, RowMat<T>& ws) {
  const int k = p.kernel;
  const int pad = same_pad ? (k - 1) / 2 : 0;
  const int out_h = same_pad ? h : h - k + 1;
  const int out_w = same_pad ? w : w - k + 1;
  const int patch = k * k * c;
  const int strip = conv_strip_rows<T>(out_w, patch);
  for (int oy0 = 0; oy0 < out_h; oy0 += strip) {
    const int oy1 = std::min(out_h, oy0 + strip);
    im2col_rows(in, h, w, c, k, pad, oy0, oy1, out_w, ws);
    Eigen::Map<RowMat<T>> out_map(
        out + static_cast<std::size_t>(oy0) * out_w * p.out_ch,
        static_cast<Eigen::Index>(oy1 - oy0) * out_w, p.out_ch);
    out_map.noalias() = ws * p.weight.transpose();
    out_map.rowwise() += p.bias.transpose();
    if (relu) out_map = out_map.cwiseMax(T(0));
  }
}

// d_out must already include the ReLU mask. d_in may be null when the
// input gradient is not needed (first layer).
template <typename T>
void conv_backward(const T* in, int h, int w, int c, const ConvParams<T>& p,
                   bool same_pad, const T* d_out, T* d_in,
                   ConvParams<T>& grad, RowMat<T>& ws, RowMat<T>& dcols) {
  const int k = p.kernel;
  const int pad = same_pad ? (k - 1) / 2 : 0;
  const int out_h = same_pad ? h : h - k + 1;
  const int out_w = same_pad ? w : w - k + 1;
  const int patch = k * k * c;
  if (d_in)
    std::fill(d_in, d_in + static_cast<std::size_t>(h) * w * c, T(0));
  const int strip = conv_strip_rows<T>(out_w, patch);
  for (int oy0 = 0; oy0 < out_h; oy0 += strip) {
    const int oy1 = std::min(out_h, oy0 + strip);
    const Eigen::Index rows = static_cast<Eigen::Index>(oy1 - oy0) * out_w;
    im2col_rows(in, h, w, c, k, pad, oy0, oy1, out_w, ws);
    Eigen::Map<const RowMat<T>> d_out_map(
        d_out + static_cast<std::size_t>(oy0) * out_w * p.out_ch, rows,
        p.out_ch);
    grad.weight.noalias() += d_out_map.transpose() * ws;
    grad.bias.noalias() += d_out_map.colwise().sum().transpose();
    if (d_in) {
      dcols.resize(rows, patch);
      dcols.noalias() = d_out_map * p.weight;
      col2im_add_rows(dcols, d_in, h, w, c, k, pad, oy0, oy1, out_w);
    }
  }
}

// 2x2 stride-2 max pooling, floor semantics (a trailing odd row/col is
// dropped). argmax records the window slot (row-major scan, first max).
template <typename T>
void pool_forward(const T* in, int h, int w, int c, T* out,
                  std::uint8_t* argmax) {
  const int out_h = h / 2, out_w = w / 2;
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const T* base = in + (static_cast<std::size_t>(2 * oy) * w + 2 * ox) * c;
      const T* taps[4] = {base, base + c,
                          base + static_cast<std::size_t>(w) * c,
                          base + static_cast<std::size_t>(w) * c + c};
      T* o = out + (static_cast<std::size_t>(oy) * out_w + ox) * c;
      std::uint8_t* a =
          argmax + (static_cast<std::size_t>(oy) * out_w + ox) * c;
      for (int ch = 0; ch < c; ++ch) {
        T best = taps[0][ch];
        std::uint8_t slot = 0;
        for (std::uint8_t s = 1; s < 4; ++s) {
          if (taps[s][ch] > best) {
            best = taps[s][ch];
            slot = s;
          }
        }
        o[ch] = best;
        a[ch] = slot;
      }
    }
  }
}

template <typename T>
void pool_backward(const T* d_out, const std::uint8_t* argmax, int in_h,
                   int in_w, int c, T* d_in) {
  const int out_h = in_h / 2, out_w = in_w / 2;
  std::fill(d_in, d_in + static_cast<std::size_t>(in_h) * in_w * c, T(0));
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const std::size_t o_off = (static_cast<std::size_t>(oy) * out_w + ox) * c;
      for (int ch = 0; ch < c; ++ch) {
        const std::uint8_t slot = argmax[o_off + ch];
        const int sy = 2 * oy + (slot >> 1);
        const int sx = 2 * ox + (slot & 1);
        d_in[(static_cast<std::size_t>(sy) * in_w + sx) * c + ch] +=
            d_out[o_off + ch];
      }
    }
  }
}

template <typename T>
void softmax_cells(T* data, std::size_t cells, int k) {
  for (std::size_t i = 0; i < cells; ++i) {
    T* z = data + i * k;
    T m = z[0];
    for (int j = 1; j < k; ++j) m = std::max(m, z[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      z[j] = std::exp(z[j] - m);
      sum += z[j];
    }
    for (int j = 0; j < k; ++j) z[j] /= sum;
  }
}

template <typename T>
struct SampleCache {
  std::vector<Tensor<T>> acts;  // post-activation output of every layer
  std::vector<std::vector<std::uint8_t>> pool_argmax;  // parallel to layers
};

// Runs one sample through the stack. With apply_softmax=false the softmax
// layer is skipped and the result holds logits.
template <typename T>
Tensor<T> forward_sample(const NetworkSpec& spec,
                         const NetworkParams<T>& params, const T* input,
                         int in_h, int in_w, bool apply_softmax,
                         SampleCache<T>* cache) {
  Tensor<T> cur;  // empty until first layer consumes `input` directly
  const T* cur_data = input;
  int h = in_h, w = in_w, c = spec.input_channels;
  RowMat<T> ws;
  std::size_t conv_idx = 0;
  if (cache) {
    cache->acts.clear();
    cache->pool_argmax.assign(spec.layers.size(), {});
  }
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& l = spec.layers[li];
    if (l.kind == LayerKind::Conv) {
      const ConvParams<T>& p = params.conv[conv_idx++];
      const int oh = l.same_pad ? h : h - l.kernel + 1;
      const int ow = l.same_pad ? w : w - l.kernel + 1;
      Tensor<T> next = Tensor<T>::hwc(oh, ow, p.out_ch);
      conv_forward(cur_data, h, w, c, p, l.same_pad, l.relu, next.v.data(),
                   ws);
      cur = std::move(next);
      h = oh;
      w = ow;
      c = p.out_ch;
    } else if (l.kind == LayerKind::Pool) {
      const int oh = h / 2, ow = w / 2;
      Tensor<T> next = Tensor<T>::hwc(oh, ow, c);
      std::vector<std::uint8_t> argmax(next.size());
      pool_forward(cur_data, h, w, c, next.v.data(), argmax.data());
      if (cache) cache->pool_argmax[li] = std::move(argmax);
      cur = std::move(next);
      h = oh;
      w = ow;
    } else {  // Softmax
      if (apply_softmax)
        softmax_cells(cur.v.data(), static_cast<std::size_t>(h) * w, c);
      if (cache) cache->acts.push_back(cur);
      cur_data = cur.v.data();
      continue;
    }
    if (cache) cache->acts.push_back(cur);
    cur_data = cur.v.data();
  }
  return cur;
}

// Backpropagates d_last (gradient at the last conv output, i.e. the
// logits) and accumulates parameter gradients.
template <typename T>
void backward_sample(const NetworkSpec& spec, const NetworkParams<T>& params,
                     const T* input, int in_h, int in_w,
                     const SampleCache<T>& cache, Tensor<T>& d_last,
                     NetworkParams<T>& grads) {
  RowMat<T> ws, dcols;
  Tensor<T> d_cur = std::move(d_last);

  // Collect per-layer geometry going forward so the reverse walk knows
  // every input shape.
  struct Geo {
    int h, w, c;
  };
  std::vector<Geo> in_geo(spec.layers.size());
  {
    int h = in_h, w = in_w, c = spec.input_channels;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
      const LayerDesc& l = spec.layers[li];
      in_geo[li] = {h, w, c};
      if (l.kind == LayerKind::Conv) {
        if (!l.same_pad) {
          h -= l.kernel - 1;
          w -= l.kernel - 1;
        }
        c = l.filters;
      } else if (l.kind == LayerKind::Pool) {
        h /= 2;
        w /= 2;
      }
    }
  }

  int conv_idx = static_cast<int>(params.conv.size());
  for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
    const LayerDesc& l = spec.layers[li];
    if (l.kind == LayerKind::Softmax) continue;  // fused into the loss
    const Geo g = in_geo[li];
    const T* in_act = li == 0 ? input : cache.acts[li - 1].v.data();
    if (l.kind == LayerKind::Conv) {
      --conv_idx;
      const ConvParams<T>& p = params.conv[conv_idx];
      if (l.relu) {
        const Tensor<T>& out_act = cache.acts[li];
        for (std::size_t i = 0; i < d_cur.v.size(); ++i)
          if (out_act.v[i] <= T(0)) d_cur.v[i] = T(0);
      }
      Tensor<T> d_in;
      T* d_in_ptr = nullptr;
      if (li > 0) {
        d_in = Tensor<T>::hwc(g.h, g.w, g.c);
        d_in_ptr = d_in.v.data();
      }
      conv_backward(in_act, g.h, g.w, g.c, p, l.same_pad, d_cur.v.data(),
                    d_in_ptr, grads.conv[conv_idx], ws, dcols);
      if (li == 0) return;
      d_cur = std::move(d_in);
    } else {  // Pool
      Tensor<T> d_in = Tensor<T>::hwc(g.h, g.w, g.c);
      pool_backward(d_cur.v.data(), cache.pool_argmax[li].data(), g.h, g.w,
                    g.c, d_in.v.data());
      d_cur = std::move(d_in);
    }
  }
}

}  // namespace detail

/// Dense forward pass: softmax class probabilities on the output grid.
/// Samples are processed independently (and in parallel when threads > 1),
/// so per-sample results do not depend on the batch they ride in.
template <typename T>
Tensor<T> forward(const NetworkSpec& spec, const NetworkParams<T>& params,
                  const Tensor<T>& input, int threads = 1) {
  if (input.c != spec.input_channels)
    fail(ErrorCode::ShapeMismatch, "forward: expected " +
                                       std::to_string(spec.input_channels) +
                                       " input channels");
  Extent grid = output_extent(spec, input.h, input.w);
  Tensor<T> out(input.n, grid.h, grid.w, spec.num_classes);

  auto run = [&](int i) {
    detail::SampleCache<T>* no_cache = nullptr;
    Tensor<T> probs = detail::forward_sample(
        spec, params, input.sample(i), input.h, input.w, true, no_cache);
    std::copy(probs.v.begin(), probs.v.end(), out.sample(i));
  };

  const int t = std::max(1, std::min(threads, input.n));
  if (t == 1) {
    for (int i = 0; i < input.n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (int ti = 0; ti < t; ++ti)
      pool.emplace_back([&, ti] {
        for (int i = ti; i < input.n; i += t) run(i);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

template <typename T>
struct LossGrad {
  T loss = T(0);
  NetworkParams<T> grads;
};

template <typename T>
NetworkParams<T> zero_like(const NetworkParams<T>& params) {
  NetworkParams<T> g;
  g.conv.resize(params.conv.size());
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    g.conv[i].kernel = params.conv[i].kernel;
    g.conv[i].in_ch = params.conv[i].in_ch;
    g.conv[i].out_ch = params.conv[i].out_ch;
    g.conv[i].weight = RowMat<T>::Zero(params.conv[i].weight.rows(),
                                       params.conv[i].weight.cols());
    g.conv[i].bias = VecX<T>::Zero(params.conv[i].bias.size());
  }
  return g;
}

/// Mean categorical cross-entropy over the batch plus gradients for every
/// parameter. Softmax and loss are fused (d_logits = p - onehot). The
/// batch spatial size must map to a 1x1 output grid. Gradient reduction
/// order is fixed for a given thread count.
template <typename T>
LossGrad<T> loss_and_gradient(const NetworkSpec& spec,
                              const NetworkParams<T>& params,
                              const Tensor<T>& batch,
                              const std::vector<int>& labels,
                              int threads = 1) {
  if (batch.n < 1) fail(ErrorCode::EmptyInput, "loss: empty batch");
  if (static_cast<std::size_t>(batch.n) != labels.size())
    fail(ErrorCode::LengthMismatch, "loss: batch/label count mismatch");
  Extent grid = output_extent(spec, batch.h, batch.w);
  if (grid.h != 1 || grid.w != 1)
    fail(ErrorCode::ShapeMismatch,
         "loss: inputs must reduce to a single output cell");
  const int k = spec.num_classes;
  for (int label : labels)
    if (label < 0 || label >= k)
      fail(ErrorCode::InvalidArgument, "loss: label out of range");

  const int t = std::max(1, std::min(threads, batch.n));
  std::vector<NetworkParams<T>> grads(t);
  std::vector<double> losses(t, 0.0);

  auto run_range = [&](int ti, int lo, int hi) {
    grads[ti] = zero_like(params);
    detail::SampleCache<T> cache;
    for (int i = lo; i < hi; ++i) {
      Tensor<T> logits = detail::forward_sample(
          spec, params, batch.sample(i), batch.h, batch.w, false, &cache);
      // stable log-sum-exp in double
      double m = static_cast<double>(logits.v[0]);
      for (int j = 1; j < k; ++j)
        m = std::max(m, static_cast<double>(logits.v[j]));
      double sum = 0.0;
      for (int j = 0; j < k; ++j)
        sum += std::exp(static_cast<double>(logits.v[j]) - m);
      const double lse = m + std::log(sum);
      losses[ti] += lse - static_cast<double>(logits.v[labels[i]]);

      Tensor<T> d_logits = Tensor<T>::hwc(1, 1, k);
      for (int j = 0; j < k; ++j) {
        double p = std::exp(static_cast<double>(logits.v[j]) - lse);
        d_logits.v[j] =
            static_cast<T>((p - (j == labels[i] ? 1.0 : 0.0)) / batch.n);
      }
      detail::backward_sample(spec, params, batch.sample(i), batch.h, batch.w,
                              cache, d_logits, grads[ti]);
    }
  };

  if (t == 1) {
    run_range(0, 0, batch.n);
  } else {
    std::vector<std::thread> pool;
    const int per = (batch.n + t - 1) / t;
    for (int ti = 0; ti < t; ++ti) {
      const int lo = ti * per;
      const int hi = std::min(batch.n, lo + per);
      pool.emplace_back([&, ti, lo, hi] { run_range(ti, lo, hi); });
    }
    for (auto& th : pool) th.join();
  }

  LossGrad<T> result;
  result.grads = std::move(grads[0]);
  double loss = losses[0];
  for (int ti = 1; ti < t; ++ti) {
    loss += losses[ti];
    for (std::size_t li = 0; li < result.grads.conv.size(); ++li) {
      result.grads.conv[li].weight += grads[ti].conv[li].weight;
      result.grads.conv[li].bias += grads[ti].conv[li].bias;
    }
  }
  result.loss = static_cast<T>(loss / batch.n);
  return result;
}

template <typename T>
struct AdamState {
  std::vector<ConvParams<T>> m;
  std::vector<ConvParams<T>> v;
  long long t = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

template <typename T>
AdamState<T> make_adam_state(const NetworkParams<T>& params) {
  AdamState<T> s;
  NetworkParams<T> z = zero_like(params);
  s.m = z.conv;
  s.v = zero_like(params).conv;
  return s;
}

/// Standard bias-corrected ADAM update; increments the step counter.
template <typename T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads,
               AdamState<T>& state, T lr) {
  if (params.conv.size() != grads.conv.size() ||
      params.conv.size() != state.m.size())
    fail(ErrorCode::ShapeMismatch, "adam: mismatched parameter sets");
  state.t += 1;
  const T b1c = T(1) - std::pow(state.beta1, static_cast<T>(state.t));
  const T b2c = T(1) - std::pow(state.beta2, static_cast<T>(state.t));
  for (std::size_t i = 0; i < params.conv.size(); ++i) {
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = state.beta1 * m + (T(1) - state.beta1) * g;
      v = (state.beta2 * v.array() +
           (T(1) - state.beta2) * g.array().square())
              .matrix();
      p.array() -= lr * (m.array() / b1c) /
                   ((v.array() / b2c).sqrt() + state.epsilon);
    };
    update(params.conv[i].weight, grads.conv[i].weight, state.m[i].weight,
           state.v[i].weight);
    update(params.conv[i].bias, grads.conv[i].bias, state.m[i].bias,
           state.v[i].bias);
  }
}

/// Checkpoint format "CNV1": magic, version byte, num_classes (u32 LE),
/// then per weight layer kernel dims (kh, kw, in, out as u32 LE) followed
/// by the kernel and bias as f32 LE.
void save_checkpoint(const NetworkSpec& spec, const NetworkParams<float>& params,
                     const std::filesystem::path& path);
std::pair<NetworkSpec, NetworkParams<float>> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace histo::net
