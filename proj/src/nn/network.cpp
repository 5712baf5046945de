#include "feddiv/nn/network.hpp"

#include <cmath>
#include <limits>

#include "feddiv/kernels/kernels.hpp"

namespace feddiv::nn {
namespace {

struct ConvGeometry {
  int in_ch, out_ch, kernel, stride, padding;
  int in_h, in_w, out_h, out_w;

  int patch() const { return in_ch * kernel * kernel; }
  int positions() const { return out_h * out_w; }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

ConvGeometry make_geometry(int in_ch, int out_ch, int kernel, int stride, int padding, const Shape& in) {
  ConvGeometry g{in_ch, out_ch, kernel, stride, padding, static_cast<int>(in[1]),
                 static_cast<int>(in[2]), 0, 0};
  g.out_h = (g.in_h + 2 * padding - kernel) / stride + 1;
  g.out_w = (g.in_w + 2 * padding - kernel) / stride + 1;
  return g;
}

// col[(c * k + ky) * k + kx][oy * out_w + ox] = x[c][oy * s - pad + ky][ox * s - pad + kx]
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const int k = g.kernel;
  const int positions = g.positions();
  for (int c = 0; c < g.in_ch; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix < 0 || ix >= g.in_w) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const int k = g.kernel;
  const int positions = g.positions();
  for (int c = 0; c < g.in_ch; ++c) {
    T* dxc = dx + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          T* dst = dxc + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> conv_forward(const ConvGeometry& g, const BasicTensor<T>& x, const BasicTensor<T>& weight,
                            const BasicTensor<T>& bias) {
  const std::size_t batch = x.dim(0);
  BasicTensor<T> out({batch, static_cast<std::size_t>(g.out_ch), static_cast<std::size_t>(g.out_h),
                      static_cast<std::size_t>(g.out_w)});
  const std::size_t in_stride = static_cast<std::size_t>(g.in_ch) * g.in_h * g.in_w;
  const std::size_t positions = static_cast<std::size_t>(g.positions());
  const std::size_t out_stride = static_cast<std::size_t>(g.out_ch) * positions;
  std::vector<T> col(g.is_pointwise() ? 0 : static_cast<std::size_t>(g.patch()) * positions);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xb = x.data() + b * in_stride;
    T* ob = out.data() + b * out_stride;
    for (int oc = 0; oc < g.out_ch; ++oc)
      std::fill(ob + oc * positions, ob + (oc + 1) * positions, bias[static_cast<std::size_t>(oc)]);
    const T* cols = xb;
    if (!g.is_pointwise()) {
      im2col(g, xb, col.data());
      cols = col.data();
    }
    kernels::gemm_nn<T>(g.out_ch, g.positions(), g.patch(), weight.data(), cols, ob);
  }
  return out;
}

// Accumulates weight/bias gradients; writes (not accumulates) dx when given.
template <typename T>
void conv_backward(const ConvGeometry& g, const BasicTensor<T>& x, const BasicTensor<T>& dout,
                   const BasicTensor<T>& weight, BasicTensor<T>& dweight, BasicTensor<T>& dbias,
                   BasicTensor<T>* dx) {
  const std::size_t batch = x.dim(0);
  const std::size_t in_stride = static_cast<std::size_t>(g.in_ch) * g.in_h * g.in_w;
  const std::size_t positions = static_cast<std::size_t>(g.positions());
  const std::size_t out_stride = static_cast<std::size_t>(g.out_ch) * positions;
  const bool pointwise = g.is_pointwise();
  std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(g.patch()) * positions);
  std::vector<T> dcol(dx && !pointwise ? col.size() : 0);
  if (dx) *dx = BasicTensor<T>(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xb = x.data() + b * in_stride;
    const T* db = dout.data() + b * out_stride;
    const T* cols = xb;
    if (!pointwise) {
      im2col(g, xb, col.data());
      cols = col.data();
    }
    kernels::gemm_nt<T>(g.out_ch, g.patch(), g.positions(), db, cols, dweight.data());
    for (int oc = 0; oc < g.out_ch; ++oc)
      dbias[static_cast<std::size_t>(oc)] += kernels::sum<T>(positions, db + oc * positions);
    if (dx) {
      T* dxb = dx->data() + b * in_stride;
      if (pointwise) {
        kernels::gemm_tn<T>(g.patch(), g.positions(), g.out_ch, weight.data(), db, dxb);
      } else {
        std::fill(dcol.begin(), dcol.end(), T{0});
        kernels::gemm_tn<T>(g.patch(), g.positions(), g.out_ch, weight.data(), db, dcol.data());
        col2im_add(g, dcol.data(), dxb);
      }
    }
  }
}

template <typename T>
BasicTensor<T> relu_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.values()) v = v > T{0} ? v : T{0};
  return y;
}

// dy masked by pre > 0 (derivative at exactly 0 is 0).
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& pre, const BasicTensor<T>& dy) {
  BasicTensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(pre[i] > T{0})) dx[i] = T{0};
  return dx;
}

struct ResidualIndex {
  std::size_t w1, w2, wp, b1, b2, bp;
};

ResidualIndex residual_index(const ResidualBlockLayer& r) {
  if (r.has_projection()) return {0, 1, 2, 3, 4, 5};
  return {0, 1, 0, 2, 3, 0};
}

template <typename T>
class Engine {
 public:
  Engine(const ModelSpec& spec, const BasicParameterSet<T>& params, const BasicTensor<T>& batch)
      : spec_(spec), params_(params), shapes_(infer_shapes(spec)) {
    if (spec.layers.empty()) throw ValidationError("model has no layers");
    const Shape& in = spec.input_shape;
    if (batch.rank() != in.size() + 1 || !std::equal(in.begin(), in.end(), batch.shape().begin() + 1))
      throw ShapeError("batch shape " + shape_to_string(batch.shape()) +
                       " does not match input shape " + shape_to_string(in) +
                       " with a leading batch axis");
    for (int index : parameterized_layers(spec))
      if (!params.has_layer(index))
        throw ShapeError("parameter set is missing layer " + std::to_string(index));
  }

  BasicTensor<T> run_forward(const BasicTensor<T>& batch, BasicTrace<T>& trace) {
    trace.activations.clear();
    trace.caches.assign(spec_.layers.size(), {});
    trace.activations.push_back(batch);
    for (std::size_t i = 0; i < spec_.layers.size(); ++i)
      trace.activations.push_back(forward_layer(i, trace.activations.back(), trace.caches[i]));
    return trace.activations.back();
  }

  // Backpropagates dlogits; fills grads and optionally the input gradient.
  void run_backward(const BasicTrace<T>& trace, BasicTensor<T> dy, BasicGradientSet<T>& grads,
                    BasicTensor<T>* input_grad) {
    for (std::size_t i = spec_.layers.size(); i-- > 0;) {
      const bool need_dx = i > 0 || input_grad != nullptr;
      dy = backward_layer(i, trace, dy, grads, need_dx);
    }
    if (input_grad) *input_grad = std::move(dy);
  }

 private:
  Shape in_shape(std::size_t i) const { return i == 0 ? spec_.input_shape : shapes_[i - 1]; }

  ConvGeometry conv_geometry(std::size_t i, int in_ch, int out_ch, int kernel, int stride, int pad) const {
    return make_geometry(in_ch, out_ch, kernel, stride, pad, in_shape(i));
  }

  BasicTensor<T> forward_layer(std::size_t i, const BasicTensor<T>& x,
                               typename BasicTrace<T>::LayerCache& cache) {
    const LayerSpec& layer = spec_.layers[i];
    const std::size_t batch = x.dim(0);
    switch (layer.type()) {
      case LayerType::dense: {
        const auto& d = std::get<DenseLayer>(layer.op);
        const auto& p = params_.layer(static_cast<int>(i));
        BasicTensor<T> y({batch, static_cast<std::size_t>(d.out_dim)});
        for (std::size_t b = 0; b < batch; ++b)
          std::copy(p[1].tensor.data(), p[1].tensor.data() + d.out_dim, y.data() + b * d.out_dim);
        kernels::gemm_nt<T>(static_cast<int>(batch), d.out_dim, d.in_dim, x.data(), p[0].tensor.data(),
                            y.data());
        return y;
      }
      case LayerType::conv2d: {
        const auto& c = std::get<Conv2dLayer>(layer.op);
        const auto& p = params_.layer(static_cast<int>(i));
        return conv_forward(conv_geometry(i, c.in_ch, c.out_ch, c.kernel, c.stride, c.padding), x,
                            p[0].tensor, p[1].tensor);
      }
      case LayerType::relu:
        return relu_forward(x);
      case LayerType::maxpool2d: {
        const auto& m = std::get<MaxPool2dLayer>(layer.op);
        return maxpool_forward(m, in_shape(i), shapes_[i], x, cache.argmax);
      }
      case LayerType::global_avg_pool: {
        const Shape& in = in_shape(i);
        const std::size_t channels = in[0], plane = in[1] * in[2];
        BasicTensor<T> y({batch, channels});
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < channels; ++c)
            y[b * channels + c] =
                kernels::sum<T>(plane, x.data() + (b * channels + c) * plane) / static_cast<T>(plane);
        return y;
      }
      case LayerType::flatten:
        return x.reshaped({batch, shapes_[i][0]});
      case LayerType::residual_block: {
        const auto& r = std::get<ResidualBlockLayer>(layer.op);
        const auto& p = params_.layer(static_cast<int>(i));
        const ResidualIndex ix = residual_index(r);
        const auto g1 = conv_geometry(i, r.in_ch, r.out_ch, 3, r.stride, 1);
        const auto g2 = make_geometry(r.out_ch, r.out_ch, 3, 1, 1, shapes_[i]);
        cache.pre1 = conv_forward(g1, x, p[ix.w1].tensor, p[ix.b1].tensor);
        cache.pre2 = conv_forward(g2, relu_forward(cache.pre1), p[ix.w2].tensor, p[ix.b2].tensor);
        BasicTensor<T> y = relu_forward(cache.pre2);
        if (r.has_projection()) {
          const auto gp = conv_geometry(i, r.in_ch, r.out_ch, 1, r.stride, 0);
          const auto skip = conv_forward(gp, x, p[ix.wp].tensor, p[ix.bp].tensor);
          for (std::size_t j = 0; j < y.size(); ++j) y[j] += skip[j];
        } else {
          for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[j];
        }
        return y;
      }
    }
    throw ValidationError("unhandled layer kind");
  }

  static BasicTensor<T> maxpool_forward(const MaxPool2dLayer& m, const Shape& in, const Shape& out,
                                        const BasicTensor<T>& x, std::vector<std::size_t>& argmax) {
    const std::size_t batch = x.dim(0);
    const std::size_t channels = in[0], ih = in[1], iw = in[2], oh = out[1], ow = out[2];
    BasicTensor<T> y({batch, channels, oh, ow});
    argmax.assign(y.size(), 0);
    std::size_t o = 0;
    for (std::size_t bc = 0; bc < batch * channels; ++bc) {
      const std::size_t base = bc * ih * iw;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
          std::size_t best = base + oy * m.stride * iw + ox * m.stride;
          T best_v = x[best];
          for (int ky = 0; ky < m.kernel; ++ky)
            for (int kx = 0; kx < m.kernel; ++kx) {
              const std::size_t idx = base + (oy * m.stride + ky) * iw + ox * m.stride + kx;
              if (x[idx] > best_v) {
                best_v = x[idx];
                best = idx;
              }
            }
          y[o] = best_v;
          argmax[o] = best;
        }
      }
    }
    return y;
  }

  BasicTensor<T> backward_layer(std::size_t i, const BasicTrace<T>& trace, const BasicTensor<T>& dy,
                                BasicGradientSet<T>& grads, bool need_dx) {
    const LayerSpec& layer = spec_.layers[i];
    const BasicTensor<T>& x = trace.activations[i];
    const auto& cache = trace.caches[i];
    const std::size_t batch = x.dim(0);
    switch (layer.type()) {
      case LayerType::dense: {
        const auto& d = std::get<DenseLayer>(layer.op);
        const auto& p = params_.layer(static_cast<int>(i));
        auto& g = grads.layer(static_cast<int>(i));
        kernels::gemm_tn<T>(d.out_dim, d.in_dim, static_cast<int>(batch), dy.data(), x.data(),
                            g[0].tensor.data());
        for (std::size_t b = 0; b < batch; ++b)
          kernels::axpy<T>(static_cast<std::size_t>(d.out_dim), T{1}, dy.data() + b * d.out_dim,
                           g[1].tensor.data());
        if (!need_dx) return {};
        BasicTensor<T> dx(x.shape());
        kernels::gemm_nn<T>(static_cast<int>(batch), d.in_dim, d.out_dim, dy.data(), p[0].tensor.data(),
                            dx.data());
        return dx;
      }
      case LayerType::conv2d: {
        const auto& c = std::get<Conv2dLayer>(layer.op);
        const auto& p = params_.layer(static_cast<int>(i));
        auto& g = grads.layer(static_cast<int>(i));
        BasicTensor<T> dx;
        conv_backward(conv_geometry(i, c.in_ch, c.out_ch, c.kernel, c.stride, c.padding), x, dy,
                      p[0].tensor, g[0].tensor, g[1].tensor, need_dx ? &dx : nullptr);
        return dx;
      }
      case LayerType::relu:
        return relu_backward(x, dy);
      case LayerType::maxpool2d: {
        BasicTensor<T> dx(x.shape());
        for (std::size_t o = 0; o < dy.size(); ++o) dx[cache.argmax[o]] += dy[o];
        return dx;
      }
      case LayerType::global_avg_pool: {
        const Shape& in = in_shape(i);
        const std::size_t channels = in[0], plane = in[1] * in[2];
        BasicTensor<T> dx(x.shape());
        const T inv = T{1} / static_cast<T>(plane);
        for (std::size_t bc = 0; bc < batch * channels; ++bc)
          std::fill(dx.data() + bc * plane, dx.data() + (bc + 1) * plane, dy[bc] * inv);
        return dx;
      }
      case LayerType::flatten:
        return dy.reshaped(x.shape());
      case LayerType::residual_block: {
        const auto& r = std::get<ResidualBlockLayer>(layer.op);
        const auto& p = params_.layer(static_cast<int>(i));
        auto& g = grads.layer(static_cast<int>(i));
        const ResidualIndex ix = residual_index(r);
        const auto g1 = conv_geometry(i, r.in_ch, r.out_ch, 3, r.stride, 1);
        const auto g2 = make_geometry(r.out_ch, r.out_ch, 3, 1, 1, shapes_[i]);
        const BasicTensor<T> dpre2 = relu_backward(cache.pre2, dy);
        BasicTensor<T> da1;
        conv_backward(g2, relu_forward(cache.pre1), dpre2, p[ix.w2].tensor, g[ix.w2].tensor,
                      g[ix.b2].tensor, &da1);
        const BasicTensor<T> dpre1 = relu_backward(cache.pre1, da1);
        BasicTensor<T> dx;
        conv_backward(g1, x, dpre1, p[ix.w1].tensor, g[ix.w1].tensor, g[ix.b1].tensor,
                      need_dx ? &dx : nullptr);
        if (r.has_projection()) {
          const auto gp = conv_geometry(i, r.in_ch, r.out_ch, 1, r.stride, 0);
          BasicTensor<T> dskip;
          conv_backward(gp, x, dy, p[ix.wp].tensor, g[ix.wp].tensor, g[ix.bp].tensor,
                        need_dx ? &dskip : nullptr);
          if (need_dx)
            for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dskip[j];
        } else if (need_dx) {
          for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dy[j];
        }
        return dx;
      }
    }
    throw ValidationError("unhandled layer kind");
  }

  const ModelSpec& spec_;
  const BasicParameterSet<T>& params_;
  std::vector<Shape> shapes_;
};

void check_labels(std::span<const int> labels, std::size_t batch, int num_classes) {
  if (labels.size() != batch)
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(batch));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ValidationError("label " + std::to_string(labels[i]) + " at position " + std::to_string(i) +
                            " outside [0, " + std::to_string(num_classes) + ")");
}

}  // namespace

template <typename T>
BasicTensor<T> forward(const ModelSpec& spec, const BasicParameterSet<T>& params,
                       const BasicTensor<T>& batch, BasicTrace<T>* trace) {
  Engine<T> engine(spec, params, batch);
  BasicTrace<T> local;
  return engine.run_forward(batch, trace ? *trace : local);
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects (batch, classes) logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  BasicTensor<T> p(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.data() + r * cols;
    T* out = p.data() + r * cols;
    const T zmax = *std::max_element(z, z + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += (out[c] = std::exp(z[c] - zmax));
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  return p;
}

template <typename T>
T cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy expects (batch, classes) logits");
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  check_labels(labels, rows, static_cast<int>(cols));
  T total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.data() + r * cols;
    const T zmax = *std::max_element(z, z + cols);
    T sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(z[c] - zmax);
    total += zmax + std::log(sum) - z[labels[r]];
  }
  return total / static_cast<T>(rows);
}

template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits) {
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.data() + r * cols;
    out[r] = static_cast<int>(std::max_element(z, z + cols) - z);
  }
  return out;
}

template <typename T>
BasicLossGrad<T> loss_and_grad(const ModelSpec& spec, const BasicParameterSet<T>& params,
                               const BasicTensor<T>& batch, std::span<const int> labels,
                               bool want_input_grad) {
  Engine<T> engine(spec, params, batch);
  const std::size_t rows = batch.dim(0);
  check_labels(labels, rows, spec.num_classes);
  BasicTrace<T> trace;
  BasicLossGrad<T> result;
  result.logits = engine.run_forward(batch, trace);
  result.loss = cross_entropy(result.logits, labels);

  BasicTensor<T> dlogits = softmax(result.logits);
  const std::size_t cols = dlogits.dim(1);
  const T inv_batch = T{1} / static_cast<T>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    dlogits[r * cols + static_cast<std::size_t>(labels[r])] -= T{1};
    for (std::size_t c = 0; c < cols; ++c) dlogits[r * cols + c] *= inv_batch;
  }

  result.grads = zeros_for<T, GradTag>(spec);
  BasicTensor<T> input_grad;
  engine.run_backward(trace, std::move(dlogits), result.grads, want_input_grad ? &input_grad : nullptr);
  if (want_input_grad) result.input_grad = std::move(input_grad);
  return result;
}

#define FEDDIV_INSTANTIATE(T)                                                                  \
  template BasicTensor<T> forward<T>(const ModelSpec&, const BasicParameterSet<T>&,            \
                                     const BasicTensor<T>&, BasicTrace<T>*);                   \
  template BasicLossGrad<T> loss_and_grad<T>(const ModelSpec&, const BasicParameterSet<T>&,    \
                                             const BasicTensor<T>&, std::span<const int>, bool); \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                                   \
  template T cross_entropy<T>(const BasicTensor<T>&, std::span<const int>);                    \
  template std::vector<int> argmax_rows<T>(const BasicTensor<T>&);

FEDDIV_INSTANTIATE(double)
FEDDIV_INSTANTIATE(float)

#undef FEDDIV_INSTANTIATE

}  // namespace feddiv::nn
