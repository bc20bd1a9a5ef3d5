#include "racklay/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace racklay::nn {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

[[noreturn]] void shape_fail(const std::string& op, const std::string& detail) {
  throw ShapeError(op + ": " + detail);
}

struct ConvGeometry {
  int n, ci, h, w, co, k, stride, pad, ho, wo;
  int patch() const { return ci * k * k; }
  int out_cells() const { return ho * wo; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  std::ostringstream shapes;
  shapes << "x " << x.shape() << ", w " << w.shape() << ", b " << b.shape() << ", stride " << stride
         << ", pad " << pad;
  if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1) shape_fail("conv2d", "rank mismatch (" + shapes.str() + ")");
  if (w.dim(1) != x.dim(1)) shape_fail("conv2d", "input channel mismatch (" + shapes.str() + ")");
  if (w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) shape_fail("conv2d", "kernel must be square and odd (" + shapes.str() + ")");
  if (b.dim(0) != w.dim(0)) shape_fail("conv2d", "bias size mismatch (" + shapes.str() + ")");
  if (stride < 1 || pad < 0) shape_fail("conv2d", "bad stride/pad (" + shapes.str() + ")");
  const int k = w.dim(2);
  const int span_h = x.dim(2) + 2 * pad - k;
  const int span_w = x.dim(3) + 2 * pad - k;
  if (span_h < 0 || span_w < 0) shape_fail("conv2d", "kernel larger than padded input (" + shapes.str() + ")");
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), k, stride, pad, span_h / stride + 1, span_w / stride + 1};
}

// col [Ci*k*k, Ho*Wo] for one sample.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = col + (static_cast<std::size_t>(c * g.k + ky) * g.k + kx) * g.out_cells();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* x) {
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c * g.k + ky) * g.k + kx) * g.out_cells();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.wo;
          T* dst = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

void check_labels(std::span<const std::uint8_t> labels, std::size_t expected, int classes, const char* op) {
  if (labels.size() != expected) {
    shape_fail(op, "expected " + std::to_string(expected) + " labels, got " + std::to_string(labels.size()));
  }
  for (std::uint8_t l : labels) {
    if (l >= classes) shape_fail(op, "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
  }
}

template <typename T>
std::vector<T> resolve_weights(std::span<const T> w, int classes, const char* op) {
  if (w.empty()) return std::vector<T>(static_cast<std::size_t>(classes), T(1));
  if (static_cast<int>(w.size()) != classes) shape_fail(op, "class weight count mismatch");
  return {w.begin(), w.end()};
}

struct GroupedShape {
  int n, groups, classes, cells;
};

template <typename T>
GroupedShape grouped(const Tensor<T>& x, int classes, const char* op) {
  if (x.rank() != 4 || classes < 1 || x.dim(1) % classes != 0) {
    shape_fail(op, "expected [N, G*K, H, W] with K=" + std::to_string(classes) + ", got " + x.shape());
  }
  return {x.dim(0), x.dim(1) / classes, classes, x.dim(2) * x.dim(3)};
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& wv = g.value(w);
  const ConvGeometry geo = conv_geometry(xv, wv, g.value(b), stride, pad);
  Tensor<T> out({geo.n, geo.co, geo.ho, geo.wo});
  const ConstMatMap<T> wmat(wv.data(), geo.co, geo.patch());
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(g.value(b).data(), geo.co);
  std::vector<T> col(is_pointwise(geo) ? 0 : static_cast<std::size_t>(geo.patch()) * geo.out_cells());
  const std::size_t in_stride = static_cast<std::size_t>(geo.ci) * geo.h * geo.w;
  const std::size_t out_stride = static_cast<std::size_t>(geo.co) * geo.out_cells();
  for (int n = 0; n < geo.n; ++n) {
    const T* xn = xv.data() + n * in_stride;
    const T* colp = xn;
    if (!is_pointwise(geo)) {
      im2col(xn, geo, col.data());
      colp = col.data();
    }
    MatMap<T> y(out.data() + n * out_stride, geo.co, geo.out_cells());
    y.noalias() = wmat * ConstMatMap<T>(colp, geo.patch(), geo.out_cells());
    y.colwise() += bias;
  }
  return g.op(std::move(out), {x.id, w.id, b.id}, [geo](Graph<T>& gr, int self) {
    const int xi = gr.inputs(self)[0];
    const int wi = gr.inputs(self)[1];
    const int bi = gr.inputs(self)[2];
    const Tensor<T>& gy = gr.grad_buffer(self);
    const std::size_t in_stride = static_cast<std::size_t>(geo.ci) * geo.h * geo.w;
    const std::size_t out_stride = static_cast<std::size_t>(geo.co) * geo.out_cells();
    const bool need_x = gr.requires_grad(xi);
    const bool need_w = gr.requires_grad(wi);
    std::vector<T> col(static_cast<std::size_t>(geo.patch()) * geo.out_cells());
    if (gr.requires_grad(bi)) {
      Tensor<T>& gb = gr.grad_buffer(bi);
      // Plain sequential sums: Eigen's vectorized reductions peel by buffer
      // alignment, which would make the result depend on where malloc put gy.
      const std::size_t cells = geo.out_cells();
      for (int n = 0; n < geo.n; ++n) {
        for (int c = 0; c < geo.co; ++c) {
          const T* row = gy.data() + n * out_stride + c * cells;
          T acc = T(0);
          for (std::size_t i = 0; i < cells; ++i) acc += row[i];
          gb[static_cast<std::size_t>(c)] += acc;
        }
      }
    }
    if (need_w) {
      Tensor<T>& gw = gr.grad_buffer(wi);
      MatMap<T> gwm(gw.data(), geo.co, geo.patch());
      const Tensor<T>& xv = gr.value(xi);
      for (int n = 0; n < geo.n; ++n) {
        const T* xn = xv.data() + n * in_stride;
        const T* colp = xn;
        if (!is_pointwise(geo)) {
          im2col(xn, geo, col.data());
          colp = col.data();
        }
        const ConstMatMap<T> gyn(gy.data() + n * out_stride, geo.co, geo.out_cells());
        gwm.noalias() += gyn * ConstMatMap<T>(colp, geo.patch(), geo.out_cells()).transpose();
      }
    }
    if (need_x) {
      Tensor<T>& gx = gr.grad_buffer(xi);
      const ConstMatMap<T> wmat(gr.value(wi).data(), geo.co, geo.patch());
      for (int n = 0; n < geo.n; ++n) {
        const ConstMatMap<T> gyn(gy.data() + n * out_stride, geo.co, geo.out_cells());
        if (is_pointwise(geo)) {
          MatMap<T>(gx.data() + n * in_stride, geo.ci, geo.out_cells()).noalias() += wmat.transpose() * gyn;
        } else {
          MatMap<T> gcol(col.data(), geo.patch(), geo.out_cells());
          gcol.noalias() = wmat.transpose() * gyn;
          col2im_add(col.data(), geo, gx.data() + n * in_stride);
        }
      }
    }
  });
}

template <typename T>
Var upsample_nearest(Graph<T>& g, Var x, int factor) {
  const Tensor<T>& xv = g.value(x);
  if (xv.rank() != 4 || factor < 1) shape_fail("upsample_nearest", "expected [N, C, H, W] and factor >= 1, got " + xv.shape());
  if (factor == 1) {
    Tensor<T> copy = xv;
    return g.op(std::move(copy), {x.id}, [](Graph<T>& gr, int self) {
      const int xi = gr.inputs(self)[0];
      Tensor<T>& gx = gr.grad_buffer(xi);
      const Tensor<T>& gy = gr.grad_buffer(self);
      for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
    });
  }
  const int planes = xv.dim(0) * xv.dim(1);
  const int h = xv.dim(2);
  const int w = xv.dim(3);
  const int ho = h * factor;
  const int wo = w * factor;
  Tensor<T> out({xv.dim(0), xv.dim(1), ho, wo});
  for (int p = 0; p < planes; ++p) {
    const T* src = xv.data() + static_cast<std::size_t>(p) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(p) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      const T* srow = src + static_cast<std::size_t>(y / factor) * w;
      T* drow = dst + static_cast<std::size_t>(y) * wo;
      for (int xx = 0; xx < wo; ++xx) drow[xx] = srow[xx / factor];
    }
  }
  return g.op(std::move(out), {x.id}, [planes, h, w, factor](Graph<T>& gr, int self) {
    const int xi = gr.inputs(self)[0];
    Tensor<T>& gx = gr.grad_buffer(xi);
    const Tensor<T>& gy = gr.grad_buffer(self);
    const int ho = h * factor;
    const int wo = w * factor;
    for (int p = 0; p < planes; ++p) {
      T* dst = gx.data() + static_cast<std::size_t>(p) * h * w;
      const T* src = gy.data() + static_cast<std::size_t>(p) * ho * wo;
      for (int y = 0; y < ho; ++y) {
        T* drow = dst + static_cast<std::size_t>(y / factor) * w;
        const T* srow = src + static_cast<std::size_t>(y) * wo;
        for (int xx = 0; xx < wo; ++xx) drow[xx / factor] += srow[xx];
      }
    }
  });
}

template <typename T>
Var leaky_relu(Graph<T>& g, Var x, T slope) {
  const Tensor<T>& xv = g.value(x);
  Tensor<T> out(xv.dims());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  return g.op(std::move(out), {x.id}, [slope](Graph<T>& gr, int self) {
    const int xi = gr.inputs(self)[0];
    const Tensor<T>& xv = gr.value(xi);
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& gx = gr.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += xv[i] > T(0) ? gy[i] : slope * gy[i];
  });
}

template <typename T>
Var softmax_over_classes(Graph<T>& g, Var x, int classes) {
  const Tensor<T>& xv = g.value(x);
  const GroupedShape s = grouped(xv, classes, "softmax_over_classes");
  Tensor<T> out(xv.dims());
  const std::size_t cells = static_cast<std::size_t>(s.cells);
  for (int ng = 0; ng < s.n * s.groups; ++ng) {
    const T* in = xv.data() + static_cast<std::size_t>(ng) * classes * cells;
    T* o = out.data() + static_cast<std::size_t>(ng) * classes * cells;
    for (std::size_t c = 0; c < cells; ++c) {
      T mx = in[c];
      for (int k = 1; k < classes; ++k) mx = std::max(mx, in[k * cells + c]);
      T total = T(0);
      for (int k = 0; k < classes; ++k) {
        const T e = std::exp(in[k * cells + c] - mx);
        o[k * cells + c] = e;
        total += e;
      }
      for (int k = 0; k < classes; ++k) o[k * cells + c] /= total;
    }
  }
  return g.op(std::move(out), {x.id}, [s](Graph<T>& gr, int self) {
    const int xi = gr.inputs(self)[0];
    const Tensor<T>& y = gr.value(self);
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& gx = gr.grad_buffer(xi);
    const std::size_t cells = static_cast<std::size_t>(s.cells);
    for (int ng = 0; ng < s.n * s.groups; ++ng) {
      const std::size_t base = static_cast<std::size_t>(ng) * s.classes * cells;
      for (std::size_t c = 0; c < cells; ++c) {
        T inner = T(0);
        for (int k = 0; k < s.classes; ++k) inner += gy[base + k * cells + c] * y[base + k * cells + c];
        for (int k = 0; k < s.classes; ++k) {
          const std::size_t i = base + k * cells + c;
          gx[i] += y[i] * (gy[i] - inner);
        }
      }
    }
  });
}

template <typename T>
Var cross_entropy(Graph<T>& g, Var probs, std::span<const std::uint8_t> labels, int classes,
                  std::span<const T> class_weights) {
  const Tensor<T>& pv = g.value(probs);
  const GroupedShape s = grouped(pv, classes, "cross_entropy");
  check_labels(labels, static_cast<std::size_t>(s.n) * s.groups * s.cells, classes, "cross_entropy");
  const std::vector<T> weights = resolve_weights(class_weights, classes, "cross_entropy");
  const T tiny = std::numeric_limits<T>::min();
  const std::size_t cells = static_cast<std::size_t>(s.cells);
  T loss = T(0);
  for (int ng = 0; ng < s.n * s.groups; ++ng) {
    T channel = T(0);
    for (std::size_t c = 0; c < cells; ++c) {
      const int l = labels[static_cast<std::size_t>(ng) * cells + c];
      const T p = pv[(static_cast<std::size_t>(ng) * classes + l) * cells + c];
      channel -= weights[static_cast<std::size_t>(l)] * std::log(std::max(p, tiny));
    }
    loss += channel / static_cast<T>(cells);
  }
  std::vector<std::uint8_t> kept(labels.begin(), labels.end());
  return g.op(Tensor<T>({1}, loss), {probs.id}, [s, weights, kept = std::move(kept), tiny](Graph<T>& gr, int self) {
    const int pi = gr.inputs(self)[0];
    const Tensor<T>& pv = gr.value(pi);
    Tensor<T>& gp = gr.grad_buffer(pi);
    const T up = gr.grad_buffer(self)[0];
    const std::size_t cells = static_cast<std::size_t>(s.cells);
    const T inv_cells = T(1) / static_cast<T>(cells);
    for (int ng = 0; ng < s.n * s.groups; ++ng) {
      for (std::size_t c = 0; c < cells; ++c) {
        const int l = kept[static_cast<std::size_t>(ng) * cells + c];
        const std::size_t i = (static_cast<std::size_t>(ng) * s.classes + l) * cells + c;
        gp[i] -= up * weights[static_cast<std::size_t>(l)] * inv_cells / std::max(pv[i], tiny);
      }
    }
  });
}

template <typename T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const std::uint8_t> labels, int classes,
                          std::span<const T> class_weights) {
  const Tensor<T>& xv = g.value(logits);
  const GroupedShape s = grouped(xv, classes, "softmax_cross_entropy");
  check_labels(labels, static_cast<std::size_t>(s.n) * s.groups * s.cells, classes, "softmax_cross_entropy");
  const std::vector<T> weights = resolve_weights(class_weights, classes, "softmax_cross_entropy");
  const std::size_t cells = static_cast<std::size_t>(s.cells);
  Tensor<T> probs(xv.dims());
  T loss = T(0);
  for (int ng = 0; ng < s.n * s.groups; ++ng) {
    const std::size_t base = static_cast<std::size_t>(ng) * classes * cells;
    T channel = T(0);
    for (std::size_t c = 0; c < cells; ++c) {
      T mx = xv[base + c];
      for (int k = 1; k < classes; ++k) mx = std::max(mx, xv[base + k * cells + c]);
      T total = T(0);
      for (int k = 0; k < classes; ++k) {
        const T e = std::exp(xv[base + k * cells + c] - mx);
        probs[base + k * cells + c] = e;
        total += e;
      }
      for (int k = 0; k < classes; ++k) probs[base + k * cells + c] /= total;
      const int l = labels[static_cast<std::size_t>(ng) * cells + c];
      const T log_p = xv[base + l * cells + c] - mx - std::log(total);
      channel -= weights[static_cast<std::size_t>(l)] * log_p;
    }
    loss += channel / static_cast<T>(cells);
  }
  std::vector<std::uint8_t> kept(labels.begin(), labels.end());
  return g.op(Tensor<T>({1}, loss), {logits.id},
              [s, weights, kept = std::move(kept), probs = std::move(probs)](Graph<T>& gr, int self) {
                const int xi = gr.inputs(self)[0];
                Tensor<T>& gx = gr.grad_buffer(xi);
                const T up = gr.grad_buffer(self)[0];
                const std::size_t cells = static_cast<std::size_t>(s.cells);
                const T inv_cells = T(1) / static_cast<T>(cells);
                for (int ng = 0; ng < s.n * s.groups; ++ng) {
                  const std::size_t base = static_cast<std::size_t>(ng) * s.classes * cells;
                  for (std::size_t c = 0; c < cells; ++c) {
                    const int l = kept[static_cast<std::size_t>(ng) * cells + c];
                    const T scale = up * weights[static_cast<std::size_t>(l)] * inv_cells;
                    for (int k = 0; k < s.classes; ++k) {
                      const std::size_t i = base + k * cells + c;
                      gx[i] += scale * (probs[i] - (k == l ? T(1) : T(0)));
                    }
                  }
                }
              });
}

template <typename T>
Var lsgan_gen_loss(Graph<T>& g, Var fake_scores) {
  const Tensor<T>& f = g.value(fake_scores);
  if (f.numel() == 0) shape_fail("lsgan_gen_loss", "empty score map");
  T loss = T(0);
  for (std::size_t i = 0; i < f.numel(); ++i) loss += (f[i] - T(1)) * (f[i] - T(1));
  loss /= static_cast<T>(f.numel());
  return g.op(Tensor<T>({1}, loss), {fake_scores.id}, [](Graph<T>& gr, int self) {
    const int fi = gr.inputs(self)[0];
    const Tensor<T>& f = gr.value(fi);
    Tensor<T>& gf = gr.grad_buffer(fi);
    const T k = T(2) * gr.grad_buffer(self)[0] / static_cast<T>(f.numel());
    for (std::size_t i = 0; i < f.numel(); ++i) gf[i] += k * (f[i] - T(1));
  });
}

template <typename T>
Var lsgan_disc_loss(Graph<T>& g, Var real_scores, Var fake_scores) {
  const Tensor<T>& r = g.value(real_scores);
  const Tensor<T>& f = g.value(fake_scores);
  if (r.numel() == 0 || f.numel() == 0) shape_fail("lsgan_disc_loss", "empty score map");
  T real_term = T(0);
  for (std::size_t i = 0; i < r.numel(); ++i) real_term += (r[i] - T(1)) * (r[i] - T(1));
  T fake_term = T(0);
  for (std::size_t i = 0; i < f.numel(); ++i) fake_term += f[i] * f[i];
  const T loss = real_term / static_cast<T>(r.numel()) + fake_term / static_cast<T>(f.numel());
  return g.op(Tensor<T>({1}, loss), {real_scores.id, fake_scores.id}, [](Graph<T>& gr, int self) {
    const T up = gr.grad_buffer(self)[0];
    const int ri = gr.inputs(self)[0];
    const int fi = gr.inputs(self)[1];
    if (gr.requires_grad(ri)) {
      const Tensor<T>& r = gr.value(ri);
      Tensor<T>& g_r = gr.grad_buffer(ri);
      const T k = T(2) * up / static_cast<T>(r.numel());
      for (std::size_t i = 0; i < r.numel(); ++i) g_r[i] += k * (r[i] - T(1));
    }
    if (gr.requires_grad(fi)) {
      const Tensor<T>& f = gr.value(fi);
      Tensor<T>& g_f = gr.grad_buffer(fi);
      const T k = T(2) * up / static_cast<T>(f.numel());
      for (std::size_t i = 0; i < f.numel(); ++i) g_f[i] += k * f[i];
    }
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& av = g.value(a);
  const Tensor<T>& bv = g.value(b);
  if (av.dims() != bv.dims()) shape_fail("add", av.shape() + " vs " + bv.shape());
  Tensor<T> out(av.dims());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  return g.op(std::move(out), {a.id, b.id}, [](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    for (int in : gr.inputs(self)) {
      if (!gr.requires_grad(in)) continue;
      Tensor<T>& gi = gr.grad_buffer(in);
      for (std::size_t i = 0; i < gi.numel(); ++i) gi[i] += gy[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T factor) {
  const Tensor<T>& av = g.value(a);
  Tensor<T> out(av.dims());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * factor;
  return g.op(std::move(out), {a.id}, [factor](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& ga = gr.grad_buffer(gr.inputs(self)[0]);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gy[i] * factor;
  });
}

template <typename T>
Var sum(Graph<T>& g, Var a) {
  const Tensor<T>& av = g.value(a);
  T total = T(0);
  for (std::size_t i = 0; i < av.numel(); ++i) total += av[i];
  return g.op(Tensor<T>({1}, total), {a.id}, [](Graph<T>& gr, int self) {
    const T up = gr.grad_buffer(self)[0];
    Tensor<T>& ga = gr.grad_buffer(gr.inputs(self)[0]);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += up;
  });
}

template <typename T>
Var dot_constant(Graph<T>& g, Var a, const Tensor<T>& weights) {
  const Tensor<T>& av = g.value(a);
  if (av.numel() != weights.numel()) shape_fail("dot_constant", av.shape() + " vs " + weights.shape());
  T total = T(0);
  for (std::size_t i = 0; i < av.numel(); ++i) total += av[i] * weights[i];
  return g.op(Tensor<T>({1}, total), {a.id}, [weights](Graph<T>& gr, int self) {
    const T up = gr.grad_buffer(self)[0];
    Tensor<T>& ga = gr.grad_buffer(gr.inputs(self)[0]);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += up * weights[i];
  });
}

template <typename T>
Var reshape(Graph<T>& g, Var a, Shape dims) {
  Tensor<T> out = g.value(a).reshaped(std::move(dims));
  return g.op(std::move(out), {a.id}, [](Graph<T>& gr, int self) {
    const Tensor<T>& gy = gr.grad_buffer(self);
    Tensor<T>& ga = gr.grad_buffer(gr.inputs(self)[0]);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gy[i];
  });
}

template <typename T>
Var linear_last_axis(Graph<T>& g, Var x, Var w) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& wv = g.value(w);
  if (xv.rank() < 1 || wv.rank() != 2 || xv.dims().back() != wv.dim(0)) {
    shape_fail("linear_last_axis", "x " + xv.shape() + ", w " + wv.shape());
  }
  const int in = wv.dim(0);
  const int outw = wv.dim(1);
  const int rows = static_cast<int>(xv.numel() / static_cast<std::size_t>(in));
  Shape dims = xv.dims();
  dims.back() = outw;
  Tensor<T> out(dims);
  MatMap<T>(out.data(), rows, outw).noalias() = ConstMatMap<T>(xv.data(), rows, in) * ConstMatMap<T>(wv.data(), in, outw);
  return g.op(std::move(out), {x.id, w.id}, [rows, in, outw](Graph<T>& gr, int self) {
    const int xi = gr.inputs(self)[0];
    const int wi = gr.inputs(self)[1];
    const ConstMatMap<T> gy(gr.grad_buffer(self).data(), rows, outw);
    if (gr.requires_grad(xi)) {
      MatMap<T>(gr.grad_buffer(xi).data(), rows, in).noalias() +=
          gy * ConstMatMap<T>(gr.value(wi).data(), in, outw).transpose();
    }
    if (gr.requires_grad(wi)) {
      MatMap<T>(gr.grad_buffer(wi).data(), in, outw).noalias() +=
          ConstMatMap<T>(gr.value(xi).data(), rows, in).transpose() * gy;
    }
  });
}

template <typename T>
Var row_attention(Graph<T>& g, Var keys, Var values, Var queries, Var pos, int heads) {
  const Tensor<T>& kv = g.value(keys);
  const Tensor<T>& vv = g.value(values);
  const Tensor<T>& qv = g.value(queries);
  const Tensor<T>& pv = g.value(pos);
  const std::string shapes = "keys " + kv.shape() + ", values " + vv.shape() + ", queries " + qv.shape() +
                             ", pos " + pv.shape() + ", heads " + std::to_string(heads);
  if (kv.rank() != 4 || vv.rank() != 4 || qv.rank() != 3 || pv.rank() != 3 || heads < 1) {
    shape_fail("row_attention", "rank mismatch (" + shapes + ")");
  }
  const int n = kv.dim(0), h = kv.dim(2), w = kv.dim(3);
  if (vv.dim(0) != n || vv.dim(2) != h || vv.dim(3) != w || kv.dim(1) % heads || vv.dim(1) % heads) {
    shape_fail("row_attention", "keys/values mismatch (" + shapes + ")");
  }
  const int dk = kv.dim(1) / heads, dv = vv.dim(1) / heads, t = qv.dim(1);
  if (qv.dim(0) != heads || qv.dim(2) != dk || pv.dim(0) != heads || pv.dim(1) != t || pv.dim(2) != h) {
    shape_fail("row_attention", "queries/pos mismatch (" + shapes + ")");
  }
  const T inv = T(1) / std::sqrt(static_cast<T>(dk));
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  // Attention weights kept for backward: [n, heads, w, t, h].
  auto attn = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n) * heads * w * t * h);
  Tensor<T> out({n, heads * dv, t, w});
  RowMatrix<T> kc(dk, h), vc(dv, h), oc(t, dv);
  for (int b = 0; b < n; ++b) {
    for (int hd = 0; hd < heads; ++hd) {
      const T* kb = kv.data() + (static_cast<std::size_t>(b) * heads * dk + static_cast<std::size_t>(hd) * dk) * plane;
      const T* vb = vv.data() + (static_cast<std::size_t>(b) * heads * dv + static_cast<std::size_t>(hd) * dv) * plane;
      const ConstMatMap<T> q(qv.data() + static_cast<std::size_t>(hd) * t * dk, t, dk);
      const ConstMatMap<T> p(pv.data() + static_cast<std::size_t>(hd) * t * h, t, h);
      for (int x = 0; x < w; ++x) {
        for (int k = 0; k < dk; ++k)
          for (int y = 0; y < h; ++y) kc(k, y) = kb[k * plane + static_cast<std::size_t>(y) * w + x];
        for (int v = 0; v < dv; ++v)
          for (int y = 0; y < h; ++y) vc(v, y) = vb[v * plane + static_cast<std::size_t>(y) * w + x];
        MatMap<T> a(attn->data() + ((static_cast<std::size_t>(b) * heads + hd) * w + x) * t * h, t, h);
        a.noalias() = q * kc;
        a = a * inv + p;
        for (int r = 0; r < t; ++r) {
          const T m = a.row(r).maxCoeff();
          a.row(r) = (a.row(r).array() - m).exp();
          a.row(r) /= a.row(r).sum();
        }
        oc.noalias() = a * vc.transpose();
        T* ob = out.data() + (static_cast<std::size_t>(b) * heads * dv + static_cast<std::size_t>(hd) * dv) * t * w;
        for (int v = 0; v < dv; ++v)
          for (int r = 0; r < t; ++r) ob[(static_cast<std::size_t>(v) * t + r) * w + x] = oc(r, v);
      }
    }
  }
  return g.op(std::move(out), {keys.id, values.id, queries.id, pos.id},
              [attn, n, heads, dk, dv, t, h, w, inv, plane](Graph<T>& gr, int self) {
    const int ki = gr.inputs(self)[0], vi = gr.inputs(self)[1], qi = gr.inputs(self)[2], pi = gr.inputs(self)[3];
    const T* gy = gr.grad_buffer(self).data();
    const T* kvd = gr.value(ki).data();
    const T* vvd = gr.value(vi).data();
    const T* qvd = gr.value(qi).data();
    const bool need_k = gr.requires_grad(ki), need_v = gr.requires_grad(vi);
    const bool need_q = gr.requires_grad(qi), need_p = gr.requires_grad(pi);
    RowMatrix<T> kc(dk, h), vc(dv, h), go(t, dv), da(t, h), dkc(dk, h), dvc(dv, h);
    for (int b = 0; b < n; ++b) {
      for (int hd = 0; hd < heads; ++hd) {
        const std::size_t koff = (static_cast<std::size_t>(b) * heads * dk + static_cast<std::size_t>(hd) * dk) * plane;
        const std::size_t voff = (static_cast<std::size_t>(b) * heads * dv + static_cast<std::size_t>(hd) * dv) * plane;
        const ConstMatMap<T> q(qvd + static_cast<std::size_t>(hd) * t * dk, t, dk);
        for (int x = 0; x < w; ++x) {
          for (int k = 0; k < dk; ++k)
            for (int y = 0; y < h; ++y) kc(k, y) = kvd[koff + k * plane + static_cast<std::size_t>(y) * w + x];
          for (int v = 0; v < dv; ++v)
            for (int y = 0; y < h; ++y) vc(v, y) = vvd[voff + v * plane + static_cast<std::size_t>(y) * w + x];
          const T* ob = gy + (static_cast<std::size_t>(b) * heads * dv + static_cast<std::size_t>(hd) * dv) * t * w;
          for (int v = 0; v < dv; ++v)
            for (int r = 0; r < t; ++r) go(r, v) = ob[(static_cast<std::size_t>(v) * t + r) * w + x];
          const ConstMatMap<T> a(attn->data() + ((static_cast<std::size_t>(b) * heads + hd) * w + x) * t * h, t, h);
          if (need_v) {
            dvc.noalias() = go.transpose() * a;
            T* gv = gr.grad_buffer(vi).data() + voff;
            for (int v = 0; v < dv; ++v)
              for (int y = 0; y < h; ++y) gv[v * plane + static_cast<std::size_t>(y) * w + x] += dvc(v, y);
          }
          if (!(need_k || need_q || need_p)) continue;
          da.noalias() = go * vc;
          for (int r = 0; r < t; ++r) {
            const T dot = (a.row(r).array() * da.row(r).array()).sum();
            da.row(r) = a.row(r).array() * (da.row(r).array() - dot);
          }
          if (need_p) MatMap<T>(gr.grad_buffer(pi).data() + static_cast<std::size_t>(hd) * t * h, t, h) += da;
          if (need_q) {
            MatMap<T>(gr.grad_buffer(qi).data() + static_cast<std::size_t>(hd) * t * dk, t, dk).noalias() +=
                inv * (da * kc.transpose());
          }
          if (need_k) {
            dkc.noalias() = inv * (q.transpose() * da);
            T* gk = gr.grad_buffer(ki).data() + koff;
            for (int k = 0; k < dk; ++k)
              for (int y = 0; y < h; ++y) gk[k * plane + static_cast<std::size_t>(y) * w + x] += dkc(k, y);
          }
        }
      }
    }
  });
}

template <typename T>
Var stop_gradient(Graph<T>& g, Var x) {
  return g.constant(g.value(x));
}

#define RACKLAY_INSTANTIATE_OPS(T)                                                                   \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, int, int);                                      \
  template Var upsample_nearest<T>(Graph<T>&, Var, int);                                           \
  template Var leaky_relu<T>(Graph<T>&, Var, T);                                                   \
  template Var softmax_over_classes<T>(Graph<T>&, Var, int);                                       \
  template Var cross_entropy<T>(Graph<T>&, Var, std::span<const std::uint8_t>, int, std::span<const T>); \
  template Var softmax_cross_entropy<T>(Graph<T>&, Var, std::span<const std::uint8_t>, int,        \
                                        std::span<const T>);                                        \
  template Var lsgan_gen_loss<T>(Graph<T>&, Var);                                                  \
  template Var lsgan_disc_loss<T>(Graph<T>&, Var, Var);                                            \
  template Var add<T>(Graph<T>&, Var, Var);                                                        \
  template Var scale<T>(Graph<T>&, Var, T);                                                        \
  template Var sum<T>(Graph<T>&, Var);                                                             \
  template Var dot_constant<T>(Graph<T>&, Var, const Tensor<T>&);                                  \
  template Var reshape<T>(Graph<T>&, Var, Shape);                                                  \
  template Var linear_last_axis<T>(Graph<T>&, Var, Var);                                           \
  template Var row_attention<T>(Graph<T>&, Var, Var, Var, Var, int);                            \
  template Var stop_gradient<T>(Graph<T>&, Var);

RACKLAY_INSTANTIATE_OPS(float)
RACKLAY_INSTANTIATE_OPS(double)

#undef RACKLAY_INSTANTIATE_OPS

}  // namespace racklay::nn
