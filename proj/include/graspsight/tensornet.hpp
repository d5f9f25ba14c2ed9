#pragma once

// Minimal dense/convolutional training engine: tape-based reverse-mode
// autodiff over row-major tensors, Adam, He-uniform init, finite-difference
// gradient checking and checkpoint serialization. Single precision is the
// training type; the whole tape is templated so gradient checks can run in
// double.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graspsight/errors.hpp"
#include "graspsight/gemm.hpp"
#include "graspsight/parallel.hpp"
#include "graspsight/rng.hpp"
#include "graspsight/tensor.hpp"

namespace gs::tensornet {

template <typename T>
struct ParameterT {
  TensorT<T> value;
  TensorT<T> grad;

  ParameterT() = default;
  explicit ParameterT(TensorT<T> v) : value(std::move(v)) {
    grad = TensorT<T>::zeros(value.shape);
  }

  void zero_grad() {
    for (auto& g : grad.data) g = T(0);
  }
};

using Parameter = ParameterT<float>;

// Ordered name -> parameter map. Order is the registration order and is part
// of the determinism contract (Adam walks it in order). References returned
// by at()/add() are stable only until the next add().
template <typename T>
struct ParamTableT {
  std::vector<std::string> names;
  std::vector<ParameterT<T>> params;

  ParameterT<T>& add(const std::string& name, TensorT<T> init) {
    if (find(name) >= 0) throw shape_error("duplicate parameter name: " + name);
    names.push_back(name);
    params.emplace_back(std::move(init));
    return params.back();
  }

  int find(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return int(i);
    return -1;
  }

  ParameterT<T>& at(const std::string& name) {
    int i = find(name);
    if (i < 0) throw shape_error("unknown parameter: " + name);
    return params[size_t(i)];
  }
  const ParameterT<T>& at(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw shape_error("unknown parameter: " + name);
    return params[size_t(i)];
  }

  size_t size() const { return params.size(); }

  void zero_grad() {
    for (auto& p : params) p.zero_grad();
  }

  int64_t count_values() const {
    int64_t n = 0;
    for (auto& p : params) n += p.value.size();
    return n;
  }

  template <typename U>
  ParamTableT<U> cast() const {
    ParamTableT<U> out;
    for (size_t i = 0; i < params.size(); ++i)
      out.add(names[i], params[i].value.template cast<U>());
    return out;
  }
};

using ParamTable = ParamTableT<float>;

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

template <typename T>
class Tape {
 public:
  using Ref = int;

  Ref constant(TensorT<T> v) { return push(std::move(v), false); }

  Ref input(TensorT<T> v, bool needs_grad = false) { return push(std::move(v), needs_grad); }

  // Leaf bound to an external parameter; backward() accumulates into p.grad.
  Ref param(ParameterT<T>& p) {
    Ref r = push(p.value, true);
    nodes_[size_t(r)].bound = &p;
    return r;
  }

  const TensorT<T>& value(Ref r) const { return nodes_[size_t(r)].value; }

  const TensorT<T>& grad(Ref r) const {
    const auto& g = nodes_[size_t(r)].grad;
    if (g.data.empty()) throw std::logic_error("gradient not computed for this node");
    return g;
  }

  size_t node_count() const { return nodes_.size(); }

  // -- elementwise ----------------------------------------------------------

  Ref relu(Ref x) {
    TensorT<T> y = value(x);
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      const auto& y = nodes_[size_t(r)].value;
      for (int64_t i = 0; i < gy.size(); ++i)
        if (y[i] > T(0)) gx[i] += gy[i];
    });
    return r;
  }

  Ref sigmoid(Ref x) {
    TensorT<T> y = value(x);
    for (auto& v : y.data) v = stable_sigmoid(v);
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      const auto& y = nodes_[size_t(r)].value;
      for (int64_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
    });
    return r;
  }

  Ref add(Ref a, Ref b) {
    check_same(a, b, "add");
    TensorT<T> y = value(a);
    const auto& vb = value(b);
    for (int64_t i = 0; i < y.size(); ++i) y[i] += vb[i];
    Ref r = push_op(std::move(y), {a, b});
    set_back(r, [this, a, b, r]() {
      const auto& gy = nodes_[size_t(r)].grad;
      if (needs(a)) {
        auto& ga = grad_buf(a);
        for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (needs(b)) {
        auto& gb = grad_buf(b);
        for (int64_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
      }
    });
    return r;
  }

  Ref mul(Ref a, Ref b) {
    check_same(a, b, "mul");
    TensorT<T> y = value(a);
    const auto& vb = value(b);
    for (int64_t i = 0; i < y.size(); ++i) y[i] *= vb[i];
    Ref r = push_op(std::move(y), {a, b});
    set_back(r, [this, a, b, r]() {
      const auto& gy = nodes_[size_t(r)].grad;
      const auto& va = nodes_[size_t(a)].value;
      const auto& vb = nodes_[size_t(b)].value;
      if (needs(a)) {
        auto& ga = grad_buf(a);
        for (int64_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * vb[i];
      }
      if (needs(b)) {
        auto& gb = grad_buf(b);
        for (int64_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * va[i];
      }
    });
    return r;
  }

  Ref one_minus(Ref x) {
    TensorT<T> y = value(x);
    for (auto& v : y.data) v = T(1) - v;
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      for (int64_t i = 0; i < gy.size(); ++i) gx[i] -= gy[i];
    });
    return r;
  }

  Ref sum(Ref x) {
    T s = T(0);
    for (const auto& v : value(x).data) s += v;
    Ref r = push_op(TensorT<T>::scalar(s), {x});
    set_back(r, [this, x, r]() {
      auto& gx = grad_buf(x);
      T g = nodes_[size_t(r)].grad[0];
      for (auto& v : gx.data) v += g;
    });
    return r;
  }

  // -- structure ops --------------------------------------------------------

  Ref flatten(Ref x) {
    const auto& v = value(x);
    if (v.ndim() < 2) throw shape_error("flatten: need at least 2 dims, got " + v.shape_str());
    int n = v.dim(0);
    int rest = int(v.size() / n);
    TensorT<T> y({n, rest}, v.data);
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      for (int64_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
    return r;
  }

  Ref concat_channels(Ref a, Ref b) {
    const auto& va = value(a);
    const auto& vb = value(b);
    if (va.ndim() != 4 || vb.ndim() != 4)
      throw shape_error("concat_channels: need NCHW inputs");
    if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3))
      throw shape_error("concat_channels: incompatible shapes " + va.shape_str() + " vs " +
                        vb.shape_str());
    int n = va.dim(0), ca = va.dim(1), cb = vb.dim(1), h = va.dim(2), w = va.dim(3);
    int64_t plane = int64_t(h) * w;
    TensorT<T> y({n, ca + cb, h, w});
    for (int i = 0; i < n; ++i) {
      std::copy(va.ptr() + i * ca * plane, va.ptr() + (i + 1) * ca * plane,
                y.ptr() + i * (ca + cb) * plane);
      std::copy(vb.ptr() + i * cb * plane, vb.ptr() + (i + 1) * cb * plane,
                y.ptr() + (int64_t(i) * (ca + cb) + ca) * plane);
    }
    Ref r = push_op(std::move(y), {a, b});
    set_back(r, [this, a, b, r, n, ca, cb, plane]() {
      const auto& gy = nodes_[size_t(r)].grad;
      if (needs(a)) {
        auto& ga = grad_buf(a);
        for (int i = 0; i < n; ++i)
          for (int64_t j = 0; j < ca * plane; ++j)
            ga[i * ca * plane + j] += gy[int64_t(i) * (ca + cb) * plane + j];
      }
      if (needs(b)) {
        auto& gb = grad_buf(b);
        for (int i = 0; i < n; ++i)
          for (int64_t j = 0; j < cb * plane; ++j)
            gb[i * cb * plane + j] += gy[(int64_t(i) * (ca + cb) + ca) * plane + j];
      }
    });
    return r;
  }

  Ref slice_channel(Ref x, int c) {
    const auto& v = value(x);
    if (v.ndim() != 4) throw shape_error("slice_channel: need NCHW input");
    int n = v.dim(0), ch = v.dim(1), h = v.dim(2), w = v.dim(3);
    if (c < 0 || c >= ch) throw shape_error("slice_channel: channel out of range");
    int64_t plane = int64_t(h) * w;
    TensorT<T> y({n, 1, h, w});
    for (int i = 0; i < n; ++i)
      std::copy(v.ptr() + (int64_t(i) * ch + c) * plane, v.ptr() + (int64_t(i) * ch + c + 1) * plane,
                y.ptr() + i * plane);
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r, c, n, ch, plane]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      for (int i = 0; i < n; ++i)
        for (int64_t j = 0; j < plane; ++j)
          gx[(int64_t(i) * ch + c) * plane + j] += gy[i * plane + j];
    });
    return r;
  }

  // Broadcast each vector component to a constant HxW plane.
  Ref tile_vector_to_channels(Ref v, int h, int w) {
    const auto& x = value(v);
    if (x.ndim() != 2) throw shape_error("tile_vector_to_channels: need [N,D] input");
    int n = x.dim(0), d = x.dim(1);
    int64_t plane = int64_t(h) * w;
    TensorT<T> y({n, d, h, w});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        T val = x[int64_t(i) * d + j];
        T* dst = y.ptr() + (int64_t(i) * d + j) * plane;
        for (int64_t k = 0; k < plane; ++k) dst[k] = val;
      }
    Ref r = push_op(std::move(y), {v});
    set_back(r, [this, v, r, plane]() {
      auto& gv = grad_buf(v);
      const auto& gy = nodes_[size_t(r)].grad;
      for (int64_t i = 0; i < gv.size(); ++i) {
        T s = T(0);
        const T* src = gy.ptr() + i * plane;
        for (int64_t k = 0; k < plane; ++k) s += src[k];
        gv[i] += s;
      }
    });
    return r;
  }

  Ref maxpool2x2(Ref x) {
    const auto& v = value(x);
    if (v.ndim() != 4) throw shape_error("maxpool2x2: need NCHW input");
    int n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    if (h % 2 || w % 2)
      throw shape_error("maxpool2x2: spatial dims must be even, got " + v.shape_str());
    int oh = h / 2, ow = w / 2;
    TensorT<T> y({n, c, oh, ow});
    auto arg = std::make_shared<std::vector<uint8_t>>(size_t(y.size()));
    const T* src = v.ptr();
    T* dst = y.ptr();
    int64_t planes = int64_t(n) * c;
    for (int64_t p = 0; p < planes; ++p) {
      const T* sp = src + p * h * w;
      T* dp = dst + p * oh * ow;
      uint8_t* ap = arg->data() + p * oh * ow;
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          const T* cell = sp + (2 * i) * w + 2 * j;
          T best = cell[0];
          uint8_t bi = 0;
          if (cell[1] > best) { best = cell[1]; bi = 1; }
          if (cell[w] > best) { best = cell[w]; bi = 2; }
          if (cell[w + 1] > best) { best = cell[w + 1]; bi = 3; }
          dp[i * ow + j] = best;
          ap[i * ow + j] = bi;
        }
    }
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r, arg, h, w, oh, ow, planes]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      for (int64_t p = 0; p < planes; ++p) {
        T* gp = gx.ptr() + p * h * w;
        const T* gyp = gy.ptr() + p * oh * ow;
        const uint8_t* ap = arg->data() + p * oh * ow;
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            uint8_t a = ap[i * ow + j];
            gp[(2 * i + (a >> 1)) * w + 2 * j + (a & 1)] += gyp[i * ow + j];
          }
      }
    });
    return r;
  }

  // Nearest-neighbour 2x upsample.
  Ref upsample2x(Ref x) {
    const auto& v = value(x);
    if (v.ndim() != 4) throw shape_error("upsample2x: need NCHW input");
    int n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    TensorT<T> y({n, c, 2 * h, 2 * w});
    int64_t planes = int64_t(n) * c;
    for (int64_t p = 0; p < planes; ++p) {
      const T* sp = v.ptr() + p * h * w;
      T* dp = y.ptr() + p * 4 * h * w;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          T val = sp[i * w + j];
          T* cell = dp + (2 * i) * (2 * w) + 2 * j;
          cell[0] = val;
          cell[1] = val;
          cell[2 * w] = val;
          cell[2 * w + 1] = val;
        }
    }
    Ref r = push_op(std::move(y), {x});
    set_back(r, [this, x, r, h, w, planes]() {
      auto& gx = grad_buf(x);
      const auto& gy = nodes_[size_t(r)].grad;
      for (int64_t p = 0; p < planes; ++p) {
        T* gp = gx.ptr() + p * h * w;
        const T* gyp = gy.ptr() + p * 4 * h * w;
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            const T* cell = gyp + (2 * i) * (2 * w) + 2 * j;
            gp[i * w + j] += cell[0] + cell[1] + cell[2 * w] + cell[2 * w + 1];
          }
      }
    });
    return r;
  }

  // -- conv / dense ---------------------------------------------------------

  // Cross-correlation plus bias. x:[N,C,H,W] w:[F,C,k,k] b:[F].
  Ref conv2d(Ref x, Ref w, Ref b, int stride = 1, int pad = 0) {
    const auto& vx = value(x);
    const auto& vw = value(w);
    const auto& vb = value(b);
    if (vx.ndim() != 4) throw shape_error("conv2d: input must be NCHW, got " + vx.shape_str());
    if (vw.ndim() != 4 || vw.dim(2) != vw.dim(3))
      throw shape_error("conv2d: weight must be [F,C,k,k], got " + vw.shape_str());
    int n = vx.dim(0), c = vx.dim(1), h = vx.dim(2), iw = vx.dim(3);
    int f = vw.dim(0), k = vw.dim(2);
    if (vw.dim(1) != c)
      throw shape_error("conv2d: weight channels " + std::to_string(vw.dim(1)) +
                        " != input channels " + std::to_string(c));
    if (vb.ndim() != 1 || vb.dim(0) != f)
      throw shape_error("conv2d: bias must be [F=" + std::to_string(f) + "], got " +
                        vb.shape_str());
    if (stride < 1) throw shape_error("conv2d: stride must be >= 1");
    if ((h + 2 * pad - k) < 0 || (iw + 2 * pad - k) < 0 || (h + 2 * pad - k) % stride ||
        (iw + 2 * pad - k) % stride)
      throw shape_error("conv2d: invalid geometry H=" + std::to_string(h) +
                        " W=" + std::to_string(iw) + " k=" + std::to_string(k) +
                        " pad=" + std::to_string(pad) + " stride=" + std::to_string(stride));
    int oh = (h + 2 * pad - k) / stride + 1;
    int ow = (iw + 2 * pad - k) / stride + 1;
    int kk = c * k * k;
    int64_t ohw = int64_t(oh) * ow;

    TensorT<T> y({n, f, oh, ow});
    const T* wp = vw.ptr();
    const T* bp = vb.ptr();
    parallel_for(n, [&](int64_t s0, int64_t s1) {
      std::vector<T> cols(size_t(kk) * size_t(ohw));
      for (int64_t s = s0; s < s1; ++s) {
        im2col(vx.ptr() + s * c * h * iw, c, h, iw, k, stride, pad, oh, ow, cols.data());
        T* yp = y.ptr() + s * f * ohw;
        gemm(f, int(ohw), kk, wp, cols.data(), yp, false);
        for (int fi = 0; fi < f; ++fi) {
          T bias = bp[fi];
          T* row = yp + fi * ohw;
          for (int64_t j = 0; j < ohw; ++j) row[j] += bias;
        }
      }
    });

    Ref r = push_op(std::move(y), {x, w, b});
    set_back(r, [this, x, w, b, r, n, c, h, iw, f, k, stride, pad, oh, ow, kk, ohw]() {
      const auto& gy = nodes_[size_t(r)].grad;
      const auto& vx = nodes_[size_t(x)].value;
      const auto& vw = nodes_[size_t(w)].value;
      if (needs(b)) {
        auto& gb = grad_buf(b);
        for (int s = 0; s < n; ++s)
          for (int fi = 0; fi < f; ++fi) {
            const T* row = gy.ptr() + (int64_t(s) * f + fi) * ohw;
            T acc = T(0);
            for (int64_t j = 0; j < ohw; ++j) acc += row[j];
            gb[fi] += acc;
          }
      }
      if (needs(w)) {
        // dW accumulates over samples in index order.
        auto& gw = grad_buf(w);
        std::vector<T> cols(size_t(kk) * size_t(ohw));
        std::vector<T> colsT(size_t(kk) * size_t(ohw));
        for (int s = 0; s < n; ++s) {
          im2col(vx.ptr() + int64_t(s) * c * h * iw, c, h, iw, k, stride, pad, oh, ow,
                 cols.data());
          transpose(kk, int(ohw), cols.data(), colsT.data());
          gemm(f, kk, int(ohw), gy.ptr() + int64_t(s) * f * ohw, colsT.data(), gw.ptr(), true);
        }
      }
      if (needs(x)) {
        auto& gx = grad_buf(x);
        std::vector<T> wT(size_t(kk) * size_t(f));
        transpose(f, kk, vw.ptr(), wT.data());
        parallel_for(n, [&](int64_t s0, int64_t s1) {
          std::vector<T> dcols(size_t(kk) * size_t(ohw));
          for (int64_t s = s0; s < s1; ++s) {
            gemm(kk, int(ohw), f, wT.data(), gy.ptr() + s * f * ohw, dcols.data(), false);
            col2im_add(dcols.data(), c, h, iw, k, stride, pad, oh, ow,
                       gx.ptr() + s * c * h * iw);
          }
        });
      }
    });
    return r;
  }

  // x:[N,In] w:[Out,In] b:[Out] -> [N,Out]
  Ref dense(Ref x, Ref w, Ref b) {
    const auto& vx = value(x);
    const auto& vw = value(w);
    const auto& vb = value(b);
    if (vx.ndim() != 2) throw shape_error("dense: input must be [N,In], got " + vx.shape_str());
    if (vw.ndim() != 2) throw shape_error("dense: weight must be [Out,In], got " + vw.shape_str());
    int n = vx.dim(0), in = vx.dim(1), out = vw.dim(0);
    if (vw.dim(1) != in)
      throw shape_error("dense: weight inner dim " + std::to_string(vw.dim(1)) +
                        " != input features " + std::to_string(in));
    if (vb.ndim() != 1 || vb.dim(0) != out)
      throw shape_error("dense: bias must be [Out=" + std::to_string(out) + "], got " +
                        vb.shape_str());
    TensorT<T> y({n, out});
    std::vector<T> wT(size_t(in) * size_t(out));
    transpose(out, in, vw.ptr(), wT.data());
    gemm(n, out, in, vx.ptr(), wT.data(), y.ptr(), false);
    const T* bp = vb.ptr();
    for (int i = 0; i < n; ++i) {
      T* row = y.ptr() + int64_t(i) * out;
      for (int j = 0; j < out; ++j) row[j] += bp[j];
    }
    Ref r = push_op(std::move(y), {x, w, b});
    set_back(r, [this, x, w, b, r, n, in, out]() {
      const auto& gy = nodes_[size_t(r)].grad;
      const auto& vx = nodes_[size_t(x)].value;
      const auto& vw = nodes_[size_t(w)].value;
      if (needs(b)) {
        auto& gb = grad_buf(b);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < out; ++j) gb[j] += gy[int64_t(i) * out + j];
      }
      if (needs(w)) {
        auto& gw = grad_buf(w);
        std::vector<T> gyT(size_t(n) * size_t(out));
        transpose(n, out, gy.ptr(), gyT.data());
        gemm(out, in, n, gyT.data(), vx.ptr(), gw.ptr(), true);
      }
      if (needs(x)) {
        auto& gx = grad_buf(x);
        gemm(n, in, out, gy.ptr(), vw.ptr(), gx.ptr(), true);
      }
    });
    return r;
  }

  // -- losses ---------------------------------------------------------------

  // Mean binary cross-entropy; p clamped to [1e-7, 1-1e-7]. Clamped entries
  // get zero gradient.
  Ref bce_loss(Ref p, const TensorT<T>& labels) {
    const auto& vp = value(p);
    if (vp.size() != labels.size())
      throw shape_error("bce_loss: prediction count " + std::to_string(vp.size()) +
                        " != label count " + std::to_string(labels.size()));
    const T eps = T(1e-7);
    int64_t n = vp.size();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
      T pc = clamp_prob(vp[i], eps);
      acc += -(labels[i] * std::log(pc) + (T(1) - labels[i]) * std::log(T(1) - pc));
    }
    Ref r = push_op(TensorT<T>::scalar(acc / T(n)), {p});
    auto lab = std::make_shared<TensorT<T>>(labels);
    set_back(r, [this, p, r, lab, eps, n]() {
      auto& gp = grad_buf(p);
      const auto& vp = nodes_[size_t(p)].value;
      T g = nodes_[size_t(r)].grad[0] / T(n);
      for (int64_t i = 0; i < n; ++i) {
        T raw = vp[i];
        if (raw < eps || raw > T(1) - eps) continue;
        gp[i] += g * (raw - (*lab)[i]) / (raw * (T(1) - raw));
      }
    });
    return r;
  }

  Ref mse_loss(Ref a, Ref b) {
    check_same(a, b, "mse_loss");
    const auto& va = value(a);
    const auto& vb = value(b);
    int64_t n = va.size();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
      T d = va[i] - vb[i];
      acc += d * d;
    }
    Ref r = push_op(TensorT<T>::scalar(acc / T(n)), {a, b});
    set_back(r, [this, a, b, r, n]() {
      const auto& va = nodes_[size_t(a)].value;
      const auto& vb = nodes_[size_t(b)].value;
      T g = nodes_[size_t(r)].grad[0] * T(2) / T(n);
      if (needs(a)) {
        auto& ga = grad_buf(a);
        for (int64_t i = 0; i < n; ++i) ga[i] += g * (va[i] - vb[i]);
      }
      if (needs(b)) {
        auto& gb = grad_buf(b);
        for (int64_t i = 0; i < n; ++i) gb[i] -= g * (va[i] - vb[i]);
      }
    });
    return r;
  }

  // -- backward -------------------------------------------------------------

  void backward(Ref loss) {
    if (nodes_.empty()) throw std::logic_error("backward called before any forward pass");
    if (loss < 0 || size_t(loss) >= nodes_.size())
      throw std::logic_error("backward: invalid loss node");
    if (nodes_[size_t(loss)].value.size() != 1)
      throw shape_error("backward: loss must be scalar, got " +
                        nodes_[size_t(loss)].value.shape_str());
    auto& ln = nodes_[size_t(loss)];
    ln.grad = TensorT<T>::full(ln.value.shape, T(1));
    for (int i = loss; i >= 0; --i) {
      auto& node = nodes_[size_t(i)];
      if (node.grad.data.empty() || !node.backprop) continue;
      node.backprop();
    }
    // Flush bound leaves into their parameters.
    for (auto& node : nodes_) {
      if (node.bound && !node.grad.data.empty()) {
        auto& pg = node.bound->grad;
        for (int64_t i = 0; i < pg.size(); ++i) pg[i] += node.grad[i];
      }
    }
  }

 private:
  struct Node {
    TensorT<T> value;
    TensorT<T> grad;
    bool needs_grad = false;
    ParameterT<T>* bound = nullptr;
    std::function<void()> backprop;
  };

  std::vector<Node> nodes_;

  Ref push(TensorT<T> v, bool needs_grad) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Ref(nodes_.size() - 1);
  }

  Ref push_op(TensorT<T> v, std::initializer_list<Ref> parents) {
    bool ng = false;
    for (Ref p : parents) ng = ng || nodes_[size_t(p)].needs_grad;
    return push(std::move(v), ng);
  }

  void set_back(Ref r, std::function<void()> fn) {
    if (nodes_[size_t(r)].needs_grad) nodes_[size_t(r)].backprop = std::move(fn);
  }

  bool needs(Ref r) const { return nodes_[size_t(r)].needs_grad; }

  // Gradient accumulation buffer, allocated on first touch.
  TensorT<T>& grad_buf(Ref r) {
    auto& node = nodes_[size_t(r)];
    if (node.grad.data.empty()) node.grad = TensorT<T>::zeros(node.value.shape);
    return node.grad;
  }

  void check_same(Ref a, Ref b, const char* what) const {
    if (!value(a).same_shape(value(b)))
      throw shape_error(std::string(what) + ": shape mismatch " + value(a).shape_str() +
                        " vs " + value(b).shape_str());
  }

  static T stable_sigmoid(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    T e = std::exp(v);
    return e / (T(1) + e);
  }

  static T clamp_prob(T v, T eps) {
    if (v < eps) return eps;
    if (v > T(1) - eps) return T(1) - eps;
    return v;
  }

  static void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int oh,
                     int ow, T* cols) {
    int64_t ohw = int64_t(oh) * ow;
    for (int ci = 0; ci < c; ++ci)
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          T* row = cols + ((int64_t(ci) * k + ki) * k + kj) * ohw;
          const T* plane = x + int64_t(ci) * h * w;
          for (int oi = 0; oi < oh; ++oi) {
            int ii = oi * stride - pad + ki;
            T* dst = row + int64_t(oi) * ow;
            if (ii < 0 || ii >= h) {
              for (int oj = 0; oj < ow; ++oj) dst[oj] = T(0);
              continue;
            }
            const T* srow = plane + int64_t(ii) * w;
            for (int oj = 0; oj < ow; ++oj) {
              int jj = oj * stride - pad + kj;
              dst[oj] = (jj >= 0 && jj < w) ? srow[jj] : T(0);
            }
          }
        }
  }

  static void col2im_add(const T* cols, int c, int h, int w, int k, int stride, int pad,
                         int oh, int ow, T* x) {
    int64_t ohw = int64_t(oh) * ow;
    for (int ci = 0; ci < c; ++ci)
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          const T* row = cols + ((int64_t(ci) * k + ki) * k + kj) * ohw;
          T* plane = x + int64_t(ci) * h * w;
          for (int oi = 0; oi < oh; ++oi) {
            int ii = oi * stride - pad + ki;
            if (ii < 0 || ii >= h) continue;
            T* drow = plane + int64_t(ii) * w;
            const T* srow = row + int64_t(oi) * ow;
            for (int oj = 0; oj < ow; ++oj) {
              int jj = oj * stride - pad + kj;
              if (jj >= 0 && jj < w) drow[jj] += srow[oj];
            }
          }
        }
  }
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

template <typename T>
struct AdamStateT {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  int64_t step = 0;
  std::vector<TensorT<T>> m;
  std::vector<TensorT<T>> v;

  void bind(const ParamTableT<T>& params) {
    m.clear();
    v.clear();
    for (auto& p : params.params) {
      m.push_back(TensorT<T>::zeros(p.value.shape));
      v.push_back(TensorT<T>::zeros(p.value.shape));
    }
    step = 0;
  }
};

using AdamState = AdamStateT<float>;

// Standard Adam with bias correction.
template <typename T>
void adam_step(ParamTableT<T>& params, AdamStateT<T>& st) {
  if (st.m.size() != params.size())
    throw shape_error("adam_step: state not bound to this parameter table");
  st.step += 1;
  T b1t = T(1) - std::pow(st.beta1, T(st.step));
  T b2t = T(1) - std::pow(st.beta2, T(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params.params[i];
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (int64_t j = 0; j < p.value.size(); ++j) {
      T g = p.grad[j];
      m[j] = st.beta1 * m[j] + (T(1) - st.beta1) * g;
      v[j] = st.beta2 * v[j] + (T(1) - st.beta2) * g * g;
      T mhat = m[j] / b1t;
      T vhat = v[j] / b2t;
      p.value[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  TensorT<T> t(std::move(shape));
  double limit = std::sqrt(6.0 / double(fan_in));
  for (auto& v : t.data) v = T(rng.uniform(-limit, limit));
  return t;
}

// ---------------------------------------------------------------------------
// Gradient checking (double precision)
// ---------------------------------------------------------------------------

// build must construct a fresh tape over the CURRENT parameter values, run
// backward when asked, and return the scalar loss. Returns the max relative
// error between analytic and central-difference gradients.
double grad_check(ParamTableT<double>& params,
                  const std::function<double(bool run_backward)>& build, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::string& path);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Network descriptor
// ---------------------------------------------------------------------------

enum class LayerKind {
  conv2d,
  upsample2x,
  dense,
  relu,
  sigmoid,
  maxpool2x2,
  channel_concat,
  flatten,
  tile_vector,
};

struct LayerDesc {
  LayerKind kind;
  std::string name;  // parameter prefix for conv2d/dense, empty otherwise
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  int units = 0;
};

// Architecture id + named parameters. Forward composition lives with the
// concrete model definitions.
template <typename T>
struct NetworkT {
  std::string arch;
  int image_hw = 64;
  std::vector<LayerDesc> layers;
  ParamTableT<T> params;
};

using Network = NetworkT<float>;

}  // namespace gs::tensornet
