#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sdfa/nn.hpp"
#include "sdfa/rng.hpp"

// Differentiable primitives over Tensor4. Each op computes its forward value
// and, while the tape is recording, appends an exact analytic backward
// closure. Matrix-shaped work goes through Eigen GEMMs; elementwise and
// reduction work goes through Eigen array maps over the contiguous (T,V)
// blocks. Reduction order is fixed, so results are run-to-run deterministic.
namespace sdfa::nn {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapM = Eigen::Map<MatRM<S>>;
template <class S>
using CMapM = Eigen::Map<const MatRM<S>>;
template <class S>
using StridedMap = Eigen::Map<MatRM<S>, 0, Eigen::OuterStride<>>;
template <class S>
using CStridedMap = Eigen::Map<const MatRM<S>, 0, Eigen::OuterStride<>>;
template <class S>
using ArrMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <class S>
using CArrMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

// ---------------------------------------------------------------------------
// conv1x1: out[n,co,t,v] = sum_ci W[co,ci] * x[n,ci,t,v] + b[co]
// Also serves as the linear classifier head on (N,C,1,1) inputs.
// ---------------------------------------------------------------------------
template <class S>
Var<S> conv1x1(Tape<S>& tape, const Var<S>& x, Param<S>& w, Param<S>& b) {
  const Shape4 xs = x->value.shape;
  const int cout = w.rows(), cin = w.cols();
  if (cin != xs.c) {
    throw ShapeError("conv1x1: weight expects " + std::to_string(cin) +
                     " input channels, tensor has " + std::to_string(xs.c));
  }
  if (static_cast<int>(b.size()) != cout) {
    throw ShapeError("conv1x1: bias length " + std::to_string(b.size()) +
                     " != " + std::to_string(cout));
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(xs.t) * xs.v;
  const std::size_t xstride = static_cast<std::size_t>(xs.c) * cols;
  const std::size_t ostride = static_cast<std::size_t>(cout) * cols;

  Tensor4<S> outv(Shape4{xs.n, cout, xs.t, xs.v});
  {
    CMapM<S> wm(w.value.data.data(), cout, cin);
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bv(b.value.data.data(), cout);
    for (int n = 0; n < xs.n; ++n) {
      CMapM<S> xn(x->value.data.data() + n * xstride, cin, cols);
      MapM<S> on(outv.data.data() + n * ostride, cout, cols);
      on.noalias() = wm * xn;
      on.colwise() += bv;
    }
  }
  auto out = make_var(std::move(outv));

  tape.record([x, out, pw = &w, pb = &b, xs, cout, cin, cols, xstride, ostride]() {
    out->ensure_grad();
    CMapM<S> wm(pw->value.data.data(), cout, cin);
    MapM<S> dw(pw->grad.data.data(), cout, cin);
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(pb->grad.data.data(), cout);
    if (x->needs_grad) x->ensure_grad();
    for (int n = 0; n < xs.n; ++n) {
      CMapM<S> gout(out->grad.data.data() + n * ostride, cout, cols);
      CMapM<S> xn(x->value.data.data() + n * xstride, cin, cols);
      dw.noalias() += gout * xn.transpose();
      db += gout.rowwise().sum();
      if (x->needs_grad) {
        MapM<S> dx(x->grad.data.data() + n * xstride, cin, cols);
        dx.noalias() += wm.transpose() * gout;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// batchnorm over (N,T,V) per channel. Training mode uses biased batch
// statistics and refreshes the running averages; eval mode normalizes with
// the stored running statistics (constants for the gradient).
// ---------------------------------------------------------------------------
template <class S>
Var<S> batchnorm(Tape<S>& tape, const Var<S>& x, BatchNorm<S>& bn, bool training) {
  const Shape4 xs = x->value.shape;
  if (bn.channels() != xs.c) {
    throw ShapeError("batchnorm: state has " + std::to_string(bn.channels()) +
                     " channels, tensor has " + std::to_string(xs.c));
  }
  const Eigen::Index block = static_cast<Eigen::Index>(xs.t) * xs.v;
  const double m_count = static_cast<double>(xs.n) * block;

  std::vector<S> mean(xs.c), inv_std(xs.c);
  if (training) {
    for (int c = 0; c < xs.c; ++c) {
      double sum = 0.0, sumsq = 0.0;
      for (int n = 0; n < xs.n; ++n) {
        CArrMap<S> blk(&x->value.data[x->value.index(n, c, 0, 0)], block);
        sum += blk.template cast<double>().sum();
        sumsq += blk.template cast<double>().square().sum();
      }
      const double mu = sum / m_count;
      const double var = std::max(0.0, sumsq / m_count - mu * mu);
      mean[c] = static_cast<S>(mu);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(bn.epsilon)));
      bn.running_mean[c] = (S(1) - bn.momentum) * bn.running_mean[c] +
                           bn.momentum * static_cast<S>(mu);
      bn.running_var[c] = (S(1) - bn.momentum) * bn.running_var[c] +
                          bn.momentum * static_cast<S>(var);
    }
  } else {
    for (int c = 0; c < xs.c; ++c) {
      mean[c] = bn.running_mean[c];
      inv_std[c] = S(1) / std::sqrt(bn.running_var[c] + bn.epsilon);
    }
  }

  Tensor4<S> outv(xs);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      // out = a*x + b with a = gamma*inv_std, b = beta - gamma*mean*inv_std
      const S a = bn.gamma.value.data[c] * inv_std[c];
      const S b = bn.beta.value.data[c] - a * mean[c];
      CArrMap<S> p(&x->value.data[x->value.index(n, c, 0, 0)], block);
      ArrMap<S> q(&outv.data[outv.index(n, c, 0, 0)], block);
      q = p * a + b;
    }
  }
  auto out = make_var(std::move(outv));

  tape.record([x, out, pbn = &bn, xs, block, m_count, training,
               mean = std::move(mean), inv_std = std::move(inv_std)]() {
    out->ensure_grad();
    if (x->needs_grad) x->ensure_grad();
    for (int c = 0; c < xs.c; ++c) {
      const double mu = mean[c], is = inv_std[c];
      double sum_g = 0.0, sum_gx = 0.0;  // sums of dout and dout*xhat
      for (int n = 0; n < xs.n; ++n) {
        CArrMap<S> gp(&out->grad.data[out->grad.index(n, c, 0, 0)], block);
        CArrMap<S> xp(&x->value.data[x->value.index(n, c, 0, 0)], block);
        sum_g += gp.template cast<double>().sum();
        sum_gx += (gp.template cast<double>() *
                   ((xp.template cast<double>() - mu) * is)).sum();
      }
      pbn->gamma.grad.data[c] += static_cast<S>(sum_gx);
      pbn->beta.grad.data[c] += static_cast<S>(sum_g);
      if (!x->needs_grad) continue;

      const double g = pbn->gamma.value.data[c];
      if (training) {
        // dx = g*is*(dout - mean_g - xhat*mean_gx), expanded to one fused
        // a*dout + b*x + c form per channel.
        const double mean_g = sum_g / m_count;
        const double mean_gx = sum_gx / m_count;
        const S ca = static_cast<S>(g * is);
        const S cb = static_cast<S>(-g * is * is * mean_gx);
        const S cc = static_cast<S>(g * is * (is * mean_gx * mu - mean_g));
        for (int n = 0; n < xs.n; ++n) {
          CArrMap<S> gp(&out->grad.data[out->grad.index(n, c, 0, 0)], block);
          CArrMap<S> xp(&x->value.data[x->value.index(n, c, 0, 0)], block);
          ArrMap<S> dp(&x->grad.data[x->grad.index(n, c, 0, 0)], block);
          dp += gp * ca + xp * cb + cc;
        }
      } else {
        const S ca = static_cast<S>(g * is);
        for (int n = 0; n < xs.n; ++n) {
          CArrMap<S> gp(&out->grad.data[out->grad.index(n, c, 0, 0)], block);
          ArrMap<S> dp(&x->grad.data[x->grad.index(n, c, 0, 0)], block);
          dp += gp * ca;
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------
template <class S>
Var<S> relu(Tape<S>& tape, const Var<S>& x) {
  Tensor4<S> outv(x->value.shape);
  {
    CArrMap<S> p(x->value.data.data(), x->value.size());
    ArrMap<S> q(outv.data.data(), outv.size());
    q = p.max(S(0));
  }
  auto out = make_var(std::move(outv));
  tape.record([x, out]() {
    if (!x->needs_grad) return;
    out->ensure_grad();
    x->ensure_grad();
    CArrMap<S> ov(out->value.data.data(), out->value.size());
    CArrMap<S> g(out->grad.data.data(), out->grad.size());
    ArrMap<S> dx(x->grad.data.data(), x->grad.size());
    dx += (ov > S(0)).template cast<S>() * g;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Depthwise-separable temporal convolution. The depthwise stage slides a
// length-K kernel along T independently per channel (zero padding K/2, so
// stride 1 preserves T and stride 2 gives ceil(T/2)); the pointwise stage
// mixes channels with a 1x1. The joint axis is untouched. Each kernel tap is
// one strided block operation over the (T,V) plane.
// ---------------------------------------------------------------------------
template <class S>
Var<S> sep_temporal_conv(Tape<S>& tape, const Var<S>& x, Param<S>& dw,
                         Param<S>& pw, int stride) {
  const Shape4 xs = x->value.shape;
  const int k = dw.cols(), cin = xs.c, cout = pw.rows();
  if (k % 2 == 0) throw ConfigError("sep_temporal_conv: kernel must be odd, got " + std::to_string(k));
  if (stride != 1 && stride != 2) {
    throw ConfigError("sep_temporal_conv: stride must be 1 or 2, got " + std::to_string(stride));
  }
  if (dw.rows() != cin) {
    throw ShapeError("sep_temporal_conv: depthwise kernel has " +
                     std::to_string(dw.rows()) + " channels, tensor has " +
                     std::to_string(cin));
  }
  if (pw.cols() != cin) {
    throw ShapeError("sep_temporal_conv: pointwise expects " +
                     std::to_string(pw.cols()) + " channels, tensor has " +
                     std::to_string(cin));
  }
  const int t_in = xs.t, v_len = xs.v;
  const int t_out = (t_in + stride - 1) / stride;
  const int pad = k / 2;

  // Valid t_out ranges per tap: t_src = t_out*stride + kk - pad in [0, t_in).
  struct TapRange {
    int lo, len, src_row;
  };
  std::vector<TapRange> taps(k);
  for (int kk = 0; kk < k; ++kk) {
    const int off = kk - pad;
    const int lo = off < 0 ? (-off + stride - 1) / stride : 0;
    const int max_src = t_in - 1 - off;  // may be negative on very short inputs
    const int hi = max_src < 0 ? -1 : std::min(max_src / stride, t_out - 1);
    taps[kk] = {lo, hi - lo + 1, lo * stride + off};
  }

  auto mid = std::make_shared<Tensor4<S>>(Shape4{xs.n, cin, t_out, v_len});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < cin; ++c) {
      const S* kern = &dw.value.data[static_cast<std::size_t>(c) * k];
      const S* xbase = &x->value.data[x->value.index(n, c, 0, 0)];
      MapM<S> mn(&mid->data[mid->index(n, c, 0, 0)], t_out, v_len);
      for (int kk = 0; kk < k; ++kk) {
        const auto [lo, len, src] = taps[kk];
        if (len <= 0) continue;
        CStridedMap<S> xsrc(xbase + static_cast<std::size_t>(src) * v_len, len, v_len,
                            Eigen::OuterStride<>(static_cast<Eigen::Index>(stride) * v_len));
        mn.middleRows(lo, len) += kern[kk] * xsrc;
      }
    }
  }

  const Eigen::Index cols = static_cast<Eigen::Index>(t_out) * v_len;
  Tensor4<S> outv(Shape4{xs.n, cout, t_out, v_len});
  {
    CMapM<S> pwm(pw.value.data.data(), cout, cin);
    for (int n = 0; n < xs.n; ++n) {
      CMapM<S> mn(mid->data.data() + mid->index(n, 0, 0, 0), cin, cols);
      MapM<S> on(outv.data.data() + outv.index(n, 0, 0, 0), cout, cols);
      on.noalias() = pwm * mn;
    }
  }
  auto out = make_var(std::move(outv));

  tape.record([x, out, mid, pdw = &dw, ppw = &pw, xs, k, cin, cout, t_out, v_len,
               stride, cols, taps]() {
    out->ensure_grad();
    // pointwise stage
    Tensor4<S> dmid(mid->shape);
    {
      CMapM<S> pwm(ppw->value.data.data(), cout, cin);
      MapM<S> dpw(ppw->grad.data.data(), cout, cin);
      for (int n = 0; n < xs.n; ++n) {
        CMapM<S> gout(out->grad.data.data() + out->grad.index(n, 0, 0, 0), cout, cols);
        CMapM<S> mn(mid->data.data() + mid->index(n, 0, 0, 0), cin, cols);
        dpw.noalias() += gout * mn.transpose();
        MapM<S> dmn(dmid.data.data() + dmid.index(n, 0, 0, 0), cin, cols);
        dmn.noalias() = pwm.transpose() * gout;
      }
    }
    // depthwise stage
    if (x->needs_grad) x->ensure_grad();
    const Eigen::OuterStride<> src_stride(static_cast<Eigen::Index>(stride) * v_len);
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < cin; ++c) {
        const S* kern = &pdw->value.data[static_cast<std::size_t>(c) * k];
        S* dkern = &pdw->grad.data[static_cast<std::size_t>(c) * k];
        const S* xbase = &x->value.data[x->value.index(n, c, 0, 0)];
        CMapM<S> gm(&dmid.data[dmid.index(n, c, 0, 0)], t_out, v_len);
        for (int kk = 0; kk < k; ++kk) {
          const auto [lo, len, src] = taps[kk];
          if (len <= 0) continue;
          CStridedMap<S> xsrc(xbase + static_cast<std::size_t>(src) * v_len, len,
                              v_len, src_stride);
          dkern[kk] += static_cast<S>(
              gm.middleRows(lo, len).cwiseProduct(xsrc).template cast<double>().sum());
          if (x->needs_grad) {
            StridedMap<S> dxdst(&x->grad.data[x->grad.index(n, c, 0, 0)] +
                                    static_cast<std::size_t>(src) * v_len,
                                len, v_len, src_stride);
            dxdst += kern[kk] * gm.middleRows(lo, len);
          }
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pooling. spatial_max reduces V to 1, temporal_max takes windowed maxima of
// width `stride` along T (stride 1 is the identity window), global_avg
// collapses T and V. Max backward routes to the argmax, ties to the lowest
// index; avg backward spreads uniformly.
// ---------------------------------------------------------------------------
enum class PoolKind { spatial_max, temporal_max, global_avg };

template <class S>
Var<S> pool(Tape<S>& tape, const Var<S>& x, PoolKind kind, int stride = 1) {
  const Shape4 xs = x->value.shape;
  if (kind == PoolKind::spatial_max) {
    Tensor4<S> outv(Shape4{xs.n, xs.c, xs.t, 1});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(outv.size());
    std::size_t o = 0;
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c)
        for (int t = 0; t < xs.t; ++t, ++o) {
          const S* row = &x->value.data[x->value.index(n, c, t, 0)];
          int best = 0;
          for (int v = 1; v < xs.v; ++v)
            if (row[v] > row[best]) best = v;
          outv.data[o] = row[best];
          (*argmax)[o] = best;
        }
    auto out = make_var(std::move(outv));
    tape.record([x, out, argmax, xs]() {
      if (!x->needs_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      std::size_t o = 0;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
          for (int t = 0; t < xs.t; ++t, ++o)
            x->grad.data[x->grad.index(n, c, t, (*argmax)[o])] += out->grad.data[o];
    });
    return out;
  }

  if (kind == PoolKind::temporal_max) {
    if (stride < 1) throw ConfigError("pool: temporal_max stride must be >= 1");
    const int t_out = (xs.t + stride - 1) / stride;
    Tensor4<S> outv(Shape4{xs.n, xs.c, t_out, xs.v});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(outv.size());
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const S* xb = &x->value.data[x->value.index(n, c, 0, 0)];
        S* ob = &outv.data[outv.index(n, c, 0, 0)];
        std::int32_t* ab = &(*argmax)[outv.index(n, c, 0, 0)];
        for (int to = 0; to < t_out; ++to) {
          const int t0 = to * stride;
          const int t1 = std::min(t0 + stride, xs.t);
          S* orow = ob + static_cast<std::size_t>(to) * xs.v;
          std::int32_t* arow = ab + static_cast<std::size_t>(to) * xs.v;
          const S* xrow = xb + static_cast<std::size_t>(t0) * xs.v;
          for (int v = 0; v < xs.v; ++v) {
            orow[v] = xrow[v];
            arow[v] = t0;
          }
          for (int t = t0 + 1; t < t1; ++t) {
            const S* cand = xb + static_cast<std::size_t>(t) * xs.v;
            for (int v = 0; v < xs.v; ++v) {
              if (cand[v] > orow[v]) {
                orow[v] = cand[v];
                arow[v] = t;
              }
            }
          }
        }
      }
    auto out = make_var(std::move(outv));
    tape.record([x, out, argmax, xs, t_out]() {
      if (!x->needs_grad) return;
      out->ensure_grad();
      x->ensure_grad();
      std::size_t o = 0;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
          for (int to = 0; to < t_out; ++to)
            for (int v = 0; v < xs.v; ++v, ++o)
              x->grad.data[x->grad.index(n, c, (*argmax)[o], v)] += out->grad.data[o];
    });
    return out;
  }

  // global_avg
  const Eigen::Index block = static_cast<Eigen::Index>(xs.t) * xs.v;
  Tensor4<S> outv(Shape4{xs.n, xs.c, 1, 1});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      CArrMap<S> p(&x->value.data[x->value.index(n, c, 0, 0)], block);
      outv.at(n, c, 0, 0) =
          static_cast<S>(p.template cast<double>().sum() / static_cast<double>(block));
    }
  auto out = make_var(std::move(outv));
  tape.record([x, out, xs, block]() {
    if (!x->needs_grad) return;
    out->ensure_grad();
    x->ensure_grad();
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < xs.c; ++c) {
        const S g = out->grad.at(n, c, 0, 0) / static_cast<S>(block);
        ArrMap<S> dp(&x->grad.data[x->grad.index(n, c, 0, 0)], block);
        dp += g;
      }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Joint aggregation: out[n,c,t,i] = sum_j (Ahat (x) M)[i,j] * x[n,c,t,j].
// The modulation is optional and comes in two flavors: a full VxV matrix, or
// a single scalar gate multiplying the whole adjacency. Its gradient is
// d(M[i,j]) = Ahat[i,j] * sum_{n,c,t} dout[...,i] * x[...,j] (summed over
// i,j as well for the scalar form), so zeros of the support never receive
// gradient.
// ---------------------------------------------------------------------------
template <class S>
Var<S> joint_aggregate(Tape<S>& tape, const Var<S>& x, const std::vector<S>& ahat,
                       Param<S>* modulation) {
  const Shape4 xs = x->value.shape;
  const int v_len = xs.v;
  if (ahat.size() != static_cast<std::size_t>(v_len) * v_len) {
    throw ShapeError("joint_aggregate: adjacency is not " + std::to_string(v_len) +
                     "x" + std::to_string(v_len));
  }
  const bool scalar_gate = modulation != nullptr && modulation->size() == 1;
  if (modulation != nullptr && !scalar_gate &&
      (modulation->rows() != v_len || modulation->cols() != v_len)) {
    throw ShapeError("joint_aggregate: modulation shape mismatch");
  }

  MatRM<S> eff(v_len, v_len);
  for (int i = 0; i < v_len; ++i)
    for (int j = 0; j < v_len; ++j) {
      S m = S(1);
      if (modulation != nullptr) {
        m = scalar_gate ? modulation->value.data[0] : modulation->m(i, j);
      }
      eff(i, j) = ahat[i * v_len + j] * m;
    }

  const Eigen::Index rows = static_cast<Eigen::Index>(xs.c) * xs.t;
  const std::size_t stride = static_cast<std::size_t>(rows) * v_len;
  Tensor4<S> outv(xs);
  for (int n = 0; n < xs.n; ++n) {
    CMapM<S> xn(x->value.data.data() + n * stride, rows, v_len);
    MapM<S> on(outv.data.data() + n * stride, rows, v_len);
    on.noalias() = xn * eff.transpose();
  }
  auto out = make_var(std::move(outv));

  tape.record([x, out, eff = std::move(eff), ahat, modulation, scalar_gate, xs,
               rows, stride, v_len]() {
    out->ensure_grad();
    if (x->needs_grad) x->ensure_grad();
    MatRM<S> gsum;
    if (modulation != nullptr) gsum = MatRM<S>::Zero(v_len, v_len);
    for (int n = 0; n < xs.n; ++n) {
      CMapM<S> gout(out->grad.data.data() + n * stride, rows, v_len);
      CMapM<S> xn(x->value.data.data() + n * stride, rows, v_len);
      if (x->needs_grad) {
        MapM<S> dx(x->grad.data.data() + n * stride, rows, v_len);
        dx.noalias() += gout * eff;
      }
      if (modulation != nullptr) gsum.noalias() += gout.transpose() * xn;
    }
    if (modulation != nullptr) {
      if (scalar_gate) {
        double acc = 0.0;
        for (int i = 0; i < v_len; ++i)
          for (int j = 0; j < v_len; ++j)
            acc += static_cast<double>(ahat[i * v_len + j]) * gsum(i, j);
        modulation->grad.data[0] += static_cast<S>(acc);
      } else {
        for (int i = 0; i < v_len; ++i)
          for (int j = 0; j < v_len; ++j)
            modulation->grad.data[static_cast<std::size_t>(i) * v_len + j] +=
                ahat[i * v_len + j] * gsum(i, j);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise add and a broadcast along the joint axis (for the pooled
// residual paths).
// ---------------------------------------------------------------------------
template <class S>
Var<S> add(Tape<S>& tape, const Var<S>& a, const Var<S>& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor4<S> outv(a->value.shape);
  {
    CArrMap<S> am(a->value.data.data(), a->value.size());
    CArrMap<S> bm(b->value.data.data(), b->value.size());
    ArrMap<S> om(outv.data.data(), outv.size());
    om = am + bm;
  }
  auto out = make_var(std::move(outv));
  tape.record([a, b, out]() {
    out->ensure_grad();
    CArrMap<S> g(out->grad.data.data(), out->grad.size());
    for (const Var<S>& side : {a, b}) {
      if (!side->needs_grad) continue;
      side->ensure_grad();
      ArrMap<S> d(side->grad.data.data(), side->grad.size());
      d += g;
    }
  });
  return out;
}

template <class S>
Var<S> broadcast_joints(Tape<S>& tape, const Var<S>& x, int v_len) {
  const Shape4 xs = x->value.shape;
  if (xs.v != 1) throw ShapeError("broadcast_joints: input joint axis must be 1");
  Tensor4<S> outv(Shape4{xs.n, xs.c, xs.t, v_len});
  const std::size_t rows = outv.size() / v_len;
  for (std::size_t r = 0; r < rows; ++r) {
    ArrMap<S>(&outv.data[r * v_len], v_len).setConstant(x->value.data[r]);
  }
  auto out = make_var(std::move(outv));
  tape.record([x, out, rows, v_len]() {
    if (!x->needs_grad) return;
    out->ensure_grad();
    x->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      x->grad.data[r] += CArrMap<S>(&out->grad.data[r * v_len], v_len).sum();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over (N,K,1,1) logits, max-subtraction stabilized.
// Loss is the batch mean of -log p[label].
// ---------------------------------------------------------------------------
template <class S>
struct LossResult {
  Var<S> loss;       // scalar node
  Tensor4<S> probs;  // (N,K,1,1) softmax probabilities
};

template <class S>
LossResult<S> softmax_cross_entropy(Tape<S>& tape, const Var<S>& logits,
                                    const std::vector<int>& labels) {
  const Shape4 ls = logits->value.shape;
  if (ls.t != 1 || ls.v != 1) {
    throw ShapeError("softmax_cross_entropy: logits must be (N,K,1,1), got " + ls.str());
  }
  const int n_count = ls.n, k_count = ls.c;
  if (static_cast<int>(labels.size()) != n_count) {
    throw DataError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(n_count) + " samples");
  }
  for (int lab : labels) {
    if (lab < 0 || lab >= k_count) {
      throw DataError("softmax_cross_entropy: label " + std::to_string(lab) +
                      " outside [0," + std::to_string(k_count) + ")");
    }
  }

  auto probs = std::make_shared<Tensor4<S>>(ls);
  double total = 0.0;
  for (int n = 0; n < n_count; ++n) {
    const S* l = &logits->value.data[static_cast<std::size_t>(n) * k_count];
    S* p = &probs->data[static_cast<std::size_t>(n) * k_count];
    S mx = l[0];
    for (int k = 1; k < k_count; ++k) mx = std::max(mx, l[k]);
    double denom = 0.0;
    for (int k = 0; k < k_count; ++k) {
      p[k] = std::exp(l[k] - mx);
      denom += p[k];
    }
    for (int k = 0; k < k_count; ++k) p[k] = static_cast<S>(p[k] / denom);
    total += -(static_cast<double>(l[labels[n]]) - mx - std::log(denom));
  }
  Tensor4<S> lossv(Shape4{1, 1, 1, 1});
  lossv.data[0] = static_cast<S>(total / n_count);
  auto loss = make_var(std::move(lossv));

  tape.record([logits, loss, probs, labels, n_count, k_count]() {
    if (!logits->needs_grad) return;
    loss->ensure_grad();
    logits->ensure_grad();
    const S g = loss->grad.data[0] / static_cast<S>(n_count);
    for (int n = 0; n < n_count; ++n) {
      const S* p = &probs->data[static_cast<std::size_t>(n) * k_count];
      S* d = &logits->grad.data[static_cast<std::size_t>(n) * k_count];
      for (int k = 0; k < k_count; ++k) {
        d[k] += g * (p[k] - (labels[n] == k ? S(1) : S(0)));
      }
    }
  });
  return {loss, *probs};
}

// Classifier head and loss in one step: logits = W x + b, then softmax CE.
template <class S>
LossResult<S> linear_softmax_ce(Tape<S>& tape, const Var<S>& x, Param<S>& w,
                                Param<S>& b, const std::vector<int>& labels) {
  return softmax_cross_entropy(tape, conv1x1(tape, x, w, b), labels);
}

// ---------------------------------------------------------------------------
// Randomized spatio-temporal masking. During training each joint index and
// each (disjoint) frame index is zeroed independently per batch element;
// survivors are scaled by 1/keep so the activation expectation is unchanged
// and eval needs no rescale. Eval mode returns the input node untouched.
// Joint decisions are drawn first (batch-major), then frame decisions.
// ---------------------------------------------------------------------------
template <class S>
Var<S> random_st_mask(Tape<S>& tape, const Var<S>& x, double p_joint,
                      double p_frame, bool training, Rng& rng) {
  if (p_joint < 0.0 || p_joint >= 1.0 || p_frame < 0.0 || p_frame >= 1.0) {
    throw ConfigError("random_st_mask: probabilities must lie in [0,1)");
  }
  if (!training || (p_joint == 0.0 && p_frame == 0.0)) return x;

  const Shape4 xs = x->value.shape;
  const S scale = static_cast<S>(1.0 / ((1.0 - p_joint) * (1.0 - p_frame)));
  // Per batch element: a scaled-or-zero factor per joint, a keep bit per frame.
  auto joint_factor = std::make_shared<std::vector<S>>(
      static_cast<std::size_t>(xs.n) * xs.v);
  auto keep_frame = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(xs.n) * xs.t);
  for (auto& f : *joint_factor) f = rng.bernoulli(p_joint) ? S(0) : scale;
  for (auto& kf : *keep_frame) kf = rng.bernoulli(p_frame) ? 0 : 1;

  Tensor4<S> outv(xs);  // zero-initialized; dropped frames stay zero
  for (int n = 0; n < xs.n; ++n) {
    CArrMap<S> factor(&(*joint_factor)[static_cast<std::size_t>(n) * xs.v], xs.v);
    for (int c = 0; c < xs.c; ++c)
      for (int t = 0; t < xs.t; ++t) {
        if (!(*keep_frame)[static_cast<std::size_t>(n) * xs.t + t]) continue;
        CArrMap<S> p(&x->value.data[x->value.index(n, c, t, 0)], xs.v);
        ArrMap<S> q(&outv.data[outv.index(n, c, t, 0)], xs.v);
        q = p * factor;
      }
  }
  auto out = make_var(std::move(outv));

  tape.record([x, out, joint_factor, keep_frame, xs]() {
    if (!x->needs_grad) return;
    out->ensure_grad();
    x->ensure_grad();
    for (int n = 0; n < xs.n; ++n) {
      CArrMap<S> factor(&(*joint_factor)[static_cast<std::size_t>(n) * xs.v], xs.v);
      for (int c = 0; c < xs.c; ++c)
        for (int t = 0; t < xs.t; ++t) {
          if (!(*keep_frame)[static_cast<std::size_t>(n) * xs.t + t]) continue;
          CArrMap<S> gp(&out->grad.data[out->grad.index(n, c, t, 0)], xs.v);
          ArrMap<S> dp(&x->grad.data[x->grad.index(n, c, t, 0)], xs.v);
          dp += gp * factor;
        }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Block-style alternative to random_st_mask: per batch element one
// uniformly-placed window of round(p_frame*T) consecutive frames is zeroed
// (joints still drop independently). Survivors scale by the same 1/keep
// rule. Frame coverage is slightly uneven at the sequence edges; this op
// exists for the block-drop ablation, not for the main training path.
// ---------------------------------------------------------------------------
template <class S>
Var<S> block_temporal_mask(Tape<S>& tape, const Var<S>& x, double p_joint,
                           double p_frame, bool training, Rng& rng) {
  if (p_joint < 0.0 || p_joint >= 1.0 || p_frame < 0.0 || p_frame >= 1.0) {
    throw ConfigError("block_temporal_mask: probabilities must lie in [0,1)");
  }
  if (!training || (p_joint == 0.0 && p_frame == 0.0)) return x;

  const Shape4 xs = x->value.shape;
  const int block_len = static_cast<int>(std::lround(p_frame * xs.t));
  const double keep_f = 1.0 - static_cast<double>(block_len) / xs.t;
  const S scale = static_cast<S>(1.0 / ((1.0 - p_joint) * keep_f));

  auto joint_factor = std::make_shared<std::vector<S>>(
      static_cast<std::size_t>(xs.n) * xs.v);
  auto keep_frame = std::make_shared<std::vector<std::uint8_t>>(
      static_cast<std::size_t>(xs.n) * xs.t, 1);
  for (auto& f : *joint_factor) f = rng.bernoulli(p_joint) ? S(0) : scale;
  if (block_len > 0) {
    for (int n = 0; n < xs.n; ++n) {
      const int start = static_cast<int>(rng.below(xs.t - block_len + 1));
      for (int t = start; t < start + block_len; ++t) {
        (*keep_frame)[static_cast<std::size_t>(n) * xs.t + t] = 0;
      }
    }
  }

  Tensor4<S> outv(xs);
  for (int n = 0; n < xs.n; ++n) {
    CArrMap<S> factor(&(*joint_factor)[static_cast<std::size_t>(n) * xs.v], xs.v);
    for (int c = 0; c < xs.c; ++c)
      for (int t = 0; t < xs.t; ++t) {
        if (!(*keep_frame)[static_cast<std::size_t>(n) * xs.t + t]) continue;
        CArrMap<S> p(&x->value.data[x->value.index(n, c, t, 0)], xs.v);
        ArrMap<S> q(&outv.data[outv.index(n, c, t, 0)], xs.v);
        q = p * factor;
      }
  }
  auto out = make_var(std::move(outv));

  tape.record([x, out, joint_factor, keep_frame, xs]() {
    if (!x->needs_grad) return;
    out->ensure_grad();
    x->ensure_grad();
    for (int n = 0; n < xs.n; ++n) {
      CArrMap<S> factor(&(*joint_factor)[static_cast<std::size_t>(n) * xs.v], xs.v);
      for (int c = 0; c < xs.c; ++c)
        for (int t = 0; t < xs.t; ++t) {
          if (!(*keep_frame)[static_cast<std::size_t>(n) * xs.t + t]) continue;
          CArrMap<S> gp(&out->grad.data[out->grad.index(n, c, t, 0)], xs.v);
          ArrMap<S> dp(&x->grad.data[x->grad.index(n, c, t, 0)], xs.v);
          dp += gp * factor;
        }
    }
  });
  return out;
}

// Eval-time softmax without tape involvement (used by inference paths).
template <class S>
Tensor4<S> softmax_probs(const Tensor4<S>& logits) {
  Tensor4<S> probs(logits.shape);
  const int n_count = logits.shape.n;
  const int k_count = logits.shape.c;
  for (int n = 0; n < n_count; ++n) {
    const S* l = &logits.data[static_cast<std::size_t>(n) * k_count];
    S* p = &probs.data[static_cast<std::size_t>(n) * k_count];
    S mx = l[0];
    for (int k = 1; k < k_count; ++k) mx = std::max(mx, l[k]);
    double denom = 0.0;
    for (int k = 0; k < k_count; ++k) {
      p[k] = std::exp(l[k] - mx);
      denom += p[k];
    }
    for (int k = 0; k < k_count; ++k) p[k] = static_cast<S>(p[k] / denom);
  }
  return probs;
}

}  // namespace sdfa::nn
