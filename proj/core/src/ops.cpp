#include "wmflow/ops.hpp"

#include <cmath>

namespace wmflow {

namespace {

struct ConvDims {
  int n, c, h, w;      // input
  int f, k;            // filters, kernel
  int oh, ow;          // output
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int padding) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw Error(ErrorCode::ShapeMismatch, "conv2d expects 4-d input and weight");
  ConvDims d;
  d.n = x.dim(0); d.c = x.dim(1); d.h = x.dim(2); d.w = x.dim(3);
  d.f = w.dim(0); d.k = w.dim(2);
  if (w.dim(1) != d.c)
    throw Error(ErrorCode::ShapeMismatch, "conv2d channel mismatch: input " + shape_str(x.shape()) +
                                              " weight " + shape_str(w.shape()));
  if (w.dim(3) != d.k) throw Error(ErrorCode::ShapeMismatch, "conv2d kernel must be square");
  if (stride < 1) throw Error(ErrorCode::BadParams, "conv2d stride must be >= 1");
  d.oh = (d.h + 2 * padding - d.k) / stride + 1;
  d.ow = (d.w + 2 * padding - d.k) / stride + 1;
  if (d.h + 2 * padding < d.k || d.w + 2 * padding < d.k || d.oh < 1 || d.ow < 1)
    throw Error(ErrorCode::ShapeMismatch, "conv2d output would be empty");
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  ConvDims d = conv_dims(x, w, stride, padding);
  if (b.size() != d.f) throw Error(ErrorCode::ShapeMismatch, "conv2d bias size mismatch");
  Tensor xr = x.to_real(), wr = w.to_real(), br = b.to_real();
  Tensor out = Tensor::zeros(Kind::Real64, {d.n, d.f, d.oh, d.ow});
  const double* px = xr.real_data();
  const double* pw = wr.real_data();
  const double* pb = br.real_data();
  double* po = out.real_data();
  const int64_t xcs = int64_t(d.h) * d.w, xns = int64_t(d.c) * xcs;
  const int64_t wcs = int64_t(d.k) * d.k, wfs = int64_t(d.c) * wcs;
  for (int n = 0; n < d.n; ++n)
    for (int f = 0; f < d.f; ++f)
      for (int oh = 0; oh < d.oh; ++oh)
        for (int ow = 0; ow < d.ow; ++ow) {
          double acc = 0.0;
          const int ih0 = oh * stride - padding, iw0 = ow * stride - padding;
          for (int c = 0; c < d.c; ++c) {
            const double* xc = px + n * xns + c * xcs;
            const double* wc = pw + f * wfs + c * wcs;
            for (int ki = 0; ki < d.k; ++ki) {
              const int ih = ih0 + ki;
              if (ih < 0 || ih >= d.h) continue;
              const double* xrow = xc + int64_t(ih) * d.w;
              const double* wrow = wc + int64_t(ki) * d.k;
              for (int kj = 0; kj < d.k; ++kj) {
                const int iw = iw0 + kj;
                if (iw < 0 || iw >= d.w) continue;
                acc += xrow[iw] * wrow[kj];
              }
            }
          }
          *po++ = acc + pb[f];
        }
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& w, int stride, int padding,
                         int in_h, int in_w) {
  const int n = grad_out.dim(0), f = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int c = w.dim(1), k = w.dim(2);
  Tensor gx = Tensor::zeros(Kind::Real64, {n, c, in_h, in_w});
  const double* pg = grad_out.real_data();
  const double* pw = w.real_data();
  double* px = gx.real_data();
  const int64_t xcs = int64_t(in_h) * in_w, xns = int64_t(c) * xcs;
  const int64_t wcs = int64_t(k) * k, wfs = int64_t(c) * wcs;
  const int64_t gcs = int64_t(oh) * ow, gns = int64_t(f) * gcs;
  for (int nn = 0; nn < n; ++nn)
    for (int ff = 0; ff < f; ++ff)
      for (int o1 = 0; o1 < oh; ++o1)
        for (int o2 = 0; o2 < ow; ++o2) {
          const double g = pg[nn * gns + ff * gcs + int64_t(o1) * ow + o2];
          if (g == 0.0) continue;
          const int ih0 = o1 * stride - padding, iw0 = o2 * stride - padding;
          for (int cc = 0; cc < c; ++cc)
            for (int ki = 0; ki < k; ++ki) {
              const int ih = ih0 + ki;
              if (ih < 0 || ih >= in_h) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int iw = iw0 + kj;
                if (iw < 0 || iw >= in_w) continue;
                px[nn * xns + cc * xcs + int64_t(ih) * in_w + iw] +=
                    g * pw[ff * wfs + cc * wcs + int64_t(ki) * k + kj];
              }
            }
        }
  return gx;
}

Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& x, int stride, int padding,
                          int kernel) {
  const int n = grad_out.dim(0), f = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int c = x.dim(1), h = x.dim(2), wdt = x.dim(3);
  Tensor gw = Tensor::zeros(Kind::Real64, {f, c, kernel, kernel});
  const double* pg = grad_out.real_data();
  const double* px = x.real_data();
  double* pw = gw.real_data();
  const int64_t xcs = int64_t(h) * wdt, xns = int64_t(c) * xcs;
  const int64_t wcs = int64_t(kernel) * kernel, wfs = int64_t(c) * wcs;
  const int64_t gcs = int64_t(oh) * ow, gns = int64_t(f) * gcs;
  for (int nn = 0; nn < n; ++nn)
    for (int ff = 0; ff < f; ++ff)
      for (int o1 = 0; o1 < oh; ++o1)
        for (int o2 = 0; o2 < ow; ++o2) {
          const double g = pg[nn * gns + ff * gcs + int64_t(o1) * ow + o2];
          if (g == 0.0) continue;
          const int ih0 = o1 * stride - padding, iw0 = o2 * stride - padding;
          for (int cc = 0; cc < c; ++cc)
            for (int ki = 0; ki < kernel; ++ki) {
              const int ih = ih0 + ki;
              if (ih < 0 || ih >= h) continue;
              for (int kj = 0; kj < kernel; ++kj) {
                const int iw = iw0 + kj;
                if (iw < 0 || iw >= wdt) continue;
                pw[ff * wfs + cc * wcs + int64_t(ki) * kernel + kj] +=
                    g * px[nn * xns + cc * xcs + int64_t(ih) * wdt + iw];
              }
            }
        }
  return gw;
}

Tensor conv2d_grad_bias(const Tensor& grad_out) {
  const int n = grad_out.dim(0), f = grad_out.dim(1);
  const int64_t plane = int64_t(grad_out.dim(2)) * grad_out.dim(3);
  Tensor gb = Tensor::zeros(Kind::Real64, {f});
  const double* pg = grad_out.real_data();
  double* pb = gb.real_data();
  for (int nn = 0; nn < n; ++nn)
    for (int ff = 0; ff < f; ++ff) {
      double acc = 0.0;
      const double* p = pg + (int64_t(nn) * f + ff) * plane;
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
      pb[ff] += acc;
    }
  return gb;
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                         int padding) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw Error(ErrorCode::ShapeMismatch, "transposed_conv2d expects 4-d input and weight");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  if (w.dim(0) != c)
    throw Error(ErrorCode::ShapeMismatch, "transposed_conv2d channel mismatch");
  const int f = w.dim(1), k = w.dim(2);
  if (stride < 1) throw Error(ErrorCode::BadParams, "transposed_conv2d stride must be >= 1");
  const int oh = (h - 1) * stride - 2 * padding + k;
  const int ow = (wd - 1) * stride - 2 * padding + k;
  if (oh < 1 || ow < 1) throw Error(ErrorCode::ShapeMismatch, "transposed_conv2d empty output");
  if (b.size() != f) throw Error(ErrorCode::ShapeMismatch, "transposed_conv2d bias size mismatch");
  Tensor xr = x.to_real(), wr = w.to_real(), br = b.to_real();
  Tensor out = Tensor::zeros(Kind::Real64, {n, f, oh, ow});
  const double* px = xr.real_data();
  const double* pw = wr.real_data();
  const double* pb = br.real_data();
  double* po = out.real_data();
  const int64_t ocs = int64_t(oh) * ow, ons = int64_t(f) * ocs;
  const int64_t wfs = int64_t(k) * k, wcs = int64_t(f) * wfs;
  const int64_t xcs = int64_t(h) * wd;
  for (int nn = 0; nn < n; ++nn) {
    for (int ff = 0; ff < f; ++ff) {
      double* oc = po + nn * ons + ff * ocs;
      const double bias = pb[ff];
      for (int64_t i = 0; i < ocs; ++i) oc[i] = bias;
    }
    for (int cc = 0; cc < c; ++cc) {
      const double* xc = px + (int64_t(nn) * c + cc) * xcs;
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < wd; ++iw) {
          const double v = xc[int64_t(ih) * wd + iw];
          if (v == 0.0) continue;
          const int oh0 = ih * stride - padding, ow0 = iw * stride - padding;
          for (int ff = 0; ff < f; ++ff) {
            double* oc = po + nn * ons + ff * ocs;
            const double* wc = pw + cc * wcs + ff * wfs;
            for (int ki = 0; ki < k; ++ki) {
              const int o1 = oh0 + ki;
              if (o1 < 0 || o1 >= oh) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int o2 = ow0 + kj;
                if (o2 < 0 || o2 >= ow) continue;
                oc[int64_t(o1) * ow + o2] += v * wc[int64_t(ki) * k + kj];
              }
            }
          }
        }
    }
  }
  return out;
}

Tensor transposed_conv2d_grad_input(const Tensor& grad_out, const Tensor& w, int stride,
                                    int padding) {
  // gather: the adjoint of the scatter above, shaped like a conv2d forward
  const int n = grad_out.dim(0), f = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int c = w.dim(0), k = w.dim(2);
  const int h = (oh - k + 2 * padding) / stride + 1;
  const int wd = (ow - k + 2 * padding) / stride + 1;
  Tensor gx = Tensor::zeros(Kind::Real64, {n, c, h, wd});
  const double* pg = grad_out.real_data();
  const double* pw = w.real_data();
  double* px = gx.real_data();
  const int64_t gcs = int64_t(oh) * ow, gns = int64_t(f) * gcs;
  const int64_t wfs = int64_t(k) * k, wcs = int64_t(f) * wfs;
  const int64_t xcs = int64_t(h) * wd;
  for (int nn = 0; nn < n; ++nn)
    for (int cc = 0; cc < c; ++cc)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < wd; ++iw) {
          double acc = 0.0;
          const int oh0 = ih * stride - padding, ow0 = iw * stride - padding;
          for (int ff = 0; ff < f; ++ff) {
            const double* gc = pg + nn * gns + ff * gcs;
            const double* wc = pw + cc * wcs + ff * wfs;
            for (int ki = 0; ki < k; ++ki) {
              const int o1 = oh0 + ki;
              if (o1 < 0 || o1 >= oh) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int o2 = ow0 + kj;
                if (o2 < 0 || o2 >= ow) continue;
                acc += gc[int64_t(o1) * ow + o2] * wc[int64_t(ki) * k + kj];
              }
            }
          }
          px[(int64_t(nn) * c + cc) * xcs + int64_t(ih) * wd + iw] = acc;
        }
  return gx;
}

Tensor transposed_conv2d_grad_weight(const Tensor& grad_out, const Tensor& x, int stride,
                                     int padding, int kernel) {
  const int n = grad_out.dim(0), f = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  Tensor gw = Tensor::zeros(Kind::Real64, {c, f, kernel, kernel});
  const double* pg = grad_out.real_data();
  const double* px = x.real_data();
  double* pw = gw.real_data();
  const int64_t gcs = int64_t(oh) * ow, gns = int64_t(f) * gcs;
  const int64_t wfs = int64_t(kernel) * kernel, wcs = int64_t(f) * wfs;
  const int64_t xcs = int64_t(h) * wd;
  for (int nn = 0; nn < n; ++nn)
    for (int cc = 0; cc < c; ++cc)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < wd; ++iw) {
          const double v = px[(int64_t(nn) * c + cc) * xcs + int64_t(ih) * wd + iw];
          if (v == 0.0) continue;
          const int oh0 = ih * stride - padding, ow0 = iw * stride - padding;
          for (int ff = 0; ff < f; ++ff) {
            const double* gc = pg + nn * gns + ff * gcs;
            double* wc = pw + cc * wcs + ff * wfs;
            for (int ki = 0; ki < kernel; ++ki) {
              const int o1 = oh0 + ki;
              if (o1 < 0 || o1 >= oh) continue;
              for (int kj = 0; kj < kernel; ++kj) {
                const int o2 = ow0 + kj;
                if (o2 < 0 || o2 >= ow) continue;
                wc[int64_t(ki) * kernel + kj] += v * gc[int64_t(o1) * ow + o2];
              }
            }
          }
        }
  return gw;
}

Tensor round_tensor(const Tensor& x, RoundMode mode, Rng* rng) {
  Tensor xr = x.to_real();
  Tensor out = Tensor::zeros(Kind::Real64, xr.shape());
  const double* p = xr.real_data();
  double* o = out.real_data();
  const int64_t n = xr.size();
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) throw Error(ErrorCode::NonFiniteInput, "round on non-finite value");
    switch (mode) {
      case RoundMode::Deterministic: o[i] = std::round(p[i]); break;
      case RoundMode::Stochastic:
        if (!rng) throw Error(ErrorCode::BadParams, "stochastic rounding needs an rng");
        o[i] = std::round(p[i]) + (rng->uniform() - 0.5);
        break;
      case RoundMode::Identity: o[i] = p[i]; break;
    }
  }
  return out;
}

Tensor channel_mean(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out = Tensor::zeros(Kind::Real64, {n, 1, h, w});
  const double* px = x.real_data();
  double* po = out.real_data();
  const int64_t plane = int64_t(h) * w;
  for (int nn = 0; nn < n; ++nn)
    for (int64_t i = 0; i < plane; ++i) {
      double acc = 0.0;
      for (int cc = 0; cc < c; ++cc) acc += px[(int64_t(nn) * c + cc) * plane + i];
      po[nn * plane + i] = acc / c;
    }
  return out;
}

Tensor channel_max(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out = Tensor::zeros(Kind::Real64, {n, 1, h, w});
  const double* px = x.real_data();
  double* po = out.real_data();
  const int64_t plane = int64_t(h) * w;
  for (int nn = 0; nn < n; ++nn)
    for (int64_t i = 0; i < plane; ++i) {
      double best = px[int64_t(nn) * c * plane + i];
      for (int cc = 1; cc < c; ++cc) {
        double v = px[(int64_t(nn) * c + cc) * plane + i];
        if (v > best) best = v;
      }
      po[nn * plane + i] = best;
    }
  return out;
}

}  // namespace wmflow
