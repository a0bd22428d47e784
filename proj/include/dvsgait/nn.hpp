#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvsgait/tensor.hpp"

namespace dvsgait {

// Named view over a parameter tensor and its gradient accumulator. Backward
// passes accumulate into grad; the optimizer is the single writer of value.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

using ParamList = std::vector<ParamRef>;

// --- dense affine map y = W x + b ----------------------------------------

struct AffineRecord {
  Tensor input;
};

class Affine {
 public:
  Affine() = default;
  Affine(std::size_t out, std::size_t in) { init_shapes(out, in); }

  void init_shapes(std::size_t out, std::size_t in) {
    w.reshape({out, in});
    b.reshape({out});
    gw.reshape({out, in});
    gb.reshape({out});
  }

  void init_weights(Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(w.dim(0) + w.dim(1)));
    w.fill_uniform(rng, -s, s);
    b.zero();
  }

  std::size_t out_dim() const { return w.dim(0); }
  std::size_t in_dim() const { return w.dim(1); }

  Tensor forward(const Tensor& x, AffineRecord* rec = nullptr) const {
    if (x.size() != in_dim())
      throw Error(ErrorKind::invalid_argument, "affine: input width mismatch");
    Tensor y({out_dim()});
    for (std::size_t o = 0; o < out_dim(); ++o) {
      double acc = b[o];
      const double* wr = &w.at(o, 0);
      for (std::size_t i = 0; i < in_dim(); ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
    if (rec) rec->input = x;
    return y;
  }

  Tensor backward(const Tensor& gy, const AffineRecord& rec) {
    Tensor gx({in_dim()});
    for (std::size_t o = 0; o < out_dim(); ++o) {
      const double g = gy[o];
      gb[o] += g;
      double* gwr = &gw.at(o, 0);
      const double* wr = &w.at(o, 0);
      for (std::size_t i = 0; i < in_dim(); ++i) {
        gwr[i] += g * rec.input[i];
        gx[i] += g * wr[i];
      }
    }
    return gx;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + "/w", &w, &gw});
    out.push_back({prefix + "/b", &b, &gb});
  }

  Tensor w, b, gw, gb;
};

// --- 3x3 same-padding convolution over {C, H, W} maps ---------------------

struct Conv3x3Record {
  Tensor input;
};

class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(std::size_t out_ch, std::size_t in_ch) { init_shapes(out_ch, in_ch); }

  void init_shapes(std::size_t out_ch, std::size_t in_ch) {
    w.reshape({out_ch, in_ch, 3, 3});
    b.reshape({out_ch});
    gw.reshape({out_ch, in_ch, 3, 3});
    gb.reshape({out_ch});
  }

  void init_weights(Rng& rng) {
    const double s = std::sqrt(6.0 / (static_cast<double>(w.dim(1)) * 9.0));
    w.fill_uniform(rng, -s, s);
    b.zero();
  }

  std::size_t out_channels() const { return w.dim(0); }
  std::size_t in_channels() const { return w.dim(1); }

  Tensor forward(const Tensor& x, Conv3x3Record* rec = nullptr) const {
    if (x.rank() != 3 || x.dim(0) != in_channels())
      throw Error(ErrorKind::invalid_argument, "conv3x3: input shape mismatch");
    const std::size_t h = x.dim(1), wd = x.dim(2);
    Tensor y({out_channels(), h, wd});
    for (std::size_t co = 0; co < out_channels(); ++co) {
      for (std::size_t i = 0; i < h * wd; ++i) y[co * h * wd + i] = b[co];
      for (std::size_t ci = 0; ci < in_channels(); ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = w.at(co, ci, ky, kx);
            if (wv == 0.0) continue;
            const int oy = ky - 1, ox = kx - 1;
            const std::size_t y_lo = oy < 0 ? 1 : 0;
            const std::size_t y_hi = oy > 0 ? h - 1 : h;
            const std::size_t x_lo = ox < 0 ? 1 : 0;
            const std::size_t x_hi = ox > 0 ? wd - 1 : wd;
            for (std::size_t yy = y_lo; yy < y_hi; ++yy) {
              double* dst = &y.at(co, yy, x_lo);
              const double* src = &x.at(ci, yy + oy, x_lo + ox);
              for (std::size_t xx = x_lo; xx < x_hi; ++xx) *dst++ += wv * *src++;
            }
          }
        }
      }
    }
    if (rec) rec->input = x;
    return y;
  }

  Tensor backward(const Tensor& gy, const Conv3x3Record& rec) {
    const Tensor& x = rec.input;
    const std::size_t h = x.dim(1), wd = x.dim(2);
    Tensor gx({in_channels(), h, wd});
    for (std::size_t co = 0; co < out_channels(); ++co) {
      double bg = 0.0;
      for (std::size_t i = 0; i < h * wd; ++i) bg += gy[co * h * wd + i];
      gb[co] += bg;
      for (std::size_t ci = 0; ci < in_channels(); ++ci) {
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int oy = ky - 1, ox = kx - 1;
            const std::size_t y_lo = oy < 0 ? 1 : 0;
            const std::size_t y_hi = oy > 0 ? h - 1 : h;
            const std::size_t x_lo = ox < 0 ? 1 : 0;
            const std::size_t x_hi = ox > 0 ? wd - 1 : wd;
            const double wv = w.at(co, ci, ky, kx);
            double wg = 0.0;
            for (std::size_t yy = y_lo; yy < y_hi; ++yy) {
              const double* g = &gy.at(co, yy, x_lo);
              const double* src = &x.at(ci, yy + oy, x_lo + ox);
              double* gsrc = &gx.at(ci, yy + oy, x_lo + ox);
              for (std::size_t xx = x_lo; xx < x_hi; ++xx) {
                wg += g[xx - x_lo] * src[xx - x_lo];
                gsrc[xx - x_lo] += wv * g[xx - x_lo];
              }
            }
            gw.at(co, ci, ky, kx) += wg;
          }
        }
      }
    }
    return gx;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + "/w", &w, &gw});
    out.push_back({prefix + "/b", &b, &gb});
  }

  Tensor w, b, gw, gb;
};

// --- 1x1 convolution (pointwise channel mix) -------------------------------

struct Conv1x1Record {
  Tensor input;
};

class Conv1x1 {
 public:
  Conv1x1() = default;
  Conv1x1(std::size_t out_ch, std::size_t in_ch) { init_shapes(out_ch, in_ch); }

  void init_shapes(std::size_t out_ch, std::size_t in_ch) {
    w.reshape({out_ch, in_ch});
    b.reshape({out_ch});
    gw.reshape({out_ch, in_ch});
    gb.reshape({out_ch});
  }

  void init_weights(Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(w.dim(0) + w.dim(1)));
    w.fill_uniform(rng, -s, s);
    b.zero();
  }

  Tensor forward(const Tensor& x, Conv1x1Record* rec = nullptr) const {
    const std::size_t p = x.dim(1) * x.dim(2);
    Tensor y({w.dim(0), x.dim(1), x.dim(2)});
    for (std::size_t co = 0; co < w.dim(0); ++co) {
      double* dst = &y[co * p];
      for (std::size_t i = 0; i < p; ++i) dst[i] = b[co];
      for (std::size_t ci = 0; ci < w.dim(1); ++ci) {
        const double wv = w.at(co, ci);
        const double* src = &x[ci * p];
        for (std::size_t i = 0; i < p; ++i) dst[i] += wv * src[i];
      }
    }
    if (rec) rec->input = x;
    return y;
  }

  Tensor backward(const Tensor& gy, const Conv1x1Record& rec) {
    const Tensor& x = rec.input;
    const std::size_t p = x.dim(1) * x.dim(2);
    Tensor gx({w.dim(1), x.dim(1), x.dim(2)});
    for (std::size_t co = 0; co < w.dim(0); ++co) {
      const double* g = &gy[co * p];
      double bg = 0.0;
      for (std::size_t i = 0; i < p; ++i) bg += g[i];
      gb[co] += bg;
      for (std::size_t ci = 0; ci < w.dim(1); ++ci) {
        const double* src = &x[ci * p];
        double* gsrc = &gx[ci * p];
        const double wv = w.at(co, ci);
        double wg = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
          wg += g[i] * src[i];
          gsrc[i] += wv * g[i];
        }
        gw.at(co, ci) += wg;
      }
    }
    return gx;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + "/w", &w, &gw});
    out.push_back({prefix + "/b", &b, &gb});
  }

  Tensor w, b, gw, gb;
};

// --- stateless map helpers -------------------------------------------------

inline Tensor tanh_forward(const Tensor& x) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  return y;
}

inline Tensor tanh_backward(const Tensor& gy, const Tensor& y) {
  Tensor gx = gy;
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - y[i] * y[i];
  return gx;
}

// k x k average pooling with stride k over {C, H, W}
inline Tensor avg_pool(const Tensor& x, std::size_t k) {
  const std::size_t c = x.dim(0), h = x.dim(1) / k, w = x.dim(2) / k;
  Tensor y({c, h, w});
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t yy = 0; yy < h; ++yy)
      for (std::size_t xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) acc += x.at(ci, yy * k + dy, xx * k + dx);
        y.at(ci, yy, xx) = acc * inv;
      }
  return y;
}

inline Tensor avg_pool_backward(const Tensor& gy, std::size_t k, std::size_t in_h,
                                std::size_t in_w) {
  const std::size_t c = gy.dim(0);
  Tensor gx({c, in_h, in_w});
  const double inv = 1.0 / static_cast<double>(k * k);
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t yy = 0; yy < gy.dim(1); ++yy)
      for (std::size_t xx = 0; xx < gy.dim(2); ++xx) {
        const double g = gy.at(ci, yy, xx) * inv;
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) gx.at(ci, yy * k + dy, xx * k + dx) += g;
      }
  return gx;
}

// mean over the spatial extent of each channel: {C, H, W} -> {C}
inline Tensor spatial_mean(const Tensor& x) {
  const std::size_t c = x.dim(0), p = x.dim(1) * x.dim(2);
  Tensor y({c});
  for (std::size_t ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    const double* src = &x[ci * p];
    for (std::size_t i = 0; i < p; ++i) acc += src[i];
    y[ci] = acc / static_cast<double>(p);
  }
  return y;
}

inline Tensor spatial_mean_backward(const Tensor& gy, std::size_t h, std::size_t w) {
  const std::size_t c = gy.size(), p = h * w;
  Tensor gx({c, h, w});
  for (std::size_t ci = 0; ci < c; ++ci) {
    const double g = gy[ci] / static_cast<double>(p);
    for (std::size_t i = 0; i < p; ++i) gx[ci * p + i] = g;
  }
  return gx;
}

// numerically stable softmax over a vector
inline Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  double mx = p[0];
  for (std::size_t i = 1; i < p.size(); ++i) mx = std::max(mx, p[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(p[i] - mx);
    z += p[i];
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] /= z;
  return p;
}

inline Tensor softmax_backward(const Tensor& gp, const Tensor& p) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += gp[i] * p[i];
  Tensor gl = p;
  for (std::size_t i = 0; i < p.size(); ++i) gl[i] = p[i] * (gp[i] - dot);
  return gl;
}

}  // namespace dvsgait
