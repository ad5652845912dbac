#include "mtl/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mtl::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}

bool wants_grad(const Var& v) { return v.defined() && v.requires_grad(); }

}  // namespace

Var depthwise_conv3x3(const Var& x, const Var& k) {
  require(x.value().ndim() == 4, "depthwise_conv3x3: x must be NCHW");
  require(k.value().ndim() == 3 && k.value().dim(1) == 3 && k.value().dim(2) == 3,
          "depthwise_conv3x3: kernel must be [C,3,3]");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  require(k.value().dim(0) == C, "depthwise_conv3x3: channel mismatch");
  Tensor out({N, C, H, W});
  const Tensor& xin = x.value();
  const Tensor& kk = k.value();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* kc = kk.data() + static_cast<std::size_t>(c) * 9;
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double acc = 0.0;
          for (int u = -1; u <= 1; ++u) {
            int ii = i + u;
            if (ii < 0 || ii >= H) continue;
            for (int v = -1; v <= 1; ++v) {
              int jj = j + v;
              if (jj < 0 || jj >= W) continue;
              acc += kc[(u + 1) * 3 + (v + 1)] * xin.at4(n, c, ii, jj);
            }
          }
          out.at4(n, c, i, j) = acc;
        }
    }
  return make_result(std::move(out), {x, k}, [x, k, N, C, H, W](Node& res) mutable {
    const Tensor& gy = res.grad;
    const Tensor& xin = x.value();
    const Tensor& kk = k.value();
    if (wants_grad(x)) {
      Tensor& gx = x.grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const double* kc = kk.data() + static_cast<std::size_t>(c) * 9;
          for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
              double g = gy.at4(n, c, i, j);
              if (g == 0.0) continue;
              for (int u = -1; u <= 1; ++u) {
                int ii = i + u;
                if (ii < 0 || ii >= H) continue;
                for (int v = -1; v <= 1; ++v) {
                  int jj = j + v;
                  if (jj < 0 || jj >= W) continue;
                  gx.at4(n, c, ii, jj) += kc[(u + 1) * 3 + (v + 1)] * g;
                }
              }
            }
        }
    }
    if (wants_grad(k)) {
      Tensor& gk = k.grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double* gkc = gk.data() + static_cast<std::size_t>(c) * 9;
          for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
              double g = gy.at4(n, c, i, j);
              if (g == 0.0) continue;
              for (int u = -1; u <= 1; ++u) {
                int ii = i + u;
                if (ii < 0 || ii >= H) continue;
                for (int v = -1; v <= 1; ++v) {
                  int jj = j + v;
                  if (jj < 0 || jj >= W) continue;
                  gkc[(u + 1) * 3 + (v + 1)] += xin.at4(n, c, ii, jj) * g;
                }
              }
            }
        }
    }
  });
}

Var pointwise_conv(const Var& x, const Var& w, const Var& b) {
  require(x.value().ndim() == 4, "pointwise_conv: x must be NCHW");
  require(w.value().ndim() == 2, "pointwise_conv: w must be [Co,Ci]");
  const int N = x.value().dim(0), Ci = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  const int Co = w.value().dim(0);
  require(w.value().dim(1) == Ci, "pointwise_conv: channel mismatch");
  if (b.defined())
    require(b.value().ndim() == 1 && b.value().dim(0) == Co,
            "pointwise_conv: bias must be [Co]");
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  Tensor out({N, Co, H, W});
  CMapMat wm(w.value().data(), Co, Ci);
  for (int n = 0; n < N; ++n) {
    CMapMat xm(x.value().data() + n * Ci * hw, Ci, static_cast<Eigen::Index>(hw));
    MapMat ym(out.data() + n * Co * hw, Co, static_cast<Eigen::Index>(hw));
    ym.noalias() = wm * xm;
  }
  if (b.defined()) {
    const double* bp = b.value().data();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < Co; ++c) {
        double* p = out.data() + (static_cast<std::size_t>(n) * Co + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) p[i] += bp[c];
      }
  }
  return make_result(std::move(out), {x, w, b},
                     [x, w, b, N, Ci, Co, hw](Node& res) mutable {
                       const Tensor& gy = res.grad;
                       CMapMat wm(w.value().data(), Co, Ci);
                       for (int n = 0; n < N; ++n) {
                         CMapMat gym(gy.data() + n * Co * hw, Co,
                                     static_cast<Eigen::Index>(hw));
                         if (wants_grad(x)) {
                           MapMat gxm(x.grad().data() + n * Ci * hw, Ci,
                                      static_cast<Eigen::Index>(hw));
                           gxm.noalias() += wm.transpose() * gym;
                         }
                         if (wants_grad(w)) {
                           CMapMat xm(x.value().data() + n * Ci * hw, Ci,
                                      static_cast<Eigen::Index>(hw));
                           MapMat gwm(w.grad().data(), Co, Ci);
                           gwm.noalias() += gym * xm.transpose();
                         }
                         if (wants_grad(b)) {
                           double* gb = b.grad().data();
                           for (int c = 0; c < Co; ++c)
                             gb[c] += gym.row(c).sum();
                         }
                       }
                     });
}

Var conv2d_same(const Var& x, const Var& w, const Var& b) {
  require(x.value().ndim() == 4 && w.value().ndim() == 4,
          "conv2d_same: x NCHW, w [Co,Ci,kh,kw]");
  const int N = x.value().dim(0), Ci = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  const int Co = w.value().dim(0), kh = w.value().dim(2), kw = w.value().dim(3);
  require(w.value().dim(1) == Ci, "conv2d_same: channel mismatch");
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d_same: kernel dims must be odd");
  const int ph = kh / 2, pw = kw / 2;
  Tensor out({N, Co, H, W});
  const Tensor& xin = x.value();
  const Tensor& ww = w.value();
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double acc = b.defined() ? b.value()[static_cast<std::size_t>(co)] : 0.0;
          for (int ci = 0; ci < Ci; ++ci)
            for (int u = 0; u < kh; ++u) {
              int ii = i + u - ph;
              if (ii < 0 || ii >= H) continue;
              for (int v = 0; v < kw; ++v) {
                int jj = j + v - pw;
                if (jj < 0 || jj >= W) continue;
                acc += ww[((static_cast<std::size_t>(co) * Ci + ci) * kh + u) * kw + v] *
                       xin.at4(n, ci, ii, jj);
              }
            }
          out.at4(n, co, i, j) = acc;
        }
  return make_result(
      std::move(out), {x, w, b}, [x, w, b, N, Ci, Co, H, W, kh, kw, ph, pw](Node& res) mutable {
        const Tensor& gy = res.grad;
        const Tensor& xin = x.value();
        const Tensor& ww = w.value();
        for (int n = 0; n < N; ++n)
          for (int co = 0; co < Co; ++co)
            for (int i = 0; i < H; ++i)
              for (int j = 0; j < W; ++j) {
                double g = gy.at4(n, co, i, j);
                if (g == 0.0) continue;
                if (wants_grad(b)) b.grad()[static_cast<std::size_t>(co)] += g;
                for (int ci = 0; ci < Ci; ++ci)
                  for (int u = 0; u < kh; ++u) {
                    int ii = i + u - ph;
                    if (ii < 0 || ii >= H) continue;
                    for (int v = 0; v < kw; ++v) {
                      int jj = j + v - pw;
                      if (jj < 0 || jj >= W) continue;
                      std::size_t widx =
                          ((static_cast<std::size_t>(co) * Ci + ci) * kh + u) * kw + v;
                      if (wants_grad(x)) x.grad().at4(n, ci, ii, jj) += ww[widx] * g;
                      if (wants_grad(w)) w.grad()[widx] += xin.at4(n, ci, ii, jj) * g;
                    }
                  }
              }
      });
}

Var separable_conv(const Var& x, const Var& dw, const Var& pw, const Var& b) {
  return pointwise_conv(depthwise_conv3x3(x, dw), pw, b);
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean,
               Tensor& run_var, bool train, double momentum, double eps) {
  require(x.value().ndim() == 4, "batch_norm: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  require(gamma.value().dim(0) == C && beta.value().dim(0) == C,
          "batch_norm: parameter channel mismatch");
  const std::size_t m = static_cast<std::size_t>(N) * H * W;
  const Tensor& xin = x.value();

  std::vector<double> mean(C), inv_std(C);
  if (train) {
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) s += xin.at4(n, c, i, j);
      mean[c] = s / static_cast<double>(m);
    }
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) {
            double d = xin.at4(n, c, i, j) - mean[c];
            s += d * d;
          }
      double var = s / static_cast<double>(m);
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      run_mean[c] = momentum * run_mean[c] + (1.0 - momentum) * mean[c];
      run_var[c] = momentum * run_var[c] + (1.0 - momentum) * var;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = run_mean[c];
      inv_std[c] = 1.0 / std::sqrt(run_var[c] + eps);
    }
  }

  // Cache xhat for the backward pass.
  auto xhat = std::make_shared<Tensor>(xin.dims());
  Tensor out(xin.dims());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double g = gamma.value()[static_cast<std::size_t>(c)];
      double bt = beta.value()[static_cast<std::size_t>(c)];
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double xh = (xin.at4(n, c, i, j) - mean[c]) * inv_std[c];
          (*xhat).at4(n, c, i, j) = xh;
          out.at4(n, c, i, j) = g * xh + bt;
        }
    }

  return make_result(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, train, N, C, H, W, m](Node& res) mutable {
        const Tensor& gy = res.grad;
        for (int c = 0; c < C; ++c) {
          double sum_gy = 0.0, sum_gy_xh = 0.0;
          for (int n = 0; n < N; ++n)
            for (int i = 0; i < H; ++i)
              for (int j = 0; j < W; ++j) {
                double g = gy.at4(n, c, i, j);
                sum_gy += g;
                sum_gy_xh += g * (*xhat).at4(n, c, i, j);
              }
          if (wants_grad(beta)) beta.grad()[static_cast<std::size_t>(c)] += sum_gy;
          if (wants_grad(gamma)) gamma.grad()[static_cast<std::size_t>(c)] += sum_gy_xh;
          if (wants_grad(x)) {
            double gm = gamma.value()[static_cast<std::size_t>(c)];
            double is = inv_std[c];
            double inv_m = 1.0 / static_cast<double>(m);
            for (int n = 0; n < N; ++n)
              for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                  double g = gy.at4(n, c, i, j);
                  double xh = (*xhat).at4(n, c, i, j);
                  double dx;
                  if (train) {
                    dx = gm * is * (g - inv_m * sum_gy - xh * inv_m * sum_gy_xh);
                  } else {
                    dx = gm * is * g;
                  }
                  x.grad().at4(n, c, i, j) += dx;
                }
          }
        }
      });
}

Var relu(const Var& x) {
  Tensor out(x.value().dims());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = x.value()[i] > 0.0 ? x.value()[i] : 0.0;
  return make_result(std::move(out), {x}, [x](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (std::size_t i = 0; i < res.grad.numel(); ++i)
      if (res.value[i] > 0.0) gx[i] += res.grad[i];
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.value().dims());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
  return make_result(std::move(out), {x}, [x](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (std::size_t i = 0; i < res.grad.numel(); ++i) {
      double y = res.value[i];
      gx[i] += y * (1.0 - y) * res.grad[i];
    }
  });
}

Var max_pool2(const Var& x) {
  require(x.value().ndim() == 4, "max_pool2: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  require(H % 2 == 0 && W % 2 == 0, "max_pool2: spatial dims must be even");
  const int Ho = H / 2, Wo = W / 2;
  Tensor out({N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.numel());
  const Tensor& xin = x.value();
  std::size_t o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t bi = 0;
          for (int u = 0; u < 2; ++u)
            for (int v = 0; v < 2; ++v) {
              std::size_t idx = xin.idx4(n, c, 2 * i + u, 2 * j + v);
              if (xin[idx] > best) {
                best = xin[idx];
                bi = idx;
              }
            }
          out[o] = best;
          (*argmax)[o] = static_cast<std::uint32_t>(bi);
        }
  return make_result(std::move(out), {x}, [x, argmax](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (std::size_t i = 0; i < res.grad.numel(); ++i)
      gx[(*argmax)[i]] += res.grad[i];
  });
}

Var avg_pool2(const Var& x) {
  require(x.value().ndim() == 4, "avg_pool2: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  require(H % 2 == 0 && W % 2 == 0, "avg_pool2: spatial dims must be even");
  const int Ho = H / 2, Wo = W / 2;
  Tensor out({N, C, Ho, Wo});
  const Tensor& xin = x.value();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          double s = xin.at4(n, c, 2 * i, 2 * j) + xin.at4(n, c, 2 * i, 2 * j + 1) +
                     xin.at4(n, c, 2 * i + 1, 2 * j) + xin.at4(n, c, 2 * i + 1, 2 * j + 1);
          out.at4(n, c, i, j) = 0.25 * s;
        }
  return make_result(std::move(out), {x}, [x, N, C, Ho, Wo](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < Ho; ++i)
          for (int j = 0; j < Wo; ++j) {
            double g = 0.25 * res.grad.at4(n, c, i, j);
            gx.at4(n, c, 2 * i, 2 * j) += g;
            gx.at4(n, c, 2 * i, 2 * j + 1) += g;
            gx.at4(n, c, 2 * i + 1, 2 * j) += g;
            gx.at4(n, c, 2 * i + 1, 2 * j + 1) += g;
          }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  require(a.value().ndim() == 4 && b.value().ndim() == 4, "concat_channels: NCHW");
  const int N = a.value().dim(0), Ca = a.value().dim(1), Cb = b.value().dim(1);
  const int H = a.value().dim(2), W = a.value().dim(3);
  require(b.value().dim(0) == N && b.value().dim(2) == H && b.value().dim(3) == W,
          "concat_channels: dim mismatch");
  Tensor out({N, Ca + Cb, H, W});
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    std::copy_n(a.value().data() + n * Ca * hw, Ca * hw,
                out.data() + static_cast<std::size_t>(n) * (Ca + Cb) * hw);
    std::copy_n(b.value().data() + n * Cb * hw, Cb * hw,
                out.data() + static_cast<std::size_t>(n) * (Ca + Cb) * hw + Ca * hw);
  }
  return make_result(std::move(out), {a, b}, [a, b, N, Ca, Cb, hw](Node& res) mutable {
    for (int n = 0; n < N; ++n) {
      const double* g = res.grad.data() + static_cast<std::size_t>(n) * (Ca + Cb) * hw;
      if (wants_grad(a)) {
        double* ga = a.grad().data() + n * Ca * hw;
        for (std::size_t i = 0; i < Ca * hw; ++i) ga[i] += g[i];
      }
      if (wants_grad(b)) {
        double* gb = b.grad().data() + n * Cb * hw;
        for (std::size_t i = 0; i < Cb * hw; ++i) gb[i] += g[Ca * hw + i];
      }
    }
  });
}

Var dropout(const Var& x, double rate, bool train, std::mt19937_64& rng) {
  if (!train || rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<float>>(x.value().numel());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor out(x.value().dims());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double m = u(rng) < keep ? 1.0 / keep : 0.0;
    (*mask)[i] = static_cast<float>(m);
    out[i] = x.value()[i] * m;
  }
  return make_result(std::move(out), {x}, [x, mask](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (std::size_t i = 0; i < res.grad.numel(); ++i)
      gx[i] += res.grad[i] * (*mask)[i];
  });
}

Var softmax_channels(const Var& x) {
  require(x.value().ndim() == 4, "softmax_channels: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  Tensor out(x.value().dims());
  const Tensor& xin = x.value();
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < C; ++c) mx = std::max(mx, xin.at4(n, c, i, j));
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
          double e = std::exp(xin.at4(n, c, i, j) - mx);
          out.at4(n, c, i, j) = e;
          s += e;
        }
        double inv = 1.0 / s;
        for (int c = 0; c < C; ++c) out.at4(n, c, i, j) *= inv;
      }
  return make_result(std::move(out), {x}, [x, N, C, H, W](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double dot = 0.0;
          for (int c = 0; c < C; ++c)
            dot += res.value.at4(n, c, i, j) * res.grad.at4(n, c, i, j);
          for (int c = 0; c < C; ++c)
            gx.at4(n, c, i, j) +=
                res.value.at4(n, c, i, j) * (res.grad.at4(n, c, i, j) - dot);
        }
  });
}

namespace {

struct LinSample {
  int lo, hi;
  double w_hi;  // weight of hi; lo gets 1 - w_hi
};

// Half-pixel-center sampling, clamped to the border.
std::vector<LinSample> linear_samples(int in, int out) {
  std::vector<LinSample> s(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    if (src > in - 1) src = in - 1;
    int lo = static_cast<int>(std::floor(src));
    int hi = std::min(lo + 1, in - 1);
    s[static_cast<std::size_t>(o)] = {lo, hi, src - lo};
  }
  return s;
}

}  // namespace

Var upsample_bilinear(const Var& x, int out_h, int out_w) {
  require(x.value().ndim() == 4, "upsample_bilinear: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  if (H == out_h && W == out_w) return x;
  auto sh = std::make_shared<std::vector<LinSample>>(linear_samples(H, out_h));
  auto sw = std::make_shared<std::vector<LinSample>>(linear_samples(W, out_w));
  Tensor out({N, C, out_h, out_w});
  const Tensor& xin = x.value();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < out_h; ++i) {
        const LinSample& si = (*sh)[static_cast<std::size_t>(i)];
        for (int j = 0; j < out_w; ++j) {
          const LinSample& sj = (*sw)[static_cast<std::size_t>(j)];
          double top = (1 - sj.w_hi) * xin.at4(n, c, si.lo, sj.lo) +
                       sj.w_hi * xin.at4(n, c, si.lo, sj.hi);
          double bot = (1 - sj.w_hi) * xin.at4(n, c, si.hi, sj.lo) +
                       sj.w_hi * xin.at4(n, c, si.hi, sj.hi);
          out.at4(n, c, i, j) = (1 - si.w_hi) * top + si.w_hi * bot;
        }
      }
  return make_result(std::move(out), {x},
                     [x, sh, sw, N, C, out_h, out_w](Node& res) mutable {
                       if (!wants_grad(x)) return;
                       Tensor& gx = x.grad();
                       for (int n = 0; n < N; ++n)
                         for (int c = 0; c < C; ++c)
                           for (int i = 0; i < out_h; ++i) {
                             const LinSample& si = (*sh)[static_cast<std::size_t>(i)];
                             for (int j = 0; j < out_w; ++j) {
                               const LinSample& sj = (*sw)[static_cast<std::size_t>(j)];
                               double g = res.grad.at4(n, c, i, j);
                               gx.at4(n, c, si.lo, sj.lo) += (1 - si.w_hi) * (1 - sj.w_hi) * g;
                               gx.at4(n, c, si.lo, sj.hi) += (1 - si.w_hi) * sj.w_hi * g;
                               gx.at4(n, c, si.hi, sj.lo) += si.w_hi * (1 - sj.w_hi) * g;
                               gx.at4(n, c, si.hi, sj.hi) += si.w_hi * sj.w_hi * g;
                             }
                           }
                     });
}

Var resize_nearest(const Var& x, int out_h, int out_w) {
  require(x.value().ndim() == 4, "resize_nearest: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  if (H == out_h && W == out_w) return x;
  auto map_h = std::make_shared<std::vector<int>>(static_cast<std::size_t>(out_h));
  auto map_w = std::make_shared<std::vector<int>>(static_cast<std::size_t>(out_w));
  for (int i = 0; i < out_h; ++i)
    (*map_h)[static_cast<std::size_t>(i)] =
        std::min(H - 1, static_cast<int>((i + 0.5) * H / out_h));
  for (int j = 0; j < out_w; ++j)
    (*map_w)[static_cast<std::size_t>(j)] =
        std::min(W - 1, static_cast<int>((j + 0.5) * W / out_w));
  Tensor out({N, C, out_h, out_w});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < out_h; ++i)
        for (int j = 0; j < out_w; ++j)
          out.at4(n, c, i, j) = x.value().at4(n, c, (*map_h)[i], (*map_w)[j]);
  return make_result(std::move(out), {x},
                     [x, map_h, map_w, N, C, out_h, out_w](Node& res) mutable {
                       if (!wants_grad(x)) return;
                       Tensor& gx = x.grad();
                       for (int n = 0; n < N; ++n)
                         for (int c = 0; c < C; ++c)
                           for (int i = 0; i < out_h; ++i)
                             for (int j = 0; j < out_w; ++j)
                               gx.at4(n, c, (*map_h)[i], (*map_w)[j]) +=
                                   res.grad.at4(n, c, i, j);
                     });
}

Var global_avg_pool(const Var& x) {
  require(x.value().ndim() == 4, "global_avg_pool: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  const double inv = 1.0 / (static_cast<double>(H) * W);
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) s += x.value().at4(n, c, i, j);
      out.at2(n, c) = s * inv;
    }
  return make_result(std::move(out), {x}, [x, N, C, H, W, inv](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double g = res.grad.at2(n, c) * inv;
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) gx.at4(n, c, i, j) += g;
      }
  });
}

Var global_max_pool(const Var& x) {
  require(x.value().ndim() == 4, "global_max_pool: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  Tensor out({N, C});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.numel());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t bi = 0;
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          std::size_t idx = x.value().idx4(n, c, i, j);
          if (x.value()[idx] > best) {
            best = x.value()[idx];
            bi = idx;
          }
        }
      out.at2(n, c) = best;
      (*argmax)[static_cast<std::size_t>(n) * C + c] = static_cast<std::uint32_t>(bi);
    }
  return make_result(std::move(out), {x}, [x, argmax](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (std::size_t i = 0; i < res.grad.numel(); ++i)
      gx[(*argmax)[i]] += res.grad[i];
  });
}

Var dense(const Var& x, const Var& w, const Var& b) {
  require(x.value().ndim() == 2 && w.value().ndim() == 2, "dense: x [N,Ci], w [Co,Ci]");
  const int N = x.value().dim(0), Ci = x.value().dim(1), Co = w.value().dim(0);
  require(w.value().dim(1) == Ci, "dense: channel mismatch");
  Tensor out({N, Co});
  CMapMat xm(x.value().data(), N, Ci);
  CMapMat wm(w.value().data(), Co, Ci);
  MapMat ym(out.data(), N, Co);
  ym.noalias() = xm * wm.transpose();
  if (b.defined())
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < Co; ++c) out.at2(n, c) += b.value()[static_cast<std::size_t>(c)];
  return make_result(std::move(out), {x, w, b}, [x, w, b, N, Ci, Co](Node& res) mutable {
    CMapMat gym(res.grad.data(), N, Co);
    if (wants_grad(x)) {
      CMapMat wm(w.value().data(), Co, Ci);
      MapMat gxm(x.grad().data(), N, Ci);
      gxm.noalias() += gym * wm;
    }
    if (wants_grad(w)) {
      CMapMat xm(x.value().data(), N, Ci);
      MapMat gwm(w.grad().data(), Co, Ci);
      gwm.noalias() += gym.transpose() * xm;
    }
    if (wants_grad(b)) {
      double* gb = b.grad().data();
      for (int c = 0; c < Co; ++c) gb[c] += gym.col(c).sum();
    }
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().same_dims(b.value()), "add: dim mismatch");
  Tensor out(a.value().dims());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result(std::move(out), {a, b}, [a, b](Node& res) mutable {
    if (wants_grad(a)) {
      Tensor& g = a.grad();
      for (std::size_t i = 0; i < res.grad.numel(); ++i) g[i] += res.grad[i];
    }
    if (wants_grad(b)) {
      Tensor& g = b.grad();
      for (std::size_t i = 0; i < res.grad.numel(); ++i) g[i] += res.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.value().same_dims(b.value()), "mul: dim mismatch");
  Tensor out(a.value().dims());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [a, b](Node& res) mutable {
    if (wants_grad(a)) {
      Tensor& g = a.grad();
      for (std::size_t i = 0; i < res.grad.numel(); ++i) g[i] += res.grad[i] * b.value()[i];
    }
    if (wants_grad(b)) {
      Tensor& g = b.grad();
      for (std::size_t i = 0; i < res.grad.numel(); ++i) g[i] += res.grad[i] * a.value()[i];
    }
  });
}

Var scale(const Var& x, double c) {
  Tensor out(x.value().dims());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = c * x.value()[i];
  return make_result(std::move(out), {x}, [x, c](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& g = x.grad();
    for (std::size_t i = 0; i < res.grad.numel(); ++i) g[i] += c * res.grad[i];
  });
}

Var scale_channels(const Var& x, const Var& s) {
  require(x.value().ndim() == 4 && s.value().ndim() == 2, "scale_channels: x NCHW, s [N,C]");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  require(s.value().dim(0) == N && s.value().dim(1) == C, "scale_channels: dim mismatch");
  Tensor out(x.value().dims());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double sv = s.value().at2(n, c);
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) out.at4(n, c, i, j) = x.value().at4(n, c, i, j) * sv;
    }
  return make_result(std::move(out), {x, s}, [x, s, N, C, H, W](Node& res) mutable {
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double sv = s.value().at2(n, c);
        double acc = 0.0;
        for (int i = 0; i < H; ++i)
          for (int j = 0; j < W; ++j) {
            double g = res.grad.at4(n, c, i, j);
            if (wants_grad(x)) x.grad().at4(n, c, i, j) += g * sv;
            acc += g * x.value().at4(n, c, i, j);
          }
        if (wants_grad(s)) s.grad().at2(n, c) += acc;
      }
  });
}

Var scale_spatial(const Var& x, const Var& s) {
  require(x.value().ndim() == 4 && s.value().ndim() == 4, "scale_spatial: NCHW inputs");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  require(s.value().dim(0) == N && s.value().dim(1) == 1 && s.value().dim(2) == H &&
              s.value().dim(3) == W,
          "scale_spatial: s must be [N,1,H,W]");
  Tensor out(x.value().dims());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
          out.at4(n, c, i, j) = x.value().at4(n, c, i, j) * s.value().at4(n, 0, i, j);
  return make_result(std::move(out), {x, s}, [x, s, N, C, H, W](Node& res) mutable {
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double sv = s.value().at4(n, 0, i, j);
          double acc = 0.0;
          for (int c = 0; c < C; ++c) {
            double g = res.grad.at4(n, c, i, j);
            if (wants_grad(x)) x.grad().at4(n, c, i, j) += g * sv;
            acc += g * x.value().at4(n, c, i, j);
          }
          if (wants_grad(s)) s.grad().at4(n, 0, i, j) += acc;
        }
  });
}

Var channel_mean_max(const Var& x) {
  require(x.value().ndim() == 4, "channel_mean_max: x must be NCHW");
  const int N = x.value().dim(0), C = x.value().dim(1);
  const int H = x.value().dim(2), W = x.value().dim(3);
  Tensor out({N, 2, H, W});
  auto argmax = std::make_shared<std::vector<std::uint16_t>>(
      static_cast<std::size_t>(N) * H * W);
  const double inv_c = 1.0 / C;
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double s = 0.0, best = -std::numeric_limits<double>::infinity();
        int bc = 0;
        for (int c = 0; c < C; ++c) {
          double v = x.value().at4(n, c, i, j);
          s += v;
          if (v > best) {
            best = v;
            bc = c;
          }
        }
        out.at4(n, 0, i, j) = s * inv_c;
        out.at4(n, 1, i, j) = best;
        (*argmax)[(static_cast<std::size_t>(n) * H + i) * W + j] =
            static_cast<std::uint16_t>(bc);
      }
  return make_result(std::move(out), {x}, [x, argmax, N, C, H, W, inv_c](Node& res) mutable {
    if (!wants_grad(x)) return;
    Tensor& gx = x.grad();
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          double gm = res.grad.at4(n, 0, i, j) * inv_c;
          for (int c = 0; c < C; ++c) gx.at4(n, c, i, j) += gm;
          int bc = (*argmax)[(static_cast<std::size_t>(n) * H + i) * W + j];
          gx.at4(n, bc, i, j) += res.grad.at4(n, 1, i, j);
        }
  });
}

Var average(const std::vector<Var>& xs) {
  require(!xs.empty(), "average: empty input list");
  for (const auto& v : xs)
    require(v.value().same_dims(xs[0].value()), "average: dim mismatch");
  const double inv = 1.0 / static_cast<double>(xs.size());
  Tensor out(xs[0].value().dims());
  for (const auto& v : xs)
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += v.value()[i];
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= inv;
  return make_result(std::move(out), xs, [xs, inv](Node& res) mutable {
    for (auto v : xs) {
      if (!wants_grad(v)) continue;
      Tensor& g = v.grad();
      for (std::size_t i = 0; i < res.grad.numel(); ++i) g[i] += inv * res.grad[i];
    }
  });
}

Var detach(const Var& x) { return Var(x.value(), false); }

}  // namespace mtl::nn
