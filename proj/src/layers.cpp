#include "smcnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace smcnet {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

namespace {

template <class T>
void split_planar(const std::vector<std::complex<T>>& in, std::vector<T>& re, std::vector<T>& im) {
  re.resize(in.size());
  im.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    re[i] = in[i].real();
    im[i] = in[i].imag();
  }
}

void require_cache(bool has, const char* layer) {
  if (!has) throw UsageError(std::string(layer) + ": backward() called before forward()");
}

}  // namespace

// ---------------------------------------------------------------------------
// ComplexConv2d

template <class T>
ComplexConv2d<T>::ComplexConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
    : weight(Shape{out_channels, in_channels, kernel, kernel}),
      bias(Shape{out_channels}),
      in_(in_channels),
      out_(out_channels),
      k_(kernel) {
  if (in_ == 0 || out_ == 0 || k_ == 0) throw ShapeError("conv2d channel counts and kernel must be >= 1");
}

template <class T>
void ComplexConv2d<T>::init_glorot(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in_ * k_ * k_);
  std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / (2.0 * fan_in)));
  for (auto& w : weight.data) {
    const double re = dist(rng);
    const double im = dist(rng);
    w = {static_cast<T>(re), static_cast<T>(im)};
  }
  std::fill(bias.data.begin(), bias.data.end(), std::complex<T>{});
}

template <class T>
Shape ComplexConv2d<T>::output_shape(const Shape& in) const {
  if (in.size() != 4) throw ShapeError("conv2d expects (B, C, H, W), got " + shape_string(in));
  if (in[1] != in_)
    throw ShapeError("conv2d expects " + std::to_string(in_) + " input channels, got " + std::to_string(in[1]));
  if (in[2] < k_ || in[3] < k_)
    throw ShapeError("conv2d input spatial size " + std::to_string(in[2]) + "x" + std::to_string(in[3]) +
                     " smaller than kernel " + std::to_string(k_) + "x" + std::to_string(k_));
  return {in[0], out_, in[2] - k_ + 1, in[3] - k_ + 1};
}

template <class T>
void ComplexConv2d<T>::run(const CTensor<T>& x, CTensor<T>& y, std::vector<T>* planar_in) const {
  const Shape os = output_shape(x.shape);
  const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = os[2], wo = os[3];
  std::vector<T> in_re, in_im;
  split_planar(x.data, in_re, in_im);

  y = CTensor<T>(os);
  std::vector<T> acc_re(ho * wo), acc_im(ho * wo);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_; ++o) {
      std::fill(acc_re.begin(), acc_re.end(), bias[o].real());
      std::fill(acc_im.begin(), acc_im.end(), bias[o].imag());
      for (std::size_t c = 0; c < in_; ++c) {
        const T* plane_re = in_re.data() + (b * in_ + c) * h * w;
        const T* plane_im = in_im.data() + (b * in_ + c) * h * w;
        for (std::size_t u = 0; u < k_; ++u)
          for (std::size_t v = 0; v < k_; ++v) {
            const std::complex<T> wt = weight[((o * in_ + c) * k_ + u) * k_ + v];
            const T wr = wt.real(), wi = wt.imag();
            for (std::size_t yy = 0; yy < ho; ++yy) {
              const T* ir = plane_re + (yy + u) * w + v;
              const T* ii = plane_im + (yy + u) * w + v;
              T* orr = acc_re.data() + yy * wo;
              T* oi = acc_im.data() + yy * wo;
              for (std::size_t xx = 0; xx < wo; ++xx) {
                orr[xx] += wr * ir[xx] - wi * ii[xx];
                oi[xx] += wr * ii[xx] + wi * ir[xx];
              }
            }
          }
      }
      std::complex<T>* dst = y.data.data() + (b * out_ + o) * ho * wo;
      for (std::size_t i = 0; i < ho * wo; ++i) dst[i] = {acc_re[i], acc_im[i]};
    }
  }
  if (planar_in) {
    planar_in[0] = std::move(in_re);
    planar_in[1] = std::move(in_im);
  }
}

template <class T>
CTensor<T> ComplexConv2d<T>::forward(const CTensor<T>& x) {
  CTensor<T> y;
  std::vector<T> planar[2];
  run(x, y, planar);
  cached_re_ = std::move(planar[0]);
  cached_im_ = std::move(planar[1]);
  cached_shape_ = x.shape;
  has_cache_ = true;
  return y;
}

template <class T>
CTensor<T> ComplexConv2d<T>::infer(const CTensor<T>& x) const {
  CTensor<T> y;
  run(x, y, nullptr);
  return y;
}

template <class T>
CTensor<T> ComplexConv2d<T>::backward(const CTensor<T>& grad_out, bool need_input_grad) {
  require_cache(has_cache_, "complex_conv2d");
  const Shape os = output_shape(cached_shape_);
  if (grad_out.shape != os)
    throw ShapeError("conv2d backward expects gradient of shape " + shape_string(os) + ", got " +
                     shape_string(grad_out.shape));
  const std::size_t batch = cached_shape_[0], h = cached_shape_[2], w = cached_shape_[3];
  const std::size_t ho = os[2], wo = os[3];
  if (!weight.has_grad()) weight.zero_grad();
  if (!bias.has_grad()) bias.zero_grad();

  std::vector<T> g_re, g_im;
  split_planar(grad_out.data, g_re, g_im);
  std::vector<T> gx_re, gx_im;
  if (need_input_grad) {
    gx_re.assign(cached_re_.size(), T(0));
    gx_im.assign(cached_im_.size(), T(0));
  }
  std::vector<T> dot_re(wo), dot_im(wo);

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_; ++o) {
      const T* gr = g_re.data() + (b * out_ + o) * ho * wo;
      const T* gi = g_im.data() + (b * out_ + o) * ho * wo;
      T sb_re = 0, sb_im = 0;
      for (std::size_t i = 0; i < ho * wo; ++i) {
        sb_re += gr[i];
        sb_im += gi[i];
      }
      bias.grad[o] += std::complex<T>(sb_re, sb_im);

      for (std::size_t c = 0; c < in_; ++c) {
        const T* plane_re = cached_re_.data() + (b * in_ + c) * h * w;
        const T* plane_im = cached_im_.data() + (b * in_ + c) * h * w;
        for (std::size_t u = 0; u < k_; ++u)
          for (std::size_t v = 0; v < k_; ++v) {
            // g_w = sum conj(x) * g
            std::fill(dot_re.begin(), dot_re.end(), T(0));
            std::fill(dot_im.begin(), dot_im.end(), T(0));
            for (std::size_t yy = 0; yy < ho; ++yy) {
              const T* ir = plane_re + (yy + u) * w + v;
              const T* ii = plane_im + (yy + u) * w + v;
              const T* grow = gr + yy * wo;
              const T* girow = gi + yy * wo;
              for (std::size_t xx = 0; xx < wo; ++xx) {
                dot_re[xx] += ir[xx] * grow[xx] + ii[xx] * girow[xx];
                dot_im[xx] += ir[xx] * girow[xx] - ii[xx] * grow[xx];
              }
            }
            T s_re = 0, s_im = 0;
            for (std::size_t xx = 0; xx < wo; ++xx) {
              s_re += dot_re[xx];
              s_im += dot_im[xx];
            }
            const std::size_t widx = ((o * in_ + c) * k_ + u) * k_ + v;
            weight.grad[widx] += std::complex<T>(s_re, s_im);

            if (need_input_grad) {
              // g_x = conj(w) * g
              const T wr = weight[widx].real(), wi = weight[widx].imag();
              T* base_re = gx_re.data() + (b * in_ + c) * h * w;
              T* base_im = gx_im.data() + (b * in_ + c) * h * w;
              for (std::size_t yy = 0; yy < ho; ++yy) {
                T* xr = base_re + (yy + u) * w + v;
                T* xi = base_im + (yy + u) * w + v;
                const T* grow = gr + yy * wo;
                const T* girow = gi + yy * wo;
                for (std::size_t xx = 0; xx < wo; ++xx) {
                  xr[xx] += wr * grow[xx] + wi * girow[xx];
                  xi[xx] += wr * girow[xx] - wi * grow[xx];
                }
              }
            }
          }
      }
    }
  }
  if (!need_input_grad) return {};
  CTensor<T> gx(cached_shape_);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = {gx_re[i], gx_im[i]};
  return gx;
}

// ---------------------------------------------------------------------------
// ComplexMaxPool2d

template <class T>
Shape ComplexMaxPool2d<T>::output_shape(const Shape& in) const {
  if (in.size() != 4) throw ShapeError("maxpool2d expects (B, C, H, W), got " + shape_string(in));
  if (w_ == 0 || in[2] < w_ || in[3] < w_)
    throw ShapeError("maxpool2d window " + std::to_string(w_) + " does not fit input " + shape_string(in));
  return {in[0], in[1], in[2] / w_, in[3] / w_};
}

template <class T>
CTensor<T> ComplexMaxPool2d<T>::run(const CTensor<T>& x, std::vector<std::size_t>* argmax) const {
  const Shape os = output_shape(x.shape);
  const std::size_t h = x.dim(2), w = x.dim(3), ho = os[2], wo = os[3];
  CTensor<T> y(os);
  if (argmax) argmax->resize(y.size());
  for (std::size_t plane = 0; plane < os[0] * os[1]; ++plane) {
    const std::size_t in_base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = in_base + (oy * w_) * w + ox * w_;
        T best_mod = std::norm(x[best]);
        for (std::size_t dy = 0; dy < w_; ++dy)
          for (std::size_t dx = 0; dx < w_; ++dx) {
            const std::size_t idx = in_base + (oy * w_ + dy) * w + ox * w_ + dx;
            const T m = std::norm(x[idx]);
            if (m > best_mod) {
              best_mod = m;
              best = idx;
            }
          }
        const std::size_t out_idx = (plane * ho + oy) * wo + ox;
        y[out_idx] = x[best];
        if (argmax) (*argmax)[out_idx] = best;
      }
  }
  return y;
}

template <class T>
CTensor<T> ComplexMaxPool2d<T>::forward(const CTensor<T>& x) {
  auto y = run(x, &argmax_);
  in_shape_ = x.shape;
  has_cache_ = true;
  return y;
}

template <class T>
CTensor<T> ComplexMaxPool2d<T>::infer(const CTensor<T>& x) const {
  return run(x, nullptr);
}

template <class T>
CTensor<T> ComplexMaxPool2d<T>::backward(const CTensor<T>& grad_out) const {
  require_cache(has_cache_, "complex_maxpool2d");
  if (grad_out.size() != argmax_.size())
    throw ShapeError("maxpool2d backward gradient has " + std::to_string(grad_out.size()) +
                     " values, expected " + std::to_string(argmax_.size()));
  CTensor<T> gx(in_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) gx[argmax_[i]] += grad_out[i];
  return gx;
}

// ---------------------------------------------------------------------------
// CReLU

template <class T>
CTensor<T> CReLU<T>::infer(const CTensor<T>& x) const {
  CTensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = passes(x[i]) ? x[i] : std::complex<T>{};
  return y;
}

template <class T>
CTensor<T> CReLU<T>::forward(const CTensor<T>& x) {
  mask_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mask_[i] = passes(x[i]) ? 1 : 0;
  has_cache_ = true;
  return infer(x);
}

template <class T>
CTensor<T> CReLU<T>::backward(const CTensor<T>& grad_out) const {
  require_cache(has_cache_, "crelu");
  if (grad_out.size() != mask_.size()) throw ShapeError("crelu backward gradient size mismatch");
  CTensor<T> gx(grad_out.shape);
  for (std::size_t i = 0; i < mask_.size(); ++i) gx[i] = mask_[i] ? grad_out[i] : std::complex<T>{};
  return gx;
}

// ---------------------------------------------------------------------------
// ComplexBatchNorm

template <class T>
ComplexBatchNorm<T>::ComplexBatchNorm(std::size_t features, double eps, double momentum)
    : gamma(Shape{features}),
      beta(Shape{features}),
      running_mean(Shape{features}),
      running_var(Shape{features}),
      f_(features),
      eps_(eps),
      momentum_(momentum) {
  std::fill(gamma.data.begin(), gamma.data.end(), std::complex<T>(1, 1));
  std::fill(running_var.data.begin(), running_var.data.end(), std::complex<T>(1, 1));
}

template <class T>
CTensor<T> ComplexBatchNorm<T>::infer(const CTensor<T>& x) const {
  if (x.rank() < 2 || x.dim(1) != f_)
    throw ShapeError("batchnorm expects feature axis of size " + std::to_string(f_) + ", got " +
                     shape_string(x.shape));
  const std::size_t inner = x.size() / (x.dim(0) * f_);
  CTensor<T> y(x.shape);
  for (std::size_t c = 0; c < f_; ++c) {
    const T isr = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c].real()) + eps_));
    const T isi = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c].imag()) + eps_));
    const T mr = running_mean[c].real(), mi = running_mean[c].imag();
    for (std::size_t b = 0; b < x.dim(0); ++b) {
      const std::size_t base = (b * f_ + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const auto z = x[base + i];
        y[base + i] = {gamma[c].real() * (z.real() - mr) * isr + beta[c].real(),
                       gamma[c].imag() * (z.imag() - mi) * isi + beta[c].imag()};
      }
    }
  }
  return y;
}

template <class T>
CTensor<T> ComplexBatchNorm<T>::forward(const CTensor<T>& x) {
  if (x.rank() < 2 || x.dim(1) != f_)
    throw ShapeError("batchnorm expects feature axis of size " + std::to_string(f_) + ", got " +
                     shape_string(x.shape));
  const std::size_t batch = x.dim(0);
  const std::size_t inner = x.size() / (batch * f_);
  shape_ = x.shape;
  inv_std_.assign(f_, {});
  xhat_.resize(x.size());
  has_cache_ = true;
  if (!training_) {
    cached_train_ = false;
    for (std::size_t c = 0; c < f_; ++c) {
      inv_std_[c] = {static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c].real()) + eps_)),
                     static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c].imag()) + eps_))};
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t idx = (b * f_ + c) * inner + i;
          xhat_[idx] = {(x[idx].real() - running_mean[c].real()) * inv_std_[c].real(),
                        (x[idx].imag() - running_mean[c].imag()) * inv_std_[c].imag()};
        }
    }
  } else {
    if (batch < 2) throw ShapeError("batchnorm in train mode needs a batch of >= 2, got " + std::to_string(batch));
    cached_train_ = true;
    const double n = static_cast<double>(batch * inner);
    for (std::size_t c = 0; c < f_; ++c) {
      double sr = 0, si = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const auto z = x[(b * f_ + c) * inner + i];
          sr += z.real();
          si += z.imag();
        }
      const double mr = sr / n, mi = si / n;
      double vr = 0, vi = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const auto z = x[(b * f_ + c) * inner + i];
          vr += (z.real() - mr) * (z.real() - mr);
          vi += (z.imag() - mi) * (z.imag() - mi);
        }
      vr /= n;
      vi /= n;
      const double isr = 1.0 / std::sqrt(vr + eps_), isi = 1.0 / std::sqrt(vi + eps_);
      inv_std_[c] = {static_cast<T>(isr), static_cast<T>(isi)};
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t idx = (b * f_ + c) * inner + i;
          xhat_[idx] = {static_cast<T>((x[idx].real() - mr) * isr), static_cast<T>((x[idx].imag() - mi) * isi)};
        }
      const double unbias = n / (n - 1.0);
      const double m = momentum_;
      running_mean[c] = {static_cast<T>((1 - m) * running_mean[c].real() + m * mr),
                         static_cast<T>((1 - m) * running_mean[c].imag() + m * mi)};
      running_var[c] = {static_cast<T>((1 - m) * running_var[c].real() + m * vr * unbias),
                        static_cast<T>((1 - m) * running_var[c].imag() + m * vi * unbias)};
    }
  }
  CTensor<T> y(x.shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < f_; ++c)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t idx = (b * f_ + c) * inner + i;
        y[idx] = {gamma[c].real() * xhat_[idx].real() + beta[c].real(),
                  gamma[c].imag() * xhat_[idx].imag() + beta[c].imag()};
      }
  return y;
}

template <class T>
CTensor<T> ComplexBatchNorm<T>::backward(const CTensor<T>& grad_out) {
  require_cache(has_cache_, "complex_batchnorm");
  if (grad_out.shape != shape_) throw ShapeError("batchnorm backward gradient shape mismatch");
  if (!gamma.has_grad()) gamma.zero_grad();
  if (!beta.has_grad()) beta.zero_grad();
  const std::size_t batch = shape_[0];
  const std::size_t inner = grad_out.size() / (batch * f_);
  const double n = static_cast<double>(batch * inner);
  CTensor<T> gx(shape_);
  for (std::size_t c = 0; c < f_; ++c) {
    double s_dy_r = 0, s_dy_i = 0, s_dyx_r = 0, s_dyx_i = 0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t idx = (b * f_ + c) * inner + i;
        s_dy_r += grad_out[idx].real();
        s_dy_i += grad_out[idx].imag();
        s_dyx_r += static_cast<double>(grad_out[idx].real()) * xhat_[idx].real();
        s_dyx_i += static_cast<double>(grad_out[idx].imag()) * xhat_[idx].imag();
      }
    gamma.grad[c] += std::complex<T>(static_cast<T>(s_dyx_r), static_cast<T>(s_dyx_i));
    beta.grad[c] += std::complex<T>(static_cast<T>(s_dy_r), static_cast<T>(s_dy_i));
    const double gr = gamma[c].real(), gi = gamma[c].imag();
    const double isr = inv_std_[c].real(), isi = inv_std_[c].imag();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t idx = (b * f_ + c) * inner + i;
        const double dyr = grad_out[idx].real(), dyi = grad_out[idx].imag();
        if (cached_train_) {
          const double dxr = gr * isr / n * (n * dyr - s_dy_r - xhat_[idx].real() * s_dyx_r);
          const double dxi = gi * isi / n * (n * dyi - s_dy_i - xhat_[idx].imag() * s_dyx_i);
          gx[idx] = {static_cast<T>(dxr), static_cast<T>(dxi)};
        } else {
          gx[idx] = {static_cast<T>(dyr * gr * isr), static_cast<T>(dyi * gi * isi)};
        }
      }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// FlattenAmpPhase

template <class T>
T FlattenAmpPhase<T>::phase(std::complex<T> z) {
  if (z.real() == T(0) && z.imag() == T(0)) return T(0);
  const T p = std::atan2(z.imag(), z.real());
  return p <= -std::numbers::pi_v<T> ? std::numbers::pi_v<T> : p;
}

template <class T>
RTensor<T> FlattenAmpPhase<T>::infer(const CTensor<T>& x) const {
  if (x.rank() < 1 || x.dim(0) == 0) throw ShapeError("flatten expects a leading batch axis");
  const std::size_t batch = x.dim(0), f = x.size() / batch;
  RTensor<T> y(Shape{batch, 2 * f});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < f; ++i) {
      const auto z = x[b * f + i];
      y[b * 2 * f + i] = std::abs(z);
      y[b * 2 * f + f + i] = phase(z);
    }
  return y;
}

template <class T>
RTensor<T> FlattenAmpPhase<T>::forward(const CTensor<T>& x) {
  input_ = x;
  input_.grad.clear();
  has_cache_ = true;
  return infer(x);
}

template <class T>
CTensor<T> FlattenAmpPhase<T>::backward(const RTensor<T>& grad_out) const {
  require_cache(has_cache_, "flatten_amp_phase");
  const std::size_t batch = input_.dim(0), f = input_.size() / batch;
  if (grad_out.size() != 2 * f * batch) throw ShapeError("flatten backward gradient size mismatch");
  CTensor<T> gx(input_.shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < f; ++i) {
      const auto z = input_[b * f + i];
      const T r2 = std::norm(z);
      if (r2 == T(0)) continue;
      const T r = std::sqrt(r2);
      const T ga = grad_out[b * 2 * f + i];
      const T gp = grad_out[b * 2 * f + f + i];
      // d|z| = (re, im)/|z|; d arg z = (-im, re)/|z|^2
      gx[b * f + i] = {ga * z.real() / r - gp * z.imag() / r2, ga * z.imag() / r + gp * z.real() / r2};
    }
  return gx;
}

// ---------------------------------------------------------------------------
// DenseReal

template <class T>
DenseReal<T>::DenseReal(std::size_t in_features, std::size_t out_features)
    : weight(Shape{out_features, in_features}), bias(Shape{out_features}), in_(in_features), out_(out_features) {
  if (in_ == 0 || out_ == 0) throw ShapeError("dense layer sizes must be >= 1");
}

template <class T>
void DenseReal<T>::init_glorot(std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in_ + out_));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& w : weight.data) w = static_cast<T>(dist(rng));
  std::fill(bias.data.begin(), bias.data.end(), T(0));
}

template <class T>
RTensor<T> DenseReal<T>::infer(const RTensor<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw ShapeError("dense expects (B, " + std::to_string(in_) + "), got " + shape_string(x.shape));
  const std::size_t batch = x.dim(0);
  RTensor<T> y(Shape{batch, out_});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_; ++o) {
      const T* wrow = weight.data.data() + o * in_;
      const T* xrow = x.data.data() + b * in_;
      T acc = 0;
      for (std::size_t i = 0; i < in_; ++i) acc += wrow[i] * xrow[i];
      y[b * out_ + o] = acc + bias[o];
    }
  return y;
}

template <class T>
RTensor<T> DenseReal<T>::forward(const RTensor<T>& x) {
  auto y = infer(x);
  input_ = x;
  input_.grad.clear();
  has_cache_ = true;
  return y;
}

template <class T>
RTensor<T> DenseReal<T>::backward(const RTensor<T>& grad_out, bool need_input_grad) {
  require_cache(has_cache_, "dense_real");
  const std::size_t batch = input_.dim(0);
  if (grad_out.shape != Shape{batch, out_}) throw ShapeError("dense backward gradient shape mismatch");
  if (!weight.has_grad()) weight.zero_grad();
  if (!bias.has_grad()) bias.zero_grad();
  RTensor<T> gx;
  if (need_input_grad) gx = RTensor<T>(input_.shape);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* xrow = input_.data.data() + b * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const T g = grad_out[b * out_ + o];
      bias.grad[o] += g;
      T* gw = weight.grad.data() + o * in_;
      for (std::size_t i = 0; i < in_; ++i) gw[i] += g * xrow[i];
      if (need_input_grad) {
        const T* wrow = weight.data.data() + o * in_;
        T* gxrow = gx.data.data() + b * in_;
        for (std::size_t i = 0; i < in_; ++i) gxrow[i] += g * wrow[i];
      }
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Loss

template <class T>
LossResult<T> softmax_cross_entropy(const RTensor<T>& logits, std::span<const int> targets) {
  if (logits.rank() != 2) throw ShapeError("cross entropy expects (B, C) logits, got " + shape_string(logits.shape));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != batch)
    throw ShapeError("cross entropy got " + std::to_string(targets.size()) + " targets for batch " + std::to_string(batch));
  LossResult<T> r;
  r.grad = RTensor<T>(logits.shape);
  r.probs = RTensor<T>(logits.shape);
  double total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int t = targets[b];
    if (t < 0 || static_cast<std::size_t>(t) >= classes)
      throw ValidationError("target class " + std::to_string(t) + " outside [0, " + std::to_string(classes) + ")");
    const T* row = logits.data.data() + b * classes;
    const T mx = *std::max_element(row, row + classes);
    T sum = 0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - mx);
    const T lse = mx + std::log(sum);
    total += static_cast<double>(lse - row[t]);
    for (std::size_t c = 0; c < classes; ++c) {
      const T p = std::exp(row[c] - lse);
      r.probs[b * classes + c] = p;
      r.grad[b * classes + c] = (p - (static_cast<std::size_t>(t) == c ? T(1) : T(0))) / static_cast<T>(batch);
    }
  }
  r.loss = static_cast<T>(total / static_cast<double>(batch));
  return r;
}

template <class T>
std::vector<int> argmax_rows(const RTensor<T>& logits) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::vector<int> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = logits.data.data() + b * classes;
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (row[c] > row[best]) best = c;
    out[b] = static_cast<int>(best);
  }
  return out;
}

#define SMCNET_INSTANTIATE(T)                                                              \
  template class ComplexConv2d<T>;                                                         \
  template class ComplexMaxPool2d<T>;                                                      \
  template class CReLU<T>;                                                                 \
  template class ComplexBatchNorm<T>;                                                      \
  template class FlattenAmpPhase<T>;                                                       \
  template class DenseReal<T>;                                                             \
  template LossResult<T> softmax_cross_entropy<T>(const RTensor<T>&, std::span<const int>); \
  template std::vector<int> argmax_rows<T>(const RTensor<T>&);

SMCNET_INSTANTIATE(float)
SMCNET_INSTANTIATE(double)

#undef SMCNET_INSTANTIATE

}  // namespace smcnet
