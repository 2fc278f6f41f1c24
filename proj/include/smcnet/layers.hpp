#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "smcnet/tensor.hpp"

// Complex-valued network layers with hand-written reverse-mode passes.
//
// Gradient convention: every layer differentiates through the (Re, Im) decomposition of its
// complex inputs and parameters. Gradients are stored as dL/dRe + i*dL/dIm, which for a real
// loss equals 2*dL/dconj(z) in Wirtinger terms. Under this convention a holomorphic product
// y = w*x propagates g_x = conj(w)*g_y and g_w = conj(x)*g_y.
//
// Layers cache what backward() needs during forward(). infer() is the const, cache-free path
// used for evaluation.

namespace smcnet {

/// Valid (unpadded), stride-1 complex 2-D convolution over (B, C_in, H, W).
template <class T>
class ComplexConv2d {
 public:
  ComplexConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel);

  /// Re and Im of each weight drawn from N(0, 1/(2*fan_in)); biases zero.
  void init_glorot(std::mt19937_64& rng);

  CTensor<T> forward(const CTensor<T>& x);
  CTensor<T> infer(const CTensor<T>& x) const;
  /// Accumulates weight/bias gradients; returns the input gradient when requested.
  CTensor<T> backward(const CTensor<T>& grad_out, bool need_input_grad = true);

  Shape output_shape(const Shape& in) const;
  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t kernel() const { return k_; }

  CTensor<T> weight;  // (out, in, k, k)
  CTensor<T> bias;    // (out)

 private:
  void run(const CTensor<T>& x, CTensor<T>& y, std::vector<T>* planar_in) const;

  std::size_t in_, out_, k_;
  Shape cached_shape_;
  std::vector<T> cached_re_, cached_im_;
  bool has_cache_ = false;
};

/// Max pooling by modulus: each window yields its element of largest |z| (phase kept).
/// Ties go to the first element in row-major window order. Trailing rows/columns that do not
/// fill a window are dropped.
template <class T>
class ComplexMaxPool2d {
 public:
  explicit ComplexMaxPool2d(std::size_t window = 2) : w_(window) {}

  CTensor<T> forward(const CTensor<T>& x);
  CTensor<T> infer(const CTensor<T>& x) const;
  CTensor<T> backward(const CTensor<T>& grad_out) const;

  Shape output_shape(const Shape& in) const;
  std::size_t window() const { return w_; }

 private:
  CTensor<T> run(const CTensor<T>& x, std::vector<std::size_t>* argmax) const;

  std::size_t w_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
  bool has_cache_ = false;
};

/// z if Re z >= 0 and Im z >= 0, else 0.
template <class T>
class CReLU {
 public:
  CTensor<T> forward(const CTensor<T>& x);
  CTensor<T> infer(const CTensor<T>& x) const;
  CTensor<T> backward(const CTensor<T>& grad_out) const;

  static bool passes(std::complex<T> z) { return z.real() >= T(0) && z.imag() >= T(0); }

 private:
  std::vector<std::uint8_t> mask_;
  bool has_cache_ = false;
};

/// Naive complex batch norm: BN(Re z) + i*BN(Im z), statistics per feature over the batch
/// (and over spatial positions for inputs of rank > 2). Feature axis is axis 1.
///
/// gamma packs (gamma_re, gamma_im) as the real/imag parts of one complex value per feature;
/// beta, running_mean and running_var are packed the same way.
template <class T>
class ComplexBatchNorm {
 public:
  explicit ComplexBatchNorm(std::size_t features, double eps = 1e-5, double momentum = 0.1);

  CTensor<T> forward(const CTensor<T>& x);
  CTensor<T> infer(const CTensor<T>& x) const;
  CTensor<T> backward(const CTensor<T>& grad_out);

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }
  std::size_t features() const { return f_; }
  double eps() const { return eps_; }

  CTensor<T> gamma;
  CTensor<T> beta;
  CTensor<T> running_mean;
  CTensor<T> running_var;

 private:
  std::size_t f_;
  double eps_, momentum_;
  bool training_ = true;
  bool cached_train_ = false;
  Shape shape_;
  std::vector<std::complex<T>> xhat_;
  std::vector<std::complex<T>> inv_std_;  // per feature, packed (re, im)
  bool has_cache_ = false;
};

/// (B, ...) complex -> (B, 2F) real: [|z_1|..|z_F|, arg z_1..arg z_F] per sample.
/// arg is in (-pi, pi]; arg(0) = 0 and the gradient at z = 0 is zero.
template <class T>
class FlattenAmpPhase {
 public:
  RTensor<T> forward(const CTensor<T>& x);
  RTensor<T> infer(const CTensor<T>& x) const;
  CTensor<T> backward(const RTensor<T>& grad_out) const;

  static T phase(std::complex<T> z);

 private:
  CTensor<T> input_;
  bool has_cache_ = false;
};

/// Real affine head y = W x + b over (B, F).
template <class T>
class DenseReal {
 public:
  DenseReal(std::size_t in_features, std::size_t out_features);

  /// Glorot-uniform weights, zero bias.
  void init_glorot(std::mt19937_64& rng);

  RTensor<T> forward(const RTensor<T>& x);
  RTensor<T> infer(const RTensor<T>& x) const;
  RTensor<T> backward(const RTensor<T>& grad_out, bool need_input_grad = true);

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  RTensor<T> weight;  // (out, in)
  RTensor<T> bias;    // (out)

 private:
  std::size_t in_, out_;
  RTensor<T> input_;
  bool has_cache_ = false;
};

template <class T>
struct LossResult {
  T loss = 0;            // batch mean of -log softmax(logits)[target]
  RTensor<T> grad;       // (softmax - onehot) / B
  RTensor<T> probs;      // (B, C)
};

/// Max-subtracted softmax cross entropy averaged over the batch.
template <class T>
LossResult<T> softmax_cross_entropy(const RTensor<T>& logits, std::span<const int> targets);

/// argmax per row, ties to the lowest index.
template <class T>
std::vector<int> argmax_rows(const RTensor<T>& logits);

}  // namespace smcnet
