#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "smcnet/layers.hpp"

namespace smcnet {

enum class Precision : std::uint32_t { F32 = 32, F64 = 64 };

std::string_view to_string(Precision p);

struct ModelConfig {
  std::uint32_t in_channels = 1;
  std::uint32_t conv1_filters = 8;
  std::uint32_t conv2_filters = 3;
  std::uint32_t kernel = 5;
  std::uint32_t pool = 2;
  std::uint32_t input_h = 400;  // Rx*Tx
  std::uint32_t input_w = 100;  // N
  std::uint32_t num_classes = 5;
  /// false: conv -> BN -> cReLU (default); true: conv -> cReLU -> BN.
  bool bn_after_activation = false;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;

  bool operator==(const ModelConfig&) const = default;
};

struct StageShape {
  std::string stage;
  Shape shape;  // per sample, without the batch axis
};

/// Per-sample shapes after every stage; throws ShapeError naming the first stage that cannot run.
std::vector<StageShape> stage_shapes(const ModelConfig& cfg);

/// Closed-form parameter count from layer shapes (real scalars, complex counted twice).
std::size_t expected_parameter_count(const ModelConfig& cfg);

/// cConv -> cBN -> cReLU -> cConv -> cBN -> cReLU -> cMaxPool -> |z|,arg z -> dense.
template <class T>
class SMCNet {
 public:
  explicit SMCNet(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  /// Training-path forward over (B, C, H, W); records what backward() needs.
  RTensor<T> forward(const CTensor<T>& x);
  /// Pure inference with running batch-norm statistics; leaves the model untouched.
  RTensor<T> infer(const CTensor<T>& x) const;
  /// Accumulates parameter gradients from dL/dlogits. Returns dL/dinput.
  CTensor<T> backward(const RTensor<T>& grad_logits, bool need_input_grad = false);

  void set_training(bool on);
  bool training() const { return training_; }
  void zero_grad();

  /// Trainable tensors in build order.
  std::vector<ParamRef<T>> parameters();
  /// Non-trainable state (running statistics) in build order.
  std::vector<ParamRef<T>> buffers();
  std::size_t parameter_count() const;

  ComplexConv2d<T> conv1, conv2;
  ComplexBatchNorm<T> bn1, bn2;
  CReLU<T> act1, act2;
  ComplexMaxPool2d<T> pool;
  FlattenAmpPhase<T> flatten;
  DenseReal<T> head;

 private:
  ModelConfig cfg_;
  bool training_ = true;
  bool has_forward_ = false;
};

/// Counts every real scalar a parameter list exposes.
template <class T>
std::size_t count_scalars(const std::vector<ParamRef<T>>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

// SMCW weight files: magic "SMCW", u32 version, serialized ModelConfig, then every parameter
// tensor and every running-statistics buffer in build order, each as u32 scalar count followed
// by little-endian values of the model's precision (f32 or f64).
inline constexpr char kWeightsMagic[4] = {'S', 'M', 'C', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

template <class T>
void save_weights(const SMCNet<T>& model, std::ostream& sink);
/// Throws ConfigError when the file's ModelConfig differs from the model's.
template <class T>
void load_weights(SMCNet<T>& model, std::istream& source);
/// Reads only the header of a weight file.
ModelConfig read_weights_config(std::istream& source);

/// FNV-1a digest over all parameters and buffers.
template <class T>
std::uint64_t weights_digest(const SMCNet<T>& model);

}  // namespace smcnet
