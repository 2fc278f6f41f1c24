#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "smcnet/datacube.hpp"
#include "smcnet/dsp.hpp"
#include "smcnet/model.hpp"

namespace smcnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::uint32_t epochs = 10;
  std::uint32_t batch_size = 16;
  AdamConfig adam;
  PreprocMode preproc = PreprocMode::RangeFft;
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
};

struct SplitResult {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test_d0;
  std::vector<ManifestEntry> test_d1;
  bool empty_test = false;  // fraction 1.0 left no d0 test samples
};

/// Splits every (class, distance) cell of the non-d1 entries at `fraction` (train share).
/// Membership depends only on (entries as a set, fraction, seed), not on row order.
SplitResult stratified_split(const std::vector<ManifestEntry>& entries, double fraction, std::uint64_t seed);

/// A preprocessed network input: H*W complex values scaled by the cube's max modulus.
struct Sample {
  std::vector<cdouble> input;
  int label = 0;
  std::uint32_t distance_mm = 0;
};

struct SampleSet {
  std::size_t height = 0;  // channels
  std::size_t width = 0;   // fast-time samples / range bins
  std::vector<Sample> samples;
};

/// Preprocesses (raw IQ or range FFT) and divides each sample by its largest modulus.
Sample prepare_sample(const DataCube& cube, PreprocMode mode);
SampleSet prepare_samples(const std::vector<DataCube>& cubes, PreprocMode mode);
std::vector<DataCube> load_cubes(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries);

template <class T>
CTensor<T> make_batch(const SampleSet& set, std::span<const std::size_t> indices);

/// Shuffled index batches covering 0..n-1 once; a trailing single sample joins the previous batch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng);

/// Adam over the real scalars of every parameter (Re and Im of complex parameters independently).
template <class T>
class Adam {
 public:
  Adam(const std::vector<ParamRef<T>>& params, AdamConfig cfg);
  void step(std::vector<ParamRef<T>>& params);
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochLog {
  std::uint32_t epoch = 0;
  double loss = 0;       // sample-weighted mean batch loss
  double train_acc = 0;  // percent, from the training forward passes
  double wall_ms = 0;
};

template <class T>
std::vector<EpochLog> train(SMCNet<T>& model, const SampleSet& data, const TrainConfig& cfg,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// epoch,loss,train_acc,wall_ms
void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

/// Model config matching a sample set's input shape.
ModelConfig model_config_for(const SampleSet& data, std::uint64_t seed, Precision precision);

}  // namespace smcnet
