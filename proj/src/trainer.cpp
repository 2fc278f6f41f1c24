#include "smcnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "smcnet/errors.hpp"

namespace smcnet {

SplitResult stratified_split(const std::vector<ManifestEntry>& entries, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("split fraction must lie in (0, 1]");
  SplitResult out;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<ManifestEntry>> cells;
  for (const auto& e : entries) {
    if (e.split == SplitTag::TestD1)
      out.test_d1.push_back(e);
    else
      cells[{id_of(e.label), e.distance_mm}].push_back(e);
  }
  for (auto& [key, cell] : cells) {
    if (cell.size() < 2)
      throw ValidationError("cannot split cell (" + std::string(to_string(static_cast<MaterialClass>(key.first))) +
                            ", " + std::to_string(key.second) + " mm): it holds " + std::to_string(cell.size()) +
                            " sample(s), need >= 2");
    std::sort(cell.begin(), cell.end(), [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(key.first) << 32) ^ key.second);
    std::shuffle(cell.begin(), cell.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cell.size())));
    for (std::size_t i = 0; i < cell.size(); ++i) {
      ManifestEntry e = cell[i];
      e.split = i < n_train ? SplitTag::Train : SplitTag::TestD0;
      (i < n_train ? out.train : out.test_d0).push_back(std::move(e));
    }
  }
  if (out.test_d0.empty()) {
    out.empty_test = true;
    std::cerr << "warning: split fraction " << fraction << " leaves no d0 test samples\n";
  }
  return out;
}

Sample prepare_sample(const DataCube& cube, PreprocMode mode) {
  ComplexMatrix m = preprocess_cube(cube, mode);
  double peak = 0;
  for (const auto& z : m.data) peak = std::max(peak, std::abs(z));
  if (peak > 0)
    for (auto& z : m.data) z /= peak;
  return {std::move(m.data), static_cast<int>(id_of(cube.label)), cube.distance_mm};
}

SampleSet prepare_samples(const std::vector<DataCube>& cubes, PreprocMode mode) {
  SampleSet set;
  if (cubes.empty()) return set;
  set.height = cubes.front().channels();
  set.width = cubes.front().fast_time_len;
  set.samples.reserve(cubes.size());
  for (const auto& c : cubes) {
    if (c.channels() != set.height || c.fast_time_len != set.width)
      throw ShapeError("cube " + std::to_string(c.sample_id) + " has shape " + std::to_string(c.channels()) + "x" +
                       std::to_string(c.fast_time_len) + ", dataset uses " + std::to_string(set.height) + "x" +
                       std::to_string(set.width));
    set.samples.push_back(prepare_sample(c, mode));
  }
  return set;
}

std::vector<DataCube> load_cubes(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries) {
  std::vector<DataCube> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_cube(manifest.resolve(e)));
  return out;
}

template <class T>
CTensor<T> make_batch(const SampleSet& set, std::span<const std::size_t> indices) {
  CTensor<T> x(Shape{indices.size(), 1, set.height, set.width});
  const std::size_t plane = set.height * set.width;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = set.samples.at(indices[b]).input;
    for (std::size_t i = 0; i < plane; ++i)
      x[b * plane + i] = {static_cast<T>(s[i].real()), static_cast<T>(s[i].imag())};
  }
  return x;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  // Batch norm needs two samples per batch in train mode.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

template <class T>
Adam<T>::Adam(const std::vector<ParamRef<T>>& params, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

template <class T>
void Adam<T>::step(std::vector<ParamRef<T>>& params) {
  if (params.size() != m_.size()) throw UsageError("Adam stepped with a different parameter list");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double update = cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
}

namespace {

template <class T>
std::string norm_report(SMCNet<T>& model) {
  std::ostringstream os;
  for (const auto& p : model.parameters()) {
    double w = 0, g = 0;
    for (T v : p.value) w += static_cast<double>(v) * v;
    for (T v : p.grad) g += static_cast<double>(v) * v;
    os << "\n  " << p.name << ": |w| = " << std::sqrt(w) << ", |g| = " << std::sqrt(g);
  }
  return os.str();
}

}  // namespace

template <class T>
std::vector<EpochLog> train(SMCNet<T>& model, const SampleSet& data, const TrainConfig& cfg,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.samples.empty()) throw ValidationError("training set is empty");
  if (data.height != model.config().input_h || data.width != model.config().input_w)
    throw ShapeError("training samples are " + std::to_string(data.height) + "x" + std::to_string(data.width) +
                     " but the model expects " + std::to_string(model.config().input_h) + "x" +
                     std::to_string(model.config().input_w));
  if (data.samples.size() < 2) throw ValidationError("training needs at least 2 samples for batch norm");

  model.set_training(true);
  auto params = model.parameters();
  Adam<T> adam(params, cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  std::vector<EpochLog> log;

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    for (const auto& batch : epoch_batches(data.samples.size(), cfg.batch_size, rng)) {
      const CTensor<T> x = make_batch<T>(data, batch);
      std::vector<int> targets;
      targets.reserve(batch.size());
      for (auto i : batch) targets.push_back(data.samples[i].label);

      model.zero_grad();
      const RTensor<T> logits = model.forward(x);
      const LossResult<T> loss = softmax_cross_entropy(logits, targets);
      if (!std::isfinite(static_cast<double>(loss.loss)))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " (lr = " +
                            std::to_string(cfg.adam.lr) + ")" + norm_report(model));
      model.backward(loss.grad);
      adam.step(params);

      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(batch.size());
      const auto pred = argmax_rows(logits);
      for (std::size_t b = 0; b < batch.size(); ++b) correct += pred[b] == targets[b] ? 1 : 0;
      seen += batch.size();
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(seen);
    entry.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  model.set_training(false);
  return log;
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open training log " + path.string());
  out << "epoch,loss,train_acc,wall_ms\n";
  out.precision(17);
  for (const auto& e : log) out << e.epoch << ',' << e.loss << ',' << e.train_acc << ',' << e.wall_ms << '\n';
  if (!out) throw IoError("failed writing training log " + path.string());
}

ModelConfig model_config_for(const SampleSet& data, std::uint64_t seed, Precision precision) {
  ModelConfig c;
  c.input_h = static_cast<std::uint32_t>(data.height);
  c.input_w = static_cast<std::uint32_t>(data.width);
  c.seed = seed;
  c.precision = precision;
  return c;
}

template CTensor<float> make_batch<float>(const SampleSet&, std::span<const std::size_t>);
template CTensor<double> make_batch<double>(const SampleSet&, std::span<const std::size_t>);
template class Adam<float>;
template class Adam<double>;
template std::vector<EpochLog> train<float>(SMCNet<float>&, const SampleSet&, const TrainConfig&,
                                            const std::function<void(const EpochLog&)>&);
template std::vector<EpochLog> train<double>(SMCNet<double>&, const SampleSet&, const TrainConfig&,
                                             const std::function<void(const EpochLog&)>&);

}  // namespace smcnet
