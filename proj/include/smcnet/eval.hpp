#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "smcnet/datacube.hpp"
#include "smcnet/dsp.hpp"
#include "smcnet/model.hpp"
#include "smcnet/trainer.hpp"

namespace smcnet {

enum class EvalSplit { D0, D1 };
std::string_view to_string(EvalSplit s);

using ConfusionCounts = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;
using ConfusionPercent = std::array<std::array<double, kNumClasses>, kNumClasses>;

struct EvalReport {
  ConfusionCounts counts{};      // [truth][prediction]
  ConfusionPercent confusion{};  // row percentages; all-zero rows for absent classes
  double overall_accuracy = 0;   // percent
  EvalSplit split = EvalSplit::D0;
  PreprocMode preproc_mode = PreprocMode::RangeFft;
  std::size_t n_samples = 0;
};

/// Builds a report from ground truth and predicted class ids.
EvalReport report_from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted, EvalSplit split,
                                   PreprocMode mode);

/// Argmax-of-logits evaluation in inference mode (model state untouched).
template <class T>
EvalReport evaluate(const SMCNet<T>& model, const SampleSet& samples, EvalSplit split, PreprocMode mode,
                    std::size_t chunk = 32);

template <class T>
std::vector<int> predict(const SMCNet<T>& model, const SampleSet& samples, std::size_t chunk = 32);

struct ComparisonReport {
  EvalReport iq_d0, fft_d0, iq_d1, fft_d1;
  /// True when range-FFT accuracy at unseen distances is at least the raw-IQ accuracy.
  bool fft_generalizes_better = false;
};

/// Published SMCNet accuracies (IQ d0, FFT d0, IQ d1, FFT d1), for display next to local results.
inline constexpr std::array<double, 4> kPublishedSmcnetAccuracy = {99.53, 99.12, 25.25, 58.82};

/// Evaluates both models on both distance sets. Cubes are preprocessed per arm.
template <class T>
ComparisonReport compare_modes(const SMCNet<T>& model_iq, const SMCNet<T>& model_fft, const std::vector<DataCube>& d0,
                               const std::vector<DataCube>& d1);

nlohmann::ordered_json to_json(const EvalReport& r);
nlohmann::ordered_json to_json(const ComparisonReport& r);
std::string render_table(const EvalReport& r);
std::string render_table(const ComparisonReport& r);
/// 5x5 row-percentage matrix with a header row.
std::string confusion_csv(const EvalReport& r);

}  // namespace smcnet
