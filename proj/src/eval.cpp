#include "smcnet/eval.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "smcnet/errors.hpp"

namespace smcnet {

std::string_view to_string(EvalSplit s) { return s == EvalSplit::D0 ? "d0" : "d1"; }

EvalReport report_from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted, EvalSplit split,
                                   PreprocMode mode) {
  if (truth.empty()) throw ValidationError("cannot evaluate an empty sample set");
  if (truth.size() != predicted.size()) throw ShapeError("truth and prediction counts differ");
  EvalReport r;
  r.split = split;
  r.preproc_mode = mode;
  r.n_samples = truth.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) throw ValidationError("class id outside 0..4");
    ++r.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    correct += t == p ? 1 : 0;
  }
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    std::size_t row = 0;
    for (auto c : r.counts[t]) row += c;
    if (row == 0) continue;
    for (std::size_t p = 0; p < kNumClasses; ++p)
      r.confusion[t][p] = 100.0 * static_cast<double>(r.counts[t][p]) / static_cast<double>(row);
  }
  r.overall_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  return r;
}

template <class T>
std::vector<int> predict(const SMCNet<T>& model, const SampleSet& samples, std::size_t chunk) {
  std::vector<int> out;
  out.reserve(samples.samples.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.samples.size(); start += chunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(samples.samples.size(), start + chunk); ++i) idx.push_back(i);
    const auto logits = model.infer(make_batch<T>(samples, idx));
    for (int p : argmax_rows(logits)) out.push_back(p);
  }
  return out;
}

template <class T>
EvalReport evaluate(const SMCNet<T>& model, const SampleSet& samples, EvalSplit split, PreprocMode mode,
                    std::size_t chunk) {
  if (samples.samples.empty()) throw ValidationError("cannot evaluate an empty sample set");
  std::vector<int> truth;
  truth.reserve(samples.samples.size());
  for (const auto& s : samples.samples) truth.push_back(s.label);
  return report_from_predictions(truth, predict(model, samples, chunk), split, mode);
}

template <class T>
ComparisonReport compare_modes(const SMCNet<T>& model_iq, const SMCNet<T>& model_fft, const std::vector<DataCube>& d0,
                               const std::vector<DataCube>& d1) {
  if (model_iq.config().num_classes != model_fft.config().num_classes)
    throw ValidationError("compared models disagree on the number of classes");
  std::set<std::uint32_t> c0, c1;
  for (const auto& c : d0) c0.insert(id_of(c.label));
  for (const auto& c : d1) c1.insert(id_of(c.label));
  if (c0 != c1) throw ValidationError("d0 and d1 sets cover different class sets");
  ComparisonReport r;
  const auto iq0 = prepare_samples(d0, PreprocMode::RawIq);
  const auto fft0 = prepare_samples(d0, PreprocMode::RangeFft);
  const auto iq1 = prepare_samples(d1, PreprocMode::RawIq);
  const auto fft1 = prepare_samples(d1, PreprocMode::RangeFft);
  r.iq_d0 = evaluate(model_iq, iq0, EvalSplit::D0, PreprocMode::RawIq);
  r.fft_d0 = evaluate(model_fft, fft0, EvalSplit::D0, PreprocMode::RangeFft);
  r.iq_d1 = evaluate(model_iq, iq1, EvalSplit::D1, PreprocMode::RawIq);
  r.fft_d1 = evaluate(model_fft, fft1, EvalSplit::D1, PreprocMode::RangeFft);
  r.fft_generalizes_better = r.fft_d1.overall_accuracy >= r.iq_d1.overall_accuracy;
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["split"] = std::string(to_string(r.split));
  j["preproc_mode"] = std::string(to_string(r.preproc_mode));
  j["n_samples"] = r.n_samples;
  j["overall_accuracy"] = r.overall_accuracy;
  std::vector<std::string> labels;
  for (int c = 0; c < kNumClasses; ++c) labels.emplace_back(to_string(static_cast<MaterialClass>(c)));
  j["classes"] = labels;
  j["confusion_percent"] = r.confusion;
  j["confusion_counts"] = r.counts;
  return j;
}

nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json j;
  j["iq_d0"] = to_json(r.iq_d0);
  j["fft_d0"] = to_json(r.fft_d0);
  j["iq_d1"] = to_json(r.iq_d1);
  j["fft_d1"] = to_json(r.fft_d1);
  j["accuracy"] = {{"iq_d0", r.iq_d0.overall_accuracy},
                   {"fft_d0", r.fft_d0.overall_accuracy},
                   {"iq_d1", r.iq_d1.overall_accuracy},
                   {"fft_d1", r.fft_d1.overall_accuracy}};
  j["published_reference"] = {{"iq_d0", kPublishedSmcnetAccuracy[0]},
                              {"fft_d0", kPublishedSmcnetAccuracy[1]},
                              {"iq_d1", kPublishedSmcnetAccuracy[2]},
                              {"fft_d1", kPublishedSmcnetAccuracy[3]}};
  j["fft_generalizes_better"] = r.fft_generalizes_better;
  return j;
}

std::string render_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[64];
  os << "split=" << to_string(r.split) << " preproc=" << to_string(r.preproc_mode) << " n=" << r.n_samples << '\n';
  os << "truth \\ pred";
  for (int c = 0; c < kNumClasses; ++c) {
    std::snprintf(buf, sizeof buf, "%10s", std::string(to_string(static_cast<MaterialClass>(c))).c_str());
    os << buf;
  }
  os << '\n';
  for (int t = 0; t < kNumClasses; ++t) {
    std::snprintf(buf, sizeof buf, "%-12s", std::string(to_string(static_cast<MaterialClass>(t))).c_str());
    os << buf;
    for (int p = 0; p < kNumClasses; ++p) {
      std::snprintf(buf, sizeof buf, "%10.2f", r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      os << buf;
    }
    os << '\n';
  }
  std::snprintf(buf, sizeof buf, "overall accuracy: %.2f%%\n", r.overall_accuracy);
  os << buf;
  return os.str();
}

std::string render_table(const ComparisonReport& r) {
  char buf[256];
  std::ostringstream os;
  os << "            IQ d0    FFT d0     IQ d1    FFT d1\n";
  std::snprintf(buf, sizeof buf, "this run %8.2f  %8.2f  %8.2f  %8.2f\n", r.iq_d0.overall_accuracy,
                r.fft_d0.overall_accuracy, r.iq_d1.overall_accuracy, r.fft_d1.overall_accuracy);
  os << buf;
  std::snprintf(buf, sizeof buf, "published%8.2f  %8.2f  %8.2f  %8.2f  (private dataset, display only)\n",
                kPublishedSmcnetAccuracy[0], kPublishedSmcnetAccuracy[1], kPublishedSmcnetAccuracy[2],
                kPublishedSmcnetAccuracy[3]);
  os << buf;
  os << "FFT d1 >= IQ d1: " << (r.fft_generalizes_better ? "yes" : "no") << '\n';
  return os.str();
}

std::string confusion_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "truth";
  for (int c = 0; c < kNumClasses; ++c) os << ',' << to_string(static_cast<MaterialClass>(c));
  os << '\n';
  char buf[32];
  for (int t = 0; t < kNumClasses; ++t) {
    os << to_string(static_cast<MaterialClass>(t));
    for (int p = 0; p < kNumClasses; ++p) {
      std::snprintf(buf, sizeof buf, ",%.2f", r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

template std::vector<int> predict<float>(const SMCNet<float>&, const SampleSet&, std::size_t);
template std::vector<int> predict<double>(const SMCNet<double>&, const SampleSet&, std::size_t);
template EvalReport evaluate<float>(const SMCNet<float>&, const SampleSet&, EvalSplit, PreprocMode, std::size_t);
template EvalReport evaluate<double>(const SMCNet<double>&, const SampleSet&, EvalSplit, PreprocMode, std::size_t);
template ComparisonReport compare_modes<float>(const SMCNet<float>&, const SMCNet<float>&, const std::vector<DataCube>&,
                                               const std::vector<DataCube>&);
template ComparisonReport compare_modes<double>(const SMCNet<double>&, const SMCNet<double>&,
                                                const std::vector<DataCube>&, const std::vector<DataCube>&);

}  // namespace smcnet
