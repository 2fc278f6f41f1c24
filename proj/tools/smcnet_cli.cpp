// smcnet: synthesize radar corpora, train and evaluate the complex-valued classifier.
//
// Exit codes: 0 success, 1 internal failure, 2 usage or configuration error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smcnet/datacube.hpp"
#include "smcnet/dsp.hpp"
#include "smcnet/errors.hpp"
#include "smcnet/eval.hpp"
#include "smcnet/gradcheck.hpp"
#include "smcnet/model.hpp"
#include "smcnet/rgb.hpp"
#include "smcnet/synth.hpp"
#include "smcnet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace smcnet;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

ordered_json to_json(const SynthConfig& c) {
  ordered_json j;
  j["center_freq_hz"] = c.center_freq_hz;
  j["bandwidth_hz"] = c.bandwidth_hz;
  j["fast_time_len"] = c.fast_time_len;
  j["rx_count"] = c.rx_count;
  j["tx_count"] = c.tx_count;
  j["d0_distances_mm"] = c.d0_distances_mm;
  j["d1_distances_mm"] = c.d1_distances_mm;
  j["samples_per_class_distance"] = c.samples_per_class_distance;
  j["d1_samples_per_class_distance"] = c.d1_samples_per_class_distance;
  j["snr_db"] = std::isfinite(c.snr_db) ? ordered_json(c.snr_db) : ordered_json("inf");
  j["clutter_amplitude"] = c.clutter_amplitude;
  j["clutter_bin"] = c.clutter_bin;
  j["path_loss_exponent"] = c.path_loss_exponent;
  j["path_loss_ref_m"] = c.path_loss_ref_m;
  j["distance_jitter_mm"] = c.distance_jitter_mm;
  j["d0_sessions"] = c.d0_sessions;
  j["d1_sessions"] = c.d1_sessions;
  j["session_distance_jitter_mm"] = c.session_distance_jitter_mm;
  j["session_phase_jitter"] = c.session_phase_jitter;
  j["channel_phase_jitter"] = c.channel_phase_jitter;
  j["split_fraction"] = c.split_fraction;
  j["seed"] = c.seed;
  j["range_resolution_m"] = range_resolution(c);
  return j;
}

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c) {
  try {
    c.center_freq_hz = j.value("center_freq_hz", c.center_freq_hz);
    c.bandwidth_hz = j.value("bandwidth_hz", c.bandwidth_hz);
    c.fast_time_len = j.value("fast_time_len", c.fast_time_len);
    c.rx_count = j.value("rx_count", c.rx_count);
    c.tx_count = j.value("tx_count", c.tx_count);
    c.d0_distances_mm = j.value("d0_distances_mm", c.d0_distances_mm);
    c.d1_distances_mm = j.value("d1_distances_mm", c.d1_distances_mm);
    c.samples_per_class_distance = j.value("samples_per_class_distance", c.samples_per_class_distance);
    c.d1_samples_per_class_distance = j.value("d1_samples_per_class_distance", c.d1_samples_per_class_distance);
    if (j.contains("snr_db"))
      c.snr_db = j["snr_db"].is_string() ? SynthConfig::kNoNoise : j["snr_db"].get<double>();
    c.clutter_amplitude = j.value("clutter_amplitude", c.clutter_amplitude);
    c.clutter_bin = j.value("clutter_bin", c.clutter_bin);
    c.path_loss_exponent = j.value("path_loss_exponent", c.path_loss_exponent);
    c.path_loss_ref_m = j.value("path_loss_ref_m", c.path_loss_ref_m);
    c.distance_jitter_mm = j.value("distance_jitter_mm", c.distance_jitter_mm);
    c.d0_sessions = j.value("d0_sessions", c.d0_sessions);
    c.d1_sessions = j.value("d1_sessions", c.d1_sessions);
    c.session_distance_jitter_mm = j.value("session_distance_jitter_mm", c.session_distance_jitter_mm);
    c.session_phase_jitter = j.value("session_phase_jitter", c.session_phase_jitter);
    c.channel_phase_jitter = j.value("channel_phase_jitter", c.channel_phase_jitter);
    c.split_fraction = j.value("split_fraction", c.split_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  return c;
}

PreprocMode parse_preproc(const std::string& s) {
  auto m = preproc_from_string(s);
  if (!m) throw ConfigError("unknown preprocessing mode '" + s + "' (use raw or fft)");
  return *m;
}

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  throw ConfigError("unknown precision '" + s + "' (use f32 or f64)");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config, out, materials;
  std::uint64_t seed = 0;
  bool reference_sensor = false;
};

int cmd_synth(const SynthArgs& a, const CLI::App& sub) {
  SynthConfig cfg = a.reference_sensor ? reference_sensor_config() : SynthConfig{};
  MaterialProfiles profiles = builtin_profiles();
  if (!a.config.empty()) {
    const auto j = read_json_file(a.config);
    cfg = synth_config_from_json(j, cfg);
  }
  if (!a.materials.empty()) profiles = load_profiles(a.materials);
  if (sub.count("--seed")) cfg.seed = a.seed;
  cfg.validate();
  std::cout << "resolved synth config: " << to_json(cfg).dump() << "\nseed: " << cfg.seed << '\n';

  const auto manifest = generate_dataset(cfg, profiles, a.out);
  std::map<std::tuple<std::string, std::uint32_t, std::string>, std::size_t> counts;
  for (const auto& e : manifest.entries)
    ++counts[{std::string(to_string(e.label)), e.distance_mm, std::string(to_string(e.split))}];
  std::cout << "wrote " << manifest.entries.size() << " cubes to " << a.out << "\n";
  for (const auto& [key, n] : counts)
    std::cout << "  " << std::get<0>(key) << " @ " << std::get<1>(key) << " mm [" << std::get<2>(key) << "]: " << n
              << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& path) {
  if (fs::path(path).extension() == ".jsonl") {
    const auto manifest = load_manifest(path);
    std::map<std::string, std::size_t> by_split;
    std::map<std::pair<std::string, std::uint32_t>, std::size_t> by_cell;
    for (const auto& e : manifest.entries) {
      ++by_split[std::string(to_string(e.split))];
      ++by_cell[{std::string(to_string(e.label)), e.distance_mm}];
    }
    std::cout << "manifest " << path << ": " << manifest.entries.size() << " entries\n";
    for (const auto& [k, n] : by_split) std::cout << "  split " << k << ": " << n << '\n';
    for (const auto& [k, n] : by_cell) std::cout << "  " << k.first << " @ " << k.second << " mm: " << n << '\n';
    return 0;
  }
  const DataCube cube = load_cube(path);
  std::cout << "cube " << path << "\n  rx x tx x N: " << cube.rx_count << " x " << cube.tx_count << " x "
            << cube.fast_time_len << "\n  label: " << to_string(cube.label) << "\n  distance_mm: " << cube.distance_mm
            << "\n  session_id: " << cube.session_id << "\n  sample_id: " << cube.sample_id << '\n';
  const ComplexMatrix spec = preprocess_cube(cube, PreprocMode::RangeFft);
  std::vector<double> profile(spec.cols, 0.0);
  for (std::size_t r = 0; r < spec.rows; ++r)
    for (std::size_t k = 0; k < spec.cols; ++k) profile[k] += std::abs(spec.row(r)[k]) / static_cast<double>(spec.rows);
  // Strongest local maximum from bin 3 on; the near-field clutter straddles bins 1 and 2.
  std::size_t peak = 0;
  for (std::size_t k = 3; k + 1 < profile.size(); ++k)
    if (profile[k] >= profile[k - 1] && profile[k] >= profile[k + 1] && (peak == 0 || profile[k] > profile[peak]))
      peak = k;
  SynthConfig nominal;
  std::cout << "  mean range profile peak: bin " << peak << " (~" << peak * range_resolution(nominal)
            << " m at B = 5 GHz)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest, preproc = "fft", out, log, config, precision = "f32";
  std::uint32_t epochs = 10, batch_size = 16, conv1 = 8, conv2 = 3;
  std::uint64_t seed = 0;
  double lr = 1e-3;
};

template <class T>
int run_train(const TrainConfig& tc, ModelConfig mc, const SampleSet& data, const std::string& out,
              const std::string& log_path) {
  SMCNet<T> model(mc);
  std::cout << "model: " << model.parameter_count() << " parameters\n";
  const auto log = train(model, data, tc, [](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << "  loss " << e.loss << "  train_acc " << e.train_acc << "%  (" << e.wall_ms
              << " ms)\n";
  });
  std::ofstream wf(out, std::ios::binary | std::ios::trunc);
  if (!wf) throw IoError("cannot open " + out + " for writing");
  save_weights(model, wf);
  write_training_log(log, log_path);
  std::cout << "weights: " << out << "\nlog: " << log_path << '\n';
  return 0;
}

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
  TrainConfig tc;
  std::uint32_t conv1 = 8, conv2 = 3;
  std::string preproc = "fft", precision = "f32";
  if (!a.config.empty()) {
    const auto j = read_json_file(a.config);
    try {
      tc.epochs = j.value("epochs", tc.epochs);
      tc.batch_size = j.value("batch_size", tc.batch_size);
      tc.adam.lr = j.value("lr", tc.adam.lr);
      tc.adam.beta1 = j.value("beta1", tc.adam.beta1);
      tc.adam.beta2 = j.value("beta2", tc.adam.beta2);
      tc.adam.eps = j.value("adam_eps", tc.adam.eps);
      tc.seed = j.value("seed", tc.seed);
      preproc = j.value("preproc", preproc);
      precision = j.value("precision", precision);
      conv1 = j.value("conv1_filters", conv1);
      conv2 = j.value("conv2_filters", conv2);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(a.config + ": " + e.what());
    }
  }
  if (sub.count("--epochs")) tc.epochs = a.epochs;
  if (sub.count("--batch-size")) tc.batch_size = a.batch_size;
  if (sub.count("--lr")) tc.adam.lr = a.lr;
  if (sub.count("--seed")) tc.seed = a.seed;
  if (sub.count("--preproc")) preproc = a.preproc;
  if (sub.count("--precision")) precision = a.precision;
  if (sub.count("--conv1")) conv1 = a.conv1;
  if (sub.count("--conv2")) conv2 = a.conv2;
  tc.preproc = parse_preproc(preproc);
  tc.precision = parse_precision(precision);
  if (tc.batch_size == 0) throw ConfigError("--batch-size must be >= 1");

  const auto manifest = load_manifest(a.manifest);
  const auto entries = manifest.with_split(SplitTag::Train);
  if (entries.empty()) throw ValidationError("manifest " + a.manifest + " has no train entries");
  const SampleSet data = prepare_samples(load_cubes(manifest, entries), tc.preproc);
  ModelConfig mc = model_config_for(data, tc.seed, tc.precision);
  mc.conv1_filters = conv1;
  mc.conv2_filters = conv2;
  stage_shapes(mc);

  ordered_json resolved;
  resolved["manifest"] = a.manifest;
  resolved["train_samples"] = data.samples.size();
  resolved["preproc"] = std::string(to_string(tc.preproc));
  resolved["epochs"] = tc.epochs;
  resolved["batch_size"] = tc.batch_size;
  resolved["optimizer"] = {{"name", "adam"}, {"lr", tc.adam.lr}, {"beta1", tc.adam.beta1},
                           {"beta2", tc.adam.beta2}, {"eps", tc.adam.eps}};
  resolved["precision"] = std::string(to_string(tc.precision));
  resolved["input_shape"] = {1, mc.input_h, mc.input_w};
  resolved["conv1_filters"] = mc.conv1_filters;
  resolved["conv2_filters"] = mc.conv2_filters;
  std::cout << "resolved train config: " << resolved.dump() << "\nseed: " << tc.seed << '\n';

  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  return tc.precision == Precision::F64 ? run_train<double>(tc, mc, data, a.out, log_path)
                                        : run_train<float>(tc, mc, data, a.out, log_path);
}

// ---------------------------------------------------------------------------

template <class T>
SMCNet<T> load_model_as(const ModelConfig& cfg, const std::string& path) {
  SMCNet<T> m(cfg);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights " + path);
  load_weights(m, in);
  m.set_training(false);
  return m;
}

ModelConfig peek_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights " + path);
  return read_weights_config(in);
}

void check_input_shape(const ModelConfig& mc, const SampleSet& data, const std::string& weights) {
  if (data.height != mc.input_h || data.width != mc.input_w)
    throw ConfigError("weights " + weights + " expect " + std::to_string(mc.input_h) + "x" + std::to_string(mc.input_w) +
                      " inputs but the manifest cubes are " + std::to_string(data.height) + "x" +
                      std::to_string(data.width));
}

struct EvalArgs {
  std::string weights, manifest, split = "d0", preproc = "fft", out, csv;
};

template <class T>
EvalReport run_eval(const ModelConfig& mc, const EvalArgs& a, const SampleSet& data, EvalSplit split, PreprocMode mode) {
  const auto model = load_model_as<T>(mc, a.weights);
  return evaluate(model, data, split, mode);
}

int cmd_eval(const EvalArgs& a) {
  const PreprocMode mode = parse_preproc(a.preproc);
  if (a.split != "d0" && a.split != "d1") throw ConfigError("--split must be d0 or d1");
  const EvalSplit split = a.split == "d0" ? EvalSplit::D0 : EvalSplit::D1;
  const ModelConfig mc = peek_config(a.weights);
  std::cout << "resolved eval config: "
            << ordered_json{{"weights", a.weights},
                            {"manifest", a.manifest},
                            {"split", a.split},
                            {"preproc", std::string(to_string(mode))},
                            {"precision", std::string(to_string(mc.precision))}}
                   .dump()
            << "\nseed: " << mc.seed << '\n';
  const auto manifest = load_manifest(a.manifest);
  const auto entries = manifest.with_split(split == EvalSplit::D0 ? SplitTag::TestD0 : SplitTag::TestD1);
  if (entries.empty()) throw ValidationError("manifest has no entries for split " + a.split);
  const SampleSet data = prepare_samples(load_cubes(manifest, entries), mode);
  check_input_shape(mc, data, a.weights);
  const EvalReport r = mc.precision == Precision::F64 ? run_eval<double>(mc, a, data, split, mode)
                                                      : run_eval<float>(mc, a, data, split, mode);
  std::cout << render_table(r);
  if (!a.out.empty()) write_json_file(to_json(r), a.out);
  if (!a.csv.empty()) {
    std::ofstream csv(a.csv, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + a.csv + " for writing");
    csv << confusion_csv(r);
  }
  return 0;
}

struct CompareArgs {
  std::string weights_iq, weights_fft, manifest, out;
};

template <class T>
ComparisonReport run_compare(const ModelConfig& ci, const ModelConfig& cf, const CompareArgs& a,
                             const std::vector<DataCube>& d0, const std::vector<DataCube>& d1) {
  const auto iq = load_model_as<T>(ci, a.weights_iq);
  const auto fft = load_model_as<T>(cf, a.weights_fft);
  return compare_modes(iq, fft, d0, d1);
}

int cmd_compare(const CompareArgs& a) {
  const ModelConfig ci = peek_config(a.weights_iq);
  const ModelConfig cf = peek_config(a.weights_fft);
  if (ci.precision != cf.precision) throw ConfigError("compared weight files use different precisions");
  std::cout << "resolved compare config: "
            << ordered_json{{"weights_iq", a.weights_iq}, {"weights_fft", a.weights_fft}, {"manifest", a.manifest}}.dump()
            << "\nseed: iq " << ci.seed << ", fft " << cf.seed << '\n';
  const auto manifest = load_manifest(a.manifest);
  const auto d0 = load_cubes(manifest, manifest.with_split(SplitTag::TestD0));
  const auto d1 = load_cubes(manifest, manifest.with_split(SplitTag::TestD1));
  if (d0.empty() || d1.empty()) throw ValidationError("compare needs both test_d0 and test_d1 entries");
  for (const auto* mc : {&ci, &cf})
    if (d0.front().channels() != mc->input_h || d0.front().fast_time_len != mc->input_w)
      throw ConfigError("weight file input shape does not match the manifest cubes");
  const ComparisonReport r = ci.precision == Precision::F64 ? run_compare<double>(ci, cf, a, d0, d1)
                                                            : run_compare<float>(ci, cf, a, d0, d1);
  std::cout << render_table(r);
  if (!a.out.empty()) write_json_file(to_json(r), a.out);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_export_rgb(const std::string& manifest_path, const std::string& out) {
  std::cout << "resolved export config: " << ordered_json{{"manifest", manifest_path}, {"out", out}}.dump()
            << "\nseed: n/a\n";
  const auto manifest = load_manifest(manifest_path);
  const auto n = export_rgb(manifest, out);
  std::cout << "wrote " << n << " pseudo-RGB images (R = Re, G = Im, B = 0; per-sample min-max) to " << out << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::uint32_t seeds, bool corrupt) {
  std::cout << "resolved gradcheck config: "
            << ordered_json{{"step", 1e-6}, {"tolerance", 1e-4}, {"seeds", seeds}, {"corrupt_conv_backward", corrupt}}.dump()
            << "\nseed: " << seed << '\n';
  GradCheckOptions opts;
  opts.corrupt_conv_backward = corrupt;
  std::map<std::string, double> worst;
  bool ok = true;
  for (std::uint32_t k = 0; k < seeds; ++k)
    for (const auto& r : run_gradcheck_suite(seed + k, opts)) {
      double& w = worst[r.layer];
      w = std::max(w, r.max_rel_error);
      if (!r.passed) {
        ok = false;
        std::cout << "FAIL seed " << seed + k << " " << r.layer << "." << r.tensor << ": " << r.max_rel_error << '\n';
      }
    }
  for (const auto& [layer, err] : worst) std::cout << "  " << layer << ": worst relative error " << err << '\n';
  std::cout << (ok ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return ok ? 0 : kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smcnet: complex-valued CNN surface material classifier for FMCW radar cubes"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic RDC1 corpus and manifest");
  s->add_option("--config", synth.config, "JSON synth config");
  s->add_option("--materials", synth.materials, "JSON material profiles");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed, "RNG seed (overrides config)");
  s->add_flag("--reference-sensor", synth.reference_sensor, "20x20 MIMO, N = 100, 1360 captures");

  std::string inspect_path;
  auto* ins = app.add_subcommand("inspect", "print a cube header or a manifest summary");
  ins->add_option("path", inspect_path, "RDC1 cube or JSON-lines manifest")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train on the train split of a manifest");
  t->add_option("--manifest", tr.manifest)->required();
  t->add_option("--preproc", tr.preproc, "raw | fft");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr);
  t->add_option("--seed", tr.seed);
  t->add_option("--precision", tr.precision, "f32 | f64");
  t->add_option("--conv1", tr.conv1, "conv1 filters");
  t->add_option("--conv2", tr.conv2, "conv2 filters");
  t->add_option("--config", tr.config, "JSON train config (flags override)");
  t->add_option("--out", tr.out, "SMCW weight file")->required();
  t->add_option("--log", tr.log, "CSV training log (default <out>.log.csv)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate weights on the d0 or d1 test split");
  e->add_option("--weights", ev.weights)->required();
  e->add_option("--manifest", ev.manifest)->required();
  e->add_option("--split", ev.split, "d0 | d1");
  e->add_option("--preproc", ev.preproc, "raw | fft");
  e->add_option("--out", ev.out, "JSON report");
  e->add_option("--csv", ev.csv, "CSV confusion matrix");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "four-cell IQ/FFT x d0/d1 accuracy table");
  c->add_option("--weights-iq", cmp.weights_iq)->required();
  c->add_option("--weights-fft", cmp.weights_fft)->required();
  c->add_option("--manifest", cmp.manifest)->required();
  c->add_option("--out", cmp.out, "JSON report");

  std::string rgb_manifest, rgb_out;
  auto* x = app.add_subcommand("export-rgb", "write pseudo-RGB PNGs for image-model baselines");
  x->add_option("--manifest", rgb_manifest)->required();
  x->add_option("--out", rgb_out)->required();

  std::uint64_t gc_seed = 0;
  std::uint32_t gc_seeds = 5;
  bool gc_corrupt = false;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of every layer");
  g->add_option("--seed", gc_seed);
  g->add_option("--seeds", gc_seeds, "number of consecutive seeds");
  g->add_flag("--corrupt-conv", gc_corrupt, "negative control: perturb the conv weight gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, *s);
    if (*ins) return cmd_inspect(inspect_path);
    if (*t) return cmd_train(tr, *t);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_compare(cmp);
    if (*x) return cmd_export_rgb(rgb_manifest, rgb_out);
    if (*g) return cmd_gradcheck(gc_seed, gc_seeds, gc_corrupt);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& err) {
    std::cerr << "invalid input: " << err.what() << '\n';
    return kExitUsage;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& err) {
    std::cerr << "parse error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& err) {
    std::cerr << "shape error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
