// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "smcnet/dsp.hpp"
#include "smcnet/eval.hpp"
#include "smcnet/gradcheck.hpp"
#include "smcnet/layers.hpp"
#include "smcnet/model.hpp"
#include "smcnet/synth.hpp"
#include "smcnet/trainer.hpp"
#include "support.hpp"

using namespace smcnet;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void fft_oracle() {
  std::mt19937_64 rng(100);
  std::normal_distribution<double> nd;
  double worst = 0;
  const auto t0 = Clock::now();
  for (int v = 0; v < 100; ++v) {
    std::vector<cdouble> x(100);
    for (auto& z : x) z = {nd(rng), nd(rng)};
    const auto fast = range_fft_channel(x);
    const auto ref = naive_dft(x);
    worst = std::max(worst, testing::max_rel_diff(fast, ref));
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-9 && secs < 1.0, "fft_oracle", fmt("max rel err %.2e (< 1e-9), %.3f s (< 1 s)", worst, secs));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  bool all = true;
  std::set<std::string> layers;
  std::string worst_where;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (const auto& r : run_gradcheck_suite(seed)) {
      all = all && r.passed && r.max_rel_error < 1e-4;
      layers.insert(r.layer);
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_where = r.layer + "." + r.tensor;
      }
    }
  const std::vector<std::string> required{"complex_conv2d",   "complex_maxpool2d", "crelu",
                                          "complex_batchnorm", "flatten_amp_phase", "dense_real",
                                          "softmax_cross_entropy", "micro_net"};
  std::string missing;
  for (const auto& name : required) {
    bool found = false;
    for (const auto& l : layers) found = found || l.rfind(name, 0) == 0;
    if (!found) missing += " " + name;
  }
  const double secs = seconds_since(t0);
  report(all && missing.empty() && secs < 60.0, "gradient_suite",
         fmt("5 seeds, worst rel err %.2e at %s (< 1e-4), %.2f s (< 60 s)%s", worst, worst_where.c_str(), secs,
             missing.empty() ? "" : (" missing:" + missing).c_str()));
}

void layer_semantics() {
  using C = std::complex<double>;
  // cReLU: four open quadrants, both axes, the origin and signed zeros.
  const std::vector<C> probes{{1, 2},  {-1, 2},  {-1, -2}, {1, -2}, {0, 3},    {0, -3},  {3, 0},
                              {-3, 0}, {0, 0},   {-0.0, 1}, {1, -0.0}, {1e-300, 1e-300}, {-1e-300, 1}};
  CReLU<double> act;
  CTensor<double> x({probes.size()}, probes);
  const auto y = act.infer(x);
  bool crelu_ok = true;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const bool pass = probes[i].real() >= 0 && probes[i].imag() >= 0;
    crelu_ok = crelu_ok && y[i] == (pass ? probes[i] : C(0));
  }

  // cBN statistics on random (16, 8) batches.
  std::mt19937_64 rng(200);
  std::normal_distribution<double> nd(-2.0, 7.0);
  double worst_mean = 0, worst_var = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ComplexBatchNorm<double> bn(8);
    CTensor<double> b({16, 8});
    for (auto& z : b.data) z = {nd(rng), nd(rng)};
    const auto out = bn.forward(b);
    for (std::size_t f = 0; f < 8; ++f) {
      double mr = 0, mi = 0, vr = 0, vi = 0;
      for (std::size_t s = 0; s < 16; ++s) mr += out[s * 8 + f].real() / 16, mi += out[s * 8 + f].imag() / 16;
      for (std::size_t s = 0; s < 16; ++s)
        vr += std::pow(out[s * 8 + f].real() - mr, 2) / 16, vi += std::pow(out[s * 8 + f].imag() - mi, 2) / 16;
      worst_mean = std::max({worst_mean, std::abs(mr), std::abs(mi)});
      worst_var = std::max({worst_var, std::abs(vr - 1), std::abs(vi - 1)});
    }
  }

  // Maxpool against a brute-force modulus argmax.
  ComplexMaxPool2d<double> pool(2);
  std::size_t mismatches = 0, windows = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 2 + rng() % 10, w = 2 + rng() % 10, c = 1 + rng() % 3;
    const auto in = testing::random_ctensor<double>(rng, {2, c, h, w});
    const auto out = pool.infer(in);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < h / 2; ++oy)
          for (std::size_t ox = 0; ox < w / 2; ++ox, ++windows) {
            const std::size_t base = (b * c + ch) * h * w;
            C best = in[base + 2 * oy * w + 2 * ox];
            for (std::size_t u = 0; u < 2; ++u)
              for (std::size_t v = 0; v < 2; ++v) {
                const C z = in[base + (2 * oy + u) * w + 2 * ox + v];
                if (std::abs(z) > std::abs(best)) best = z;
              }
            mismatches += out[((b * c + ch) * (h / 2) + oy) * (w / 2) + ox] != best;
          }
  }
  const bool ok = crelu_ok && worst_mean < 1e-6 && worst_var < 1e-3 && mismatches == 0;
  report(ok, "layer_semantics",
         fmt("crelu table %s (%zu probes); bn |mean| %.1e (< 1e-6), |var-1| %.1e (< 1e-3); maxpool %zu/%zu windows match",
             crelu_ok ? "ok" : "WRONG", probes.size(), worst_mean, worst_var, windows - mismatches, windows));
}

struct ArmResult {
  double d0 = 0, d1 = 0, secs = 0;
  std::vector<EvalReport> reports;
};

struct SeedResult {
  ArmResult iq, fft;
  double secs = 0;
  bool invariants_ok = true;
};

bool report_invariants_hold(const EvalReport& r, const std::vector<int>& truth, const std::vector<int>& pred) {
  bool ok = true;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p) sum += r.confusion[t][p], n += r.counts[t][p];
    if (n > 0) ok = ok && std::abs(sum - 100.0) <= 0.01;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
  return ok && std::abs(r.overall_accuracy - 100.0 * static_cast<double>(correct) / truth.size()) < 1e-9;
}

// Desk-scale corpus: 8x8 channels x 64 samples, 40 per d0 cell and 16 per d1 cell, 10 epochs at batch 16.
SeedResult run_seed(std::uint64_t seed) {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.seed = seed;
  testing::TempDir dir("accept_" + std::to_string(seed));
  const auto manifest = generate_dataset(sc, builtin_profiles(), dir.path());
  const auto train_cubes = load_cubes(manifest, manifest.with_split(SplitTag::Train));
  const auto d0_cubes = load_cubes(manifest, manifest.with_split(SplitTag::TestD0));
  const auto d1_cubes = load_cubes(manifest, manifest.with_split(SplitTag::TestD1));

  SeedResult out;
  for (auto mode : {PreprocMode::RawIq, PreprocMode::RangeFft}) {
    const auto ta = Clock::now();
    const auto train_set = prepare_samples(train_cubes, mode);
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 16;
    tc.seed = seed;
    tc.preproc = mode;
    SMCNet<float> model(model_config_for(train_set, seed, Precision::F32));
    train(model, train_set, tc);
    ArmResult& arm = mode == PreprocMode::RawIq ? out.iq : out.fft;
    for (const auto* cubes : {&d0_cubes, &d1_cubes}) {
      const auto set = prepare_samples(*cubes, mode);
      const auto split = cubes == &d0_cubes ? EvalSplit::D0 : EvalSplit::D1;
      const auto r = evaluate(model, set, split, mode);
      std::vector<int> truth;
      for (const auto& s : set.samples) truth.push_back(s.label);
      out.invariants_ok = out.invariants_ok && report_invariants_hold(r, truth, predict(model, set));
      (split == EvalSplit::D0 ? arm.d0 : arm.d1) = r.overall_accuracy;
      arm.reports.push_back(r);
    }
    arm.secs = seconds_since(ta);
  }
  out.secs = seconds_since(t0);
  std::printf("      seed %llu: IQ d0 %.2f  FFT d0 %.2f  IQ d1 %.2f  FFT d1 %.2f  (%.1f s)\n",
              static_cast<unsigned long long>(seed), out.iq.d0, out.fft.d0, out.iq.d1, out.fft.d1, out.secs);
  std::fflush(stdout);
  return out;
}

void parameter_accounting() {
  // By hand for a 1x400x100 input, kernel 5, 8 and 3 filters, pool 2, 5 classes.
  const std::size_t conv1 = 2 * (8 * 1 * 25 + 8);            // 416
  const std::size_t bn1 = 4 * 8;                              // 32
  const std::size_t conv2 = 2 * (3 * 8 * 25 + 3);             // 1206
  const std::size_t bn2 = 4 * 3;                              // 12
  const std::size_t flat = 2 * 3 * ((400 - 8) / 2) * ((100 - 8) / 2);  // 2 * 3 * 196 * 46
  const std::size_t dense = flat * 5 + 5;
  const std::size_t hand = conv1 + bn1 + conv2 + bn2 + dense;
  SMCNet<float> net(ModelConfig{});
  const std::size_t counted = count_scalars(net.parameters());
  const bool ok = net.parameter_count() == hand && counted == hand && expected_parameter_count(ModelConfig{}) == hand &&
                  hand < 300000;
  report(ok, "parameter_accounting",
         fmt("reference net %zu scalars, hand count %zu, < 300000 (published SMCNet: 278859)", counted, hand));
}

void determinism() {
  SynthConfig sc;
  sc.rx_count = 4;
  sc.tx_count = 4;
  sc.samples_per_class_distance = 10;
  sc.d1_samples_per_class_distance = 4;
  sc.seed = 42;
  testing::TempDir a("det_a"), b("det_b");
  const auto ma = generate_dataset(sc, builtin_profiles(), a.path());
  generate_dataset(sc, builtin_profiles(), b.path());
  bool bytes_equal = slurp(a / "manifest.jsonl") == slurp(b / "manifest.jsonl");
  for (const auto& e : ma.entries) bytes_equal = bytes_equal && slurp(a.path() / e.path) == slurp(b.path() / e.path);

  const auto cubes = load_cubes(ma, ma.with_split(SplitTag::Train));
  const auto set = prepare_samples(cubes, PreprocMode::RangeFft);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 42;
  tc.precision = Precision::F64;
  double worst = 0;
  std::vector<EpochLog> la, lb;
  for (auto* log : {&la, &lb}) {
    SMCNet<double> m(model_config_for(set, 42, Precision::F64));
    *log = train(m, set, tc);
  }
  for (std::size_t i = 0; i < la.size(); ++i) worst = std::max(worst, std::abs(la[i].loss - lb[i].loss));
  report(bytes_equal && la.size() == 3 && worst <= 1e-12, "determinism",
         fmt("corpus of %zu cubes byte-identical: %s; f64 epoch-loss max diff %.1e (<= 1e-12)", ma.entries.size(),
             bytes_equal ? "yes" : "NO", worst));
}

}  // namespace

int main() {
  std::printf("acceptance criteria\n");
  fft_oracle();
  gradient_suite();
  layer_semantics();
  parameter_accounting();
  determinism();

  std::vector<SeedResult> seeds;
  for (std::uint64_t s = 0; s < 3; ++s) seeds.push_back(run_seed(s));

  const auto& s0 = seeds.front();
  report(s0.iq.d0 >= 95.0 && s0.fft.d0 >= 95.0 && s0.secs < 600.0, "end_to_end_d0",
         fmt("seed 0 held-out d0: IQ %.2f%%, FFT %.2f%% (both >= 95%%), %.1f s (< 600 s); "
             "context, seeds 1/2: IQ %.2f/%.2f, FFT %.2f/%.2f",
             s0.iq.d0, s0.fft.d0, s0.secs, seeds[1].iq.d0, seeds[2].iq.d0, seeds[1].fft.d0, seeds[2].fft.d0));

  double iq = 0, fft = 0, fft_min = 100;
  for (const auto& r : seeds) iq += r.iq.d1 / 3, fft += r.fft.d1 / 3, fft_min = std::min(fft_min, r.fft.d1);
  report(fft >= iq && fft_min > 20.0, "generalization_direction",
         fmt("mean d1 over 3 seeds: FFT %.2f%% vs IQ %.2f%% (need FFT >= IQ); min FFT d1 %.2f%% (> 20%%)", fft, iq,
             fft_min));

  bool inv = true;
  std::size_t n_reports = 0;
  for (const auto& r : seeds) inv = inv && r.invariants_ok, n_reports += r.iq.reports.size() + r.fft.reports.size();
  report(inv, "report_invariants", fmt("%zu confusion reports: rows sum to 100 +- 0.01, accuracy equals recount", n_reports));

  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
