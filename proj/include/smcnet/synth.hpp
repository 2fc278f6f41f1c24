#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "smcnet/datacube.hpp"
#include "smcnet/dsp.hpp"

namespace smcnet {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Invented engineering description of one surface class for the synthetic generator.
/// These numbers are not measurements of any physical material.
struct MaterialProfile {
  double reflection_magnitude = 1.0;       // Gamma in (0, 1]
  double reflection_phase = 0.0;           // theta, radians
  double penetration_echo_delay_m = 0.0;   // offset of the internal reflection behind the surface
  double penetration_echo_attenuation = 0.0;  // [0, 1), relative to the surface return
  double penetration_echo_phase = 0.0;     // delta, radians, relative to theta
  double roughness_jitter = 0.0;           // per-channel amplitude std-dev

  bool operator==(const MaterialProfile&) const = default;
};

using MaterialProfiles = std::array<MaterialProfile, kNumClasses>;

/// Built-in profiles, indexed by MaterialClass id. Mirrors data/materials.json.
MaterialProfiles builtin_profiles();
/// Reads {"concrete": {...}, ...}; classes missing from the file keep their built-in values.
MaterialProfiles load_profiles(const std::filesystem::path& path);

struct SynthConfig {
  double center_freq_hz = 65.5e9;
  double bandwidth_hz = 5e9;
  std::uint32_t fast_time_len = 64;
  std::uint32_t rx_count = 8;
  std::uint32_t tx_count = 8;
  std::vector<std::uint32_t> d0_distances_mm{500, 700, 1000};
  std::vector<std::uint32_t> d1_distances_mm{600, 800};
  std::uint32_t samples_per_class_distance = 40;
  std::uint32_t d1_samples_per_class_distance = 16;
  /// Noise power relative to the primary return power; +inf disables noise.
  double snr_db = 20.0;
  double clutter_amplitude = 2.0;
  double clutter_bin = 1.5;
  /// Target returns scale by (path_loss_ref_m / d)^path_loss_exponent; the clutter does not.
  double path_loss_exponent = 1.0;
  double path_loss_ref_m = 1.0;
  /// Per-capture range jitter; captures inside one session come from a static setup.
  double distance_jitter_mm = 0.0;
  std::uint32_t d0_sessions = 12;
  std::uint32_t d1_sessions = 3;
  double session_distance_jitter_mm = 3.0;
  double session_phase_jitter = 0.3;
  /// Std-dev (radians) of the per-capture phase wobble on top of each channel's fixed offset.
  double channel_phase_jitter = 0.1;
  /// Fraction of each d0 (class, distance) cell tagged as train.
  double split_fraction = 0.8;
  std::uint64_t seed = 0;

  static constexpr double kNoNoise = std::numeric_limits<double>::infinity();

  /// Throws ConfigError (unambiguous range, empty dims, overlapping d0/d1 distances).
  void validate() const;
};

/// Full-scale sensor layout: 20 x 20 MIMO, N = 100, 80 cubes per d0 cell and 16 per d1 cell
/// (1200 + 160 = 1360 captures).
SynthConfig reference_sensor_config();

/// c / (2B).
double range_resolution(const SynthConfig& cfg);

/// One fast-time channel:
///   clutter  A_c e^{j phi_c} e^{j 2 pi f_c n / N}
/// + surface  g Gamma e^{j(theta + psi)} e^{j 2 pi k_R n / N},   k_R = d / dR
/// + echo     g Gamma att e^{j(theta + delta + psi)} e^{j 2 pi k_E n / N},  k_E = (d + delay) / dR
/// + complex AWGN at snr_db below the primary return power.
/// Gamma includes the path loss (ref / d)^exponent.
/// psi = 4 pi f_c d / c + channel_phase + wobble. The wobble (std-dev cfg.channel_phase_jitter) and the
/// roughness gain g are drawn from rng before the noise.
std::vector<cdouble> synth_channel(const SynthConfig& cfg, const MaterialProfile& profile, double distance_m,
                                   std::mt19937_64& rng, double clutter_phase = 0.0, double channel_phase = 0.0);

/// Deterministic per-channel near-field clutter phase (a property of the sensor, fixed across captures).
double clutter_phase(std::size_t channel);
/// Deterministic per-channel target phase offset standing in for the MIMO array geometry.
double channel_phase(std::size_t channel);

/// One full cube for (class, distance, session) from the per-sample stream (seed, sample_id).
DataCube synth_cube(const SynthConfig& cfg, const MaterialProfiles& profiles, MaterialClass label,
                    std::uint32_t distance_mm, std::uint32_t session_id, std::uint32_t sample_id);

/// Writes cubes/<class>_<mm>mm_<sample>.rdc and manifest.jsonl into out_dir and returns the manifest.
DatasetManifest generate_dataset(const SynthConfig& cfg, const MaterialProfiles& profiles,
                                 const std::filesystem::path& out_dir);

}  // namespace smcnet
