#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smcnet {

/// Surface classes with stable ids 0..4.
enum class MaterialClass : std::uint32_t { Concrete = 0, Drywall = 1, Glass = 2, Metal = 3, Wood = 4 };

inline constexpr int kNumClasses = 5;

std::string_view to_string(MaterialClass c);
std::optional<MaterialClass> material_from_string(std::string_view name);
MaterialClass material_from_id(std::uint32_t id);  // throws ValidationError
inline constexpr std::uint32_t id_of(MaterialClass c) { return static_cast<std::uint32_t>(c); }

/// Rx x Tx x N capture as delivered by the sensor, stored row-major over (rx, tx, n).
struct RawCube {
  std::uint32_t rx_count = 0;
  std::uint32_t tx_count = 0;
  std::uint32_t fast_time_len = 0;
  std::vector<std::complex<float>> data;

  std::complex<float>& at(std::uint32_t rx, std::uint32_t tx, std::uint32_t n) {
    return data[(static_cast<std::size_t>(rx) * tx_count + tx) * fast_time_len + n];
  }
  const std::complex<float>& at(std::uint32_t rx, std::uint32_t tx, std::uint32_t n) const {
    return data[(static_cast<std::size_t>(rx) * tx_count + tx) * fast_time_len + n];
  }
};

/// One radar capture: (rx*tx) virtual channels by N fast-time samples plus labels.
///
/// Row l of the IQ matrix holds the channel of the pair (rx, tx) with l = rx*tx_count + tx.
struct DataCube {
  std::uint32_t rx_count = 0;
  std::uint32_t tx_count = 0;
  std::uint32_t fast_time_len = 0;
  std::vector<std::complex<float>> iq;  // channel-major, then fast time
  MaterialClass label = MaterialClass::Concrete;
  std::uint32_t distance_mm = 0;
  std::uint32_t session_id = 0;
  std::uint32_t sample_id = 0;

  std::size_t channels() const { return static_cast<std::size_t>(rx_count) * tx_count; }
  std::span<const std::complex<float>> channel(std::size_t row) const {
    return std::span(iq).subspan(row * fast_time_len, fast_time_len);
  }
  std::span<std::complex<float>> channel(std::size_t row) {
    return std::span(iq).subspan(row * fast_time_len, fast_time_len);
  }

  /// Throws ShapeError / ValidationError when the invariants do not hold.
  void validate() const;

  bool operator==(const DataCube&) const = default;
};

/// Flattens Rx x Tx x N into (Rx*Tx) x N with row index rx*Tx + tx.
std::vector<std::complex<float>> reshape_cube(const RawCube& raw);
/// Inverse of reshape_cube.
RawCube unreshape_cube(std::span<const std::complex<float>> matrix, std::uint32_t rx_count,
                       std::uint32_t tx_count, std::uint32_t fast_time_len);

// RDC1 binary format.
inline constexpr char kCubeMagic[4] = {'R', 'D', 'C', '1'};
inline constexpr std::uint32_t kCubeVersion = 1;
inline constexpr std::size_t kCubeHeaderBytes = 4 + 8 * 4;
/// Upper bound on rx*tx*N accepted by the reader.
inline constexpr std::uint64_t kMaxCubeElements = std::uint64_t{1} << 28;

std::size_t write_cube(const DataCube& cube, std::ostream& sink);
DataCube read_cube(std::istream& source);
void save_cube(const DataCube& cube, const std::filesystem::path& path);
DataCube load_cube(const std::filesystem::path& path);

enum class SplitTag { Train, TestD0, TestD1 };
std::string_view to_string(SplitTag s);
std::optional<SplitTag> split_from_string(std::string_view name);

struct ManifestEntry {
  std::string path;  // as written in the manifest; relative paths resolve against the manifest dir
  MaterialClass label = MaterialClass::Concrete;
  std::uint32_t distance_mm = 0;
  std::uint32_t session_id = 0;
  SplitTag split = SplitTag::Train;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const ManifestEntry& e) const;
  std::vector<ManifestEntry> with_split(SplitTag tag) const;
};

/// Checks the train/test_d1 distance disjointness rule.
void check_distance_disjointness(const std::vector<ManifestEntry>& entries);

/// Loads a JSON-lines manifest and validates every row against its cube file.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::string manifest_line(const ManifestEntry& e);

}  // namespace smcnet
