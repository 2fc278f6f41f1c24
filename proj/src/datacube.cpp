#include "smcnet/datacube.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "smcnet/errors.hpp"

namespace smcnet {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"concrete", "drywall", "glass",
                                                                    "metal", "wood"};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string_view to_string(MaterialClass c) { return kClassNames.at(id_of(c)); }

std::optional<MaterialClass> material_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == name) return static_cast<MaterialClass>(i);
  return std::nullopt;
}

MaterialClass material_from_id(std::uint32_t id) {
  if (id >= static_cast<std::uint32_t>(kNumClasses))
    throw ValidationError("material id " + std::to_string(id) + " outside 0..4");
  return static_cast<MaterialClass>(id);
}

void DataCube::validate() const {
  const std::size_t expected = channels() * fast_time_len;
  if (iq.size() != expected)
    throw ShapeError("cube iq holds " + std::to_string(iq.size()) + " values, expected " +
                     std::to_string(channels()) + "x" + std::to_string(fast_time_len) + " = " +
                     std::to_string(expected));
  if (distance_mm == 0) throw ValidationError("cube distance_mm must be > 0");
  if (id_of(label) >= static_cast<std::uint32_t>(kNumClasses))
    throw ValidationError("cube label outside the class set");
}

std::vector<std::complex<float>> reshape_cube(const RawCube& raw) {
  const std::size_t expected =
      static_cast<std::size_t>(raw.rx_count) * raw.tx_count * raw.fast_time_len;
  if (raw.data.size() != expected)
    throw ShapeError("raw cube holds " + std::to_string(raw.data.size()) + " values, expected " +
                     std::to_string(raw.rx_count) + "x" + std::to_string(raw.tx_count) + "x" +
                     std::to_string(raw.fast_time_len) + " = " + std::to_string(expected));
  std::vector<std::complex<float>> out(expected);
  const std::size_t n_len = raw.fast_time_len;
  for (std::uint32_t rx = 0; rx < raw.rx_count; ++rx)
    for (std::uint32_t tx = 0; tx < raw.tx_count; ++tx) {
      const std::size_t row = static_cast<std::size_t>(rx) * raw.tx_count + tx;
      for (std::uint32_t n = 0; n < raw.fast_time_len; ++n) out[row * n_len + n] = raw.at(rx, tx, n);
    }
  return out;
}

RawCube unreshape_cube(std::span<const std::complex<float>> matrix, std::uint32_t rx_count,
                       std::uint32_t tx_count, std::uint32_t fast_time_len) {
  const std::size_t expected = static_cast<std::size_t>(rx_count) * tx_count * fast_time_len;
  if (matrix.size() != expected)
    throw ShapeError("matrix holds " + std::to_string(matrix.size()) + " values, expected " +
                     std::to_string(expected));
  RawCube raw{rx_count, tx_count, fast_time_len, std::vector<std::complex<float>>(expected)};
  for (std::uint32_t rx = 0; rx < rx_count; ++rx)
    for (std::uint32_t tx = 0; tx < tx_count; ++tx) {
      const std::size_t row = static_cast<std::size_t>(rx) * tx_count + tx;
      for (std::uint32_t n = 0; n < fast_time_len; ++n)
        raw.at(rx, tx, n) = matrix[row * fast_time_len + n];
    }
  return raw;
}

std::size_t write_cube(const DataCube& cube, std::ostream& sink) {
  cube.validate();
  std::string buf;
  buf.reserve(kCubeHeaderBytes + cube.iq.size() * 8);
  buf.append(kCubeMagic, 4);
  put_u32(buf, kCubeVersion);
  put_u32(buf, cube.rx_count);
  put_u32(buf, cube.tx_count);
  put_u32(buf, cube.fast_time_len);
  put_u32(buf, id_of(cube.label));
  put_u32(buf, cube.distance_mm);
  put_u32(buf, cube.session_id);
  put_u32(buf, cube.sample_id);
  for (const auto& z : cube.iq) {
    put_u32(buf, std::bit_cast<std::uint32_t>(z.real()));
    put_u32(buf, std::bit_cast<std::uint32_t>(z.imag()));
  }
  sink.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!sink) throw IoError("failed writing cube payload");
  return buf.size();
}

DataCube read_cube(std::istream& source) {
  std::array<unsigned char, kCubeHeaderBytes> header{};
  source.read(reinterpret_cast<char*>(header.data()), 4);
  if (source.gcount() < 4) throw ParseError(ParseError::Kind::Truncated, "stream too short for RDC1 magic");
  if (std::memcmp(header.data(), kCubeMagic, 4) != 0)
    throw ParseError(ParseError::Kind::BadMagic, "bad magic: expected \"RDC1\"");
  source.read(reinterpret_cast<char*>(header.data() + 4), kCubeHeaderBytes - 4);
  if (static_cast<std::size_t>(source.gcount()) < kCubeHeaderBytes - 4)
    throw ParseError(ParseError::Kind::Truncated, "truncated RDC1 header");
  const unsigned char* p = header.data() + 4;
  const std::uint32_t version = get_u32(p);
  if (version != kCubeVersion)
    throw ParseError(ParseError::Kind::BadVersion, "unsupported RDC1 version " + std::to_string(version));
  DataCube cube;
  cube.rx_count = get_u32(p + 4);
  cube.tx_count = get_u32(p + 8);
  cube.fast_time_len = get_u32(p + 12);
  const std::uint32_t label = get_u32(p + 16);
  cube.distance_mm = get_u32(p + 20);
  cube.session_id = get_u32(p + 24);
  cube.sample_id = get_u32(p + 28);

  const std::uint64_t elements =
      static_cast<std::uint64_t>(cube.rx_count) * cube.tx_count * cube.fast_time_len;
  if (elements == 0 || elements > kMaxCubeElements)
    throw ParseError(ParseError::Kind::DimensionOverflow,
                     "cube dimensions " + std::to_string(cube.rx_count) + "x" +
                         std::to_string(cube.tx_count) + "x" + std::to_string(cube.fast_time_len) +
                         " outside accepted range");
  if (label >= static_cast<std::uint32_t>(kNumClasses))
    throw ParseError(ParseError::Kind::BadValue, "label id " + std::to_string(label) + " outside 0..4");
  cube.label = static_cast<MaterialClass>(label);

  std::vector<unsigned char> payload(elements * 8);
  source.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(source.gcount()) < payload.size())
    throw ParseError(ParseError::Kind::Truncated,
                     "truncated RDC1 payload: got " + std::to_string(source.gcount()) + " of " +
                         std::to_string(payload.size()) + " bytes");
  cube.iq.resize(elements);
  for (std::size_t i = 0; i < elements; ++i) {
    const float re = std::bit_cast<float>(get_u32(payload.data() + 8 * i));
    const float im = std::bit_cast<float>(get_u32(payload.data() + 8 * i + 4));
    cube.iq[i] = {re, im};
  }
  if (cube.distance_mm == 0) throw ParseError(ParseError::Kind::BadValue, "cube distance_mm is 0");
  return cube;
}

void save_cube(const DataCube& cube, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_cube(cube, out);
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

DataCube load_cube(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cube " + path.string());
  try {
    return read_cube(in);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

std::string_view to_string(SplitTag s) {
  switch (s) {
    case SplitTag::Train: return "train";
    case SplitTag::TestD0: return "test_d0";
    case SplitTag::TestD1: return "test_d1";
  }
  return "?";
}

std::optional<SplitTag> split_from_string(std::string_view name) {
  if (name == "train") return SplitTag::Train;
  if (name == "test_d0") return SplitTag::TestD0;
  if (name == "test_d1") return SplitTag::TestD1;
  return std::nullopt;
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<ManifestEntry> DatasetManifest::with_split(SplitTag tag) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == tag) out.push_back(e);
  return out;
}

void check_distance_disjointness(const std::vector<ManifestEntry>& entries) {
  std::set<std::uint32_t> train_distances;
  for (const auto& e : entries)
    if (e.split == SplitTag::Train) train_distances.insert(e.distance_mm);
  for (const auto& e : entries)
    if (e.split == SplitTag::TestD1 && train_distances.count(e.distance_mm))
      throw ValidationError("test_d1 entry " + e.path + " uses distance " +
                            std::to_string(e.distance_mm) + " mm which also appears in train");
}

std::string manifest_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["path"] = e.path;
  j["label"] = std::string(to_string(e.label));
  j["distance_mm"] = e.distance_mm;
  j["session_id"] = e.session_id;
  j["split"] = std::string(to_string(e.split));
  return j.dump();
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest " + path.string() + " for writing");
  for (const auto& e : entries) out << manifest_line(e) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.path = j.at("path").get<std::string>();
      const auto& label = j.at("label");
      if (label.is_string()) {
        auto m = material_from_string(label.get<std::string>());
        if (!m) throw ValidationError("unknown label '" + label.get<std::string>() + "'");
        e.label = *m;
      } else {
        e.label = material_from_id(label.get<std::uint32_t>());
      }
      e.distance_mm = j.at("distance_mm").get<std::uint32_t>();
      e.session_id = j.value("session_id", 0u);
      auto split = split_from_string(j.at("split").get<std::string>());
      if (!split) throw ValidationError("unknown split tag '" + j.at("split").get<std::string>() + "'");
      e.split = *split;
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError(where + ": malformed manifest row: " + ex.what());
    } catch (const ValidationError& ex) {
      throw ValidationError(where + ": " + ex.what());
    }
    if (e.distance_mm == 0) throw ValidationError(where + ": distance_mm must be > 0");

    const auto file = manifest.resolve(e);
    if (!std::filesystem::exists(file)) throw IoError(where + ": missing cube file " + file.string());
    const DataCube cube = load_cube(file);
    if (cube.label != e.label || cube.distance_mm != e.distance_mm || cube.session_id != e.session_id)
      throw ValidationError(where + ": cube metadata (" + std::string(to_string(cube.label)) + ", " +
                            std::to_string(cube.distance_mm) + " mm, session " +
                            std::to_string(cube.session_id) + ") disagrees with manifest row");
    manifest.entries.push_back(std::move(e));
  }
  check_distance_disjointness(manifest.entries);
  return manifest;
}

}  // namespace smcnet
