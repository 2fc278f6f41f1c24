#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "smcnet/datacube.hpp"
#include "smcnet/errors.hpp"
#include "support.hpp"

using namespace smcnet;
using testing::TempDir;

namespace {

ParseError::Kind parse_kind(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_cube(in);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected a parse error");
  return ParseError::Kind::BadValue;
}

std::string serialize(const DataCube& c) {
  std::ostringstream out;
  write_cube(c, out);
  return out.str();
}

void put_u32(std::string& s, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s[offset + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

}  // namespace

TEST_CASE("material names and ids are stable") {
  CHECK(id_of(MaterialClass::Concrete) == 0);
  CHECK(id_of(MaterialClass::Wood) == 4);
  CHECK(to_string(MaterialClass::Drywall) == "drywall");
  CHECK(material_from_string("metal") == MaterialClass::Metal);
  CHECK_FALSE(material_from_string("plastic").has_value());
  CHECK_THROWS_AS(material_from_id(5), ValidationError);
}

TEST_CASE("reshape places (rx, tx) at row rx*Tx + tx") {
  SUBCASE("single channel is the identity") {
    RawCube raw{1, 1, 3, {{1, 1}, {2, 0}, {0, 3}}};
    const auto m = reshape_cube(raw);
    CHECK(m == raw.data);
  }
  SUBCASE("2x2: raw[1][0][0] lands in row 2") {
    RawCube raw{2, 2, 4, std::vector<std::complex<float>>(16)};
    raw.at(1, 0, 0) = {7, 0};
    const auto m = reshape_cube(raw);
    CHECK(m[2 * 4 + 0] == std::complex<float>(7, 0));
  }
  SUBCASE("every element of a random 3x4x5 cube") {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> nd;
    RawCube raw{3, 4, 5, std::vector<std::complex<float>>(60)};
    for (auto& z : raw.data) z = {nd(rng), nd(rng)};
    const auto m = reshape_cube(raw);
    for (std::uint32_t rx = 0; rx < 3; ++rx)
      for (std::uint32_t tx = 0; tx < 4; ++tx)
        for (std::uint32_t n = 0; n < 5; ++n) CHECK(m[(rx * 4 + tx) * 5 + n] == raw.at(rx, tx, n));
    const RawCube back = unreshape_cube(m, 3, 4, 5);
    CHECK(back.data == raw.data);
  }
  SUBCASE("dimension mismatch") {
    RawCube raw{2, 2, 4, std::vector<std::complex<float>>(15)};
    CHECK_THROWS_AS(reshape_cube(raw), ShapeError);
    CHECK_THROWS_AS(unreshape_cube(std::vector<std::complex<float>>(3), 1, 1, 4), ShapeError);
  }
}

TEST_CASE("RDC1 round trip") {
  SUBCASE("minimal 1x1x1 cube") {
    DataCube c;
    c.rx_count = c.tx_count = c.fast_time_len = 1;
    c.iq = {{0, 0}};
    c.distance_mm = 1;
    std::istringstream in(serialize(c));
    CHECK(read_cube(in) == c);
  }
  SUBCASE("20x20x100 cube has the expected payload size") {
    std::mt19937_64 rng(1);
    const DataCube c = testing::random_cube(rng, 20, 20, 100);
    std::ostringstream out;
    const std::size_t bytes = write_cube(c, out);
    CHECK(bytes == kCubeHeaderBytes + 400 * 100 * 8);
    CHECK(out.str().size() == bytes);
    std::istringstream in(out.str());
    CHECK(read_cube(in) == c);
  }
  SUBCASE("file helpers") {
    TempDir dir("cube");
    std::mt19937_64 rng(2);
    const DataCube c = testing::random_cube(rng, 2, 3, 7, MaterialClass::Wood, 800);
    save_cube(c, dir / "a.rdc");
    CHECK(load_cube(dir / "a.rdc") == c);
    CHECK_THROWS_AS(load_cube(dir / "missing.rdc"), IoError);
  }
}

TEST_CASE("property: RDC1 round trip over random dimensions") {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 40; ++trial) {
    const auto rx = static_cast<std::uint32_t>(1 + rng() % 32);
    const auto tx = static_cast<std::uint32_t>(1 + rng() % 32);
    const auto n = static_cast<std::uint32_t>(1 + rng() % 128);
    const DataCube c = testing::random_cube(rng, rx, tx, n, static_cast<MaterialClass>(rng() % 5),
                                            static_cast<std::uint32_t>(1 + rng() % 5000));
    std::istringstream in(serialize(c));
    const DataCube back = read_cube(in);
    REQUIRE(back == c);
  }
}

TEST_CASE("RDC1 reader reports distinct parse errors") {
  std::mt19937_64 rng(4);
  const std::string good = serialize(testing::random_cube(rng, 2, 2, 8));

  std::string bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  CHECK(parse_kind(bad_magic) == ParseError::Kind::BadMagic);
  CHECK(parse_kind("XXXX") == ParseError::Kind::BadMagic);

  CHECK(parse_kind(good.substr(0, 20)) == ParseError::Kind::Truncated);
  CHECK(parse_kind(good.substr(0, good.size() - 1)) == ParseError::Kind::Truncated);

  std::string huge = good.substr(0, kCubeHeaderBytes);
  put_u32(huge, 8, 1u << 12);
  put_u32(huge, 12, 1u << 12);
  put_u32(huge, 16, 1u << 12);
  CHECK(parse_kind(huge) == ParseError::Kind::DimensionOverflow);

  std::string version = good;
  put_u32(version, 4, 9);
  CHECK(parse_kind(version) == ParseError::Kind::BadVersion);

  std::string label = good;
  put_u32(label, 20, 7);
  CHECK(parse_kind(label) == ParseError::Kind::BadValue);
}

TEST_CASE("manifest validation") {
  TempDir dir("manifest");
  std::mt19937_64 rng(5);
  auto cube_at = [&](const std::string& name, MaterialClass label, std::uint32_t mm) {
    auto c = testing::random_cube(rng, 1, 2, 4, label, mm);
    c.session_id = 0;
    save_cube(c, dir / name);
  };
  cube_at("a.rdc", MaterialClass::Metal, 500);
  cube_at("b.rdc", MaterialClass::Metal, 600);
  cube_at("c.rdc", MaterialClass::Metal, 600);

  auto write_lines = [&](const std::string& name, const std::vector<std::string>& lines) {
    std::ofstream out(dir / name);
    for (const auto& l : lines) out << l << '\n';
    return dir / name;
  };

  SUBCASE("train at 500 mm and test_d1 at 600 mm is valid") {
    const auto path = write_lines("m.jsonl", {
        R"({"path":"a.rdc","label":"metal","distance_mm":500,"session_id":0,"split":"train"})",
        R"({"path":"b.rdc","label":3,"distance_mm":600,"session_id":0,"split":"test_d1"})"});
    const auto m = load_manifest(path);
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[1].label == MaterialClass::Metal);
    CHECK(m.with_split(SplitTag::TestD1).size() == 1);
  }
  SUBCASE("shared 600 mm between train and test_d1 is rejected") {
    const auto path = write_lines("m.jsonl", {
        R"({"path":"c.rdc","label":"metal","distance_mm":600,"session_id":0,"split":"train"})",
        R"({"path":"b.rdc","label":"metal","distance_mm":600,"session_id":0,"split":"test_d1"})"});
    CHECK_THROWS_AS(load_manifest(path), ValidationError);
  }
  SUBCASE("empty manifest") {
    const auto path = write_lines("m.jsonl", {});
    CHECK(load_manifest(path).entries.empty());
  }
  SUBCASE("metadata mismatch and missing files") {
    const auto wrong = write_lines("w.jsonl", {
        R"({"path":"a.rdc","label":"glass","distance_mm":500,"session_id":0,"split":"train"})"});
    CHECK_THROWS_AS(load_manifest(wrong), ValidationError);
    const auto missing = write_lines("x.jsonl", {
        R"({"path":"nope.rdc","label":"glass","distance_mm":500,"session_id":0,"split":"train"})"});
    CHECK_THROWS_AS(load_manifest(missing), IoError);
    CHECK_THROWS_AS(load_manifest(dir / "absent.jsonl"), IoError);
  }
  SUBCASE("write then load") {
    std::vector<ManifestEntry> rows{{"a.rdc", MaterialClass::Metal, 500, 0, SplitTag::Train},
                                    {"b.rdc", MaterialClass::Metal, 600, 0, SplitTag::TestD1}};
    write_manifest(rows, dir / "out.jsonl");
    CHECK(load_manifest(dir / "out.jsonl").entries == rows);
    CHECK(manifest_line(rows[0]) ==
          R"({"path":"a.rdc","label":"metal","distance_mm":500,"session_id":0,"split":"train"})");
  }
}

TEST_CASE("split tags partition and d1 distances stay out of train") {
  std::vector<ManifestEntry> rows{{"a", MaterialClass::Glass, 500, 0, SplitTag::Train},
                                  {"b", MaterialClass::Glass, 500, 0, SplitTag::TestD0},
                                  {"c", MaterialClass::Glass, 600, 0, SplitTag::TestD1}};
  DatasetManifest m{".", rows};
  CHECK(m.with_split(SplitTag::Train).size() + m.with_split(SplitTag::TestD0).size() +
            m.with_split(SplitTag::TestD1).size() ==
        rows.size());
  CHECK_NOTHROW(check_distance_disjointness(rows));
  rows.push_back({"d", MaterialClass::Wood, 600, 0, SplitTag::Train});
  CHECK_THROWS_AS(check_distance_disjointness(rows), ValidationError);
}
