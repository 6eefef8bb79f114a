#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "enspost/grid.hpp"

using namespace enspost;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("grd1 round trip preserves header and float values") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> ud(-5.0f, 5.0f);
  Grd1 g;
  g.h = 6;
  g.w = 10;
  g.c = 3;
  g.data.resize(static_cast<std::size_t>(g.h) * g.w * g.c);
  for (float& v : g.data) v = ud(rng);

  auto path = temp_file("enspost_grd1_test.bin");
  grd1_write(path, g);
  CHECK(std::filesystem::file_size(path) == 8 + 12 + g.data.size() * 4);

  Grd1 back = grd1_read(path);
  CHECK(back.h == g.h);
  CHECK(back.w == g.w);
  CHECK(back.c == g.c);
  REQUIRE(back.data.size() == g.data.size());
  for (std::size_t i = 0; i < g.data.size(); ++i) CHECK(back.data[i] == g.data[i]);
  std::filesystem::remove(path);
}

TEST_CASE("grd1 write validates data size") {
  Grd1 g;
  g.h = 2;
  g.w = 2;
  g.c = 2;
  g.data.resize(7);  // should be 8
  CHECK_THROWS_AS(grd1_write(temp_file("enspost_grd1_bad.bin"), g),
                  std::invalid_argument);
}

TEST_CASE("grd1 read rejects corrupt files") {
  auto path = temp_file("enspost_grd1_corrupt.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTAGRID" << std::string(12, '\0');
  }
  CHECK_THROWS_AS(grd1_read(path), std::runtime_error);

  {
    Grd1 g;
    g.h = 4;
    g.w = 4;
    g.c = 1;
    g.data.resize(16, 1.0f);
    grd1_write(path, g);
    std::filesystem::resize_file(path, 30);  // chop the payload
  }
  CHECK_THROWS_AS(grd1_read(path), std::runtime_error);
  CHECK_THROWS_AS(grd1_read(temp_file("enspost_grd1_missing.bin")),
                  std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("grd1 channel accessors round trip through GeoGrid") {
  Grd1 g;
  g.h = 3;
  g.w = 4;
  g.c = 2;
  g.data.assign(static_cast<std::size_t>(g.h) * g.w * g.c, 0.0f);

  GeoGrid grid(3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) grid.at(i, j) = i * 4.0 + j + 0.5;
  grd1_set_channel(g, 1, grid);
  GeoGrid back = grd1_channel_grid(g, 1);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(grid.values[i]).epsilon(1e-7));
  // Channel 0 untouched
  GeoGrid zero = grd1_channel_grid(g, 0);
  for (double v : zero.values) CHECK(v == 0.0);

  CHECK_THROWS_AS(grd1_channel_grid(g, 2), std::out_of_range);
  CHECK_THROWS_AS(grd1_set_channel(g, 2, grid), std::out_of_range);
  GeoGrid wrong(4, 4, 0.0);
  CHECK_THROWS_AS(grd1_set_channel(g, 0, wrong), std::invalid_argument);
}

TEST_CASE("fnv1a matches published vectors") {
  CHECK(fnv1a_bytes("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a_bytes("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a_bytes("abc", 3) == 0xe71fa2190541574bull);
  CHECK(fnv1a_bytes("hello world", 11) == 0x779a65e7023cd2e7ull);
}

TEST_CASE("fnv1a of a file equals fnv1a of its bytes") {
  auto path = temp_file("enspost_fnv_test.bin");
  std::string payload = "ensemble post-processing\n";
  {
    std::ofstream os(path, std::ios::binary);
    os << payload;
  }
  CHECK(fnv1a_file(path) == fnv1a_bytes(payload.data(), payload.size()));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(fnv1a_file(path), std::runtime_error);
}

TEST_CASE("field ids round trip by name") {
  for (FieldId id : {FieldId::t850_like, FieldId::z500_like, FieldId::synthetic_k})
    CHECK(field_id_from(field_id_name(id)) == id);
  CHECK_THROWS_AS(field_id_from("bogus"), std::invalid_argument);
}
