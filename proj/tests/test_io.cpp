#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "lane_emden/io.hpp"

using namespace lane_emden;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lane_emden_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Csv, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)})
    EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, EscapingAndLineEndings) {
  EXPECT_EQ(csv_escape("disk"), "disk");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  const fs::path p = scratch("t.csv");
  write_csv(p, {"name", "p", "n"}, {{std::string("x,y"), 0.5, 3LL}});
  EXPECT_EQ(slurp(p), "name,p,n\r\n\"x,y\",0.5,3\r\n");
}

TEST(Csv, RowWidthMustMatchHeader) {
  try {
    write_csv(scratch("bad.csv"), {"a", "b"}, {{1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Pgm, BigEndianRoundTrip) {
  Pgm img;
  img.width = 3;
  img.height = 2;
  img.pixels = {0, 1, 256, 65535, 4660, 43981};
  const fs::path p = scratch("t.pgm");
  write_pgm(p, img);
  const std::string raw = slurp(p);
  ASSERT_EQ(raw.substr(0, 13), "P5\n3 2\n65535\n");
  EXPECT_EQ(raw.size(), 13u + 12u);
  EXPECT_EQ(static_cast<unsigned char>(raw[17]), 0x01);  // 256 high byte first
  EXPECT_EQ(static_cast<unsigned char>(raw[18]), 0x00);
  const Pgm back = read_pgm(p);
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Pgm, RejectsOtherFormats) {
  const fs::path p = scratch("ascii.pgm");
  std::ofstream(p) << "P2\n1 1\n255\n0\n";
  EXPECT_THROW(read_pgm(p), Error);
}

TEST(Json, RoundTripAndParseErrors) {
  const nlohmann::json j = {{"p", 50.0}, {"peaks", {{0.25, -0.5}}}, {"name", "disk"}};
  const fs::path p = scratch("t.json");
  write_json(p, j);
  EXPECT_EQ(read_json(p), j);
  std::ofstream(scratch("broken.json")) << "{\"p\": ";
  try {
    read_json(scratch("broken.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
  }
}

TEST(Io, UnwritablePathIsIoError) {
  const fs::path blocker = scratch("plain_file");
  std::ofstream(blocker) << "x";
  for (auto f : {+[](const fs::path& b) { write_json(b / "sub" / "x.json", {}); },
                 +[](const fs::path& b) { write_csv(b / "x.csv", {"a"}, {}); }}) {
    try {
      f(blocker);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
  }
  try {
    read_json(scratch("missing.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Field, HeatmapAndCsvDump) {
  const auto g = build_grid(DomainSpec::rectangle({0, 0}, {2, 1}), 0.0625);
  const Field u = Field::sample(g, [](Point x) { return x.y; });
  const Pgm img = field_heatmap(u);
  EXPECT_EQ(img.width, g->nx());
  EXPECT_EQ(img.height, g->ny());
  EXPECT_EQ(*std::max_element(img.pixels.begin(), img.pixels.end()), 65535);
  EXPECT_EQ(img.pixels.back(), 0);  // bottom row is the boundary y = 0
  const fs::path p = scratch("u.csv");
  write_field_csv(p, u);
  const std::string text = slurp(p);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), u.size() + 1);
}
