#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "evagraph/gnn.hpp"
#include "evagraph/grph_io.hpp"
#include "support.hpp"

using namespace evagraph;

namespace {

std::vector<std::uint8_t> le32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 24)};
}

void append(std::vector<std::uint8_t>& out, const std::vector<std::uint8_t>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

void pad8(std::vector<std::uint8_t>& out) {
  while (out.size() % 8 != 0) out.push_back(0);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("evagraph_test_" + name);
}

}  // namespace

TEST_CASE("encode produces the documented layout") {
  grph::Container c;
  c.sections.push_back(grph::Section::make<std::uint32_t>("a", grph::DType::u32, {3}, {1, 2, 3}));
  c.sections.push_back(grph::Section::make<std::uint8_t>("b", grph::DType::u8, {1}, {7}));
  const auto bytes = grph::encode(c);

  const std::string header =
      R"({"sections":[{"dtype":"u32","name":"a","shape":[3]},{"dtype":"u8","name":"b","shape":[1]}]})";
  std::vector<std::uint8_t> expect{'G', 'R', 'P', 'H'};
  append(expect, le32(1));
  append(expect, le32(static_cast<std::uint32_t>(header.size())));
  expect.insert(expect.end(), header.begin(), header.end());
  pad8(expect);
  for (std::uint32_t v : {1u, 2u, 3u}) append(expect, le32(v));
  pad8(expect);
  expect.push_back(7);
  pad8(expect);

  CHECK(bytes == expect);
  const auto back = grph::decode(bytes);
  REQUIRE(back.sections.size() == 2);
  CHECK(back.at("a").as<std::uint32_t>() == std::vector<std::uint32_t>{1, 2, 3});
  CHECK(back.at("b").as<std::uint8_t>() == std::vector<std::uint8_t>{7});
}

TEST_CASE("decode rejects malformed input") {
  grph::Container c;
  c.sections.push_back(grph::Section::make<float>("x", grph::DType::f32, {2}, {1.0f, 2.0f}));
  auto bytes = grph::encode(c);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(grph::decode(bad_magic), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(grph::decode(bad_version), FormatError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 8);
  CHECK_THROWS_AS(grph::decode(truncated), FormatError);

  auto short_header = bytes;
  short_header.resize(14);
  CHECK_THROWS_AS(grph::decode(short_header), FormatError);

  const auto back = grph::decode(bytes);
  CHECK_THROWS_AS(back.at("missing"), FormatError);
}

TEST_CASE("graph round-trips through a file bit-exactly") {
  const auto g = make_sbm(testing::toy_params(5));
  const auto path = temp_path("graph.grph");
  grph::save_graph(path, g);
  const auto h = grph::load_graph(path);
  CHECK(h.row_offsets() == g.row_offsets());
  CHECK(h.col_indices() == g.col_indices());
  CHECK(h.features() == g.features());
  CHECK(h.labels() == g.labels());
  CHECK(h.masks().train == g.masks().train);
  CHECK(h.masks().unlabeled == g.masks().unlabeled);
  CHECK(grph::encode(grph::graph_to_container(h)) == grph::encode(grph::graph_to_container(g)));
  std::filesystem::remove(path);
}

TEST_CASE("graph container validation names the problem") {
  const auto g = make_sbm(testing::toy_params(5));
  auto c = grph::graph_to_container(g);
  for (auto& s : c.sections) {
    if (s.name == "col_indices") {
      // Point the first stored neighbour somewhere else to break symmetry.
      auto cols = s.as<std::uint32_t>();
      cols[0] = cols[0] == 1 ? 2 : 1;
      s = grph::Section::make<std::uint32_t>("col_indices", grph::DType::u32, s.shape, cols);
    }
  }
  CHECK_THROWS_AS(grph::graph_from_container(c), Error);

  grph::Container missing;
  CHECK_THROWS_AS(grph::graph_from_container(missing), FormatError);
}

TEST_CASE("missing files raise IoError with the path") {
  CHECK_THROWS_WITH_AS(grph::load_graph("/nonexistent/graph.grph"), doctest::Contains("/nonexistent/graph.grph"),
                       IoError);
}

TEST_CASE("weights round-trip") {
  const auto w = testing::random_weights(ModelKind::mlp, 5, 3, 2);
  const auto path = temp_path("weights.grph");
  save_weights(path, w);
  const auto v = load_weights(path);
  CHECK(v.kind == ModelKind::mlp);
  CHECK(v.W0 == w.W0);
  CHECK(v.b0 == w.b0);
  CHECK(v.W1 == w.W1);
  CHECK(v.b1 == w.b1);
  const auto c = grph::read_file(path);
  CHECK(c.at("kind").as<std::uint8_t>() == std::vector<std::uint8_t>{1});
  CHECK(c.at("W0").shape == std::vector<std::uint64_t>{5, 8});
  std::filesystem::remove(path);
}
