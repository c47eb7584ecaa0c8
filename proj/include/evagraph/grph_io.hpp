#pragma once

// GRPH binary container.
//
// Layout (all integers little-endian):
//   "GRPH"                      4 bytes magic
//   version                     u32 (currently 1)
//   header_length               u32, byte length of the JSON header
//   header                      UTF-8 JSON {"sections":[{"name","dtype","shape"}...]}
//   zero padding to 8 bytes
//   payload_0, padding to 8, payload_1, padding to 8, ...
//
// Payloads appear in header order; dtype is one of u32, i64, f32, u8; arrays
// are row-major.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evagraph/graph.hpp"

namespace evagraph::grph {

inline constexpr std::uint32_t kVersion = 1;

enum class DType { u32, i64, f32, u8 };

std::string dtype_name(DType t);
std::size_t dtype_size(DType t);

struct Section {
  std::string name;
  DType dtype = DType::u8;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> bytes;

  std::uint64_t element_count() const;

  template <typename T>
  std::vector<T> as() const;

  template <typename T>
  static Section make(std::string name, DType dtype, std::vector<std::uint64_t> shape, const std::vector<T>& values);
};

struct Container {
  std::vector<Section> sections;

  const Section& at(const std::string& name) const;
  bool contains(const std::string& name) const;
};

std::vector<std::uint8_t> encode(const Container& c);
Container decode(const std::vector<std::uint8_t>& bytes);

void write_file(const std::filesystem::path& path, const Container& c);
Container read_file(const std::filesystem::path& path);

Container graph_to_container(const Graph& g);
Graph graph_from_container(const Container& c);

void save_graph(const std::filesystem::path& path, const Graph& g);
Graph load_graph(const std::filesystem::path& path);

}  // namespace evagraph::grph
