#include "evagraph/grph_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace evagraph::grph {

static_assert(std::endian::native == std::endian::little, "GRPH IO assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'R', 'P', 'H'};

std::size_t padded(std::size_t n) { return (n + 7) / 8 * 8; }

DType parse_dtype(const std::string& s) {
  if (s == "u32") return DType::u32;
  if (s == "i64") return DType::i64;
  if (s == "f32") return DType::f32;
  if (s == "u8") return DType::u8;
  throw FormatError("GRPH: unknown dtype '" + s + "'");
}

template <typename T>
DType dtype_of();
template <>
DType dtype_of<std::uint32_t>() { return DType::u32; }
template <>
DType dtype_of<std::int64_t>() { return DType::i64; }
template <>
DType dtype_of<float>() { return DType::f32; }
template <>
DType dtype_of<std::uint8_t>() { return DType::u8; }

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  return v;
}

}  // namespace

std::string dtype_name(DType t) {
  switch (t) {
    case DType::u32: return "u32";
    case DType::i64: return "i64";
    case DType::f32: return "f32";
    case DType::u8: return "u8";
  }
  return "u8";
}

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::u32: return 4;
    case DType::i64: return 8;
    case DType::f32: return 4;
    case DType::u8: return 1;
  }
  return 1;
}

std::uint64_t Section::element_count() const {
  std::uint64_t count = 1;
  for (auto d : shape) count *= d;
  return count;
}

template <typename T>
std::vector<T> Section::as() const {
  if (dtype_of<T>() != dtype) {
    throw FormatError("GRPH: section '" + name + "' has dtype " + dtype_name(dtype));
  }
  std::vector<T> out(bytes.size() / sizeof(T));
  if (!bytes.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

template <typename T>
Section Section::make(std::string name, DType dtype, std::vector<std::uint64_t> shape, const std::vector<T>& values) {
  Section s;
  s.name = std::move(name);
  s.dtype = dtype;
  s.shape = std::move(shape);
  if (dtype_size(dtype) != sizeof(T) || s.element_count() != values.size()) {
    throw DimensionError("GRPH: section '" + s.name + "' shape does not match its values");
  }
  s.bytes.resize(values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(s.bytes.data(), values.data(), s.bytes.size());
  return s;
}

template std::vector<std::uint32_t> Section::as<std::uint32_t>() const;
template std::vector<std::int64_t> Section::as<std::int64_t>() const;
template std::vector<float> Section::as<float>() const;
template std::vector<std::uint8_t> Section::as<std::uint8_t>() const;
template Section Section::make<std::uint32_t>(std::string, DType, std::vector<std::uint64_t>,
                                              const std::vector<std::uint32_t>&);
template Section Section::make<std::int64_t>(std::string, DType, std::vector<std::uint64_t>,
                                             const std::vector<std::int64_t>&);
template Section Section::make<float>(std::string, DType, std::vector<std::uint64_t>, const std::vector<float>&);
template Section Section::make<std::uint8_t>(std::string, DType, std::vector<std::uint64_t>,
                                             const std::vector<std::uint8_t>&);

const Section& Container::at(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return s;
  }
  throw FormatError("GRPH: missing section '" + name + "'");
}

bool Container::contains(const std::string& name) const {
  for (const auto& s : sections) {
    if (s.name == name) return true;
  }
  return false;
}

std::vector<std::uint8_t> encode(const Container& c) {
  nlohmann::json header;
  header["sections"] = nlohmann::json::array();
  for (const auto& s : c.sections) {
    if (s.bytes.size() != s.element_count() * dtype_size(s.dtype)) {
      throw DimensionError("GRPH: section '" + s.name + "' payload size does not match shape");
    }
    header["sections"].push_back({{"name", s.name}, {"dtype", dtype_name(s.dtype)}, {"shape", s.shape}});
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  append_u32(out, kVersion);
  append_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.resize(padded(out.size()), 0);
  for (const auto& s : c.sections) {
    out.insert(out.end(), s.bytes.begin(), s.bytes.end());
    out.resize(padded(out.size()), 0);
  }
  return out;
}

Container decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("GRPH: bad magic");
  const auto version = read_u32(bytes, 4);
  if (version != kVersion) throw FormatError("GRPH: unsupported version " + std::to_string(version));
  const auto header_len = read_u32(bytes, 8);
  if (12 + static_cast<std::size_t>(header_len) > bytes.size()) throw FormatError("GRPH: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("GRPH: header is not valid JSON: ") + e.what());
  }
  Container c;
  std::size_t pos = padded(12 + static_cast<std::size_t>(header_len));
  try {
    for (const auto& entry : header.at("sections")) {
      Section s;
      s.name = entry.at("name").get<std::string>();
      s.dtype = parse_dtype(entry.at("dtype").get<std::string>());
      s.shape = entry.at("shape").get<std::vector<std::uint64_t>>();
      const std::size_t len = s.element_count() * dtype_size(s.dtype);
      if (pos + len > bytes.size()) throw FormatError("GRPH: truncated payload for section '" + s.name + "'");
      s.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos = padded(pos + len);
      c.sections.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("GRPH: malformed header: ") + e.what());
  }
  return c;
}

void write_file(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Container read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

Container graph_to_container(const Graph& g) {
  const auto n = static_cast<std::uint64_t>(g.num_nodes());
  const auto d = static_cast<std::uint64_t>(g.num_features());
  Container c;
  c.sections.push_back(Section::make("row_offsets", DType::u32, {n + 1}, g.row_offsets()));
  c.sections.push_back(Section::make("col_indices", DType::u32, {g.col_indices().size()}, g.col_indices()));
  std::vector<float> feats(g.features().data(), g.features().data() + g.features().size());
  c.sections.push_back(Section::make("features", DType::f32, {n, d}, feats));
  c.sections.push_back(Section::make("labels", DType::i64, {n}, g.labels()));
  c.sections.push_back(Section::make("mask_train", DType::u8, {n}, g.masks().train));
  c.sections.push_back(Section::make("mask_val", DType::u8, {n}, g.masks().val));
  c.sections.push_back(Section::make("mask_test", DType::u8, {n}, g.masks().test));
  c.sections.push_back(Section::make("mask_unlabeled", DType::u8, {n}, g.masks().unlabeled));
  return c;
}

Graph graph_from_container(const Container& c) {
  auto offsets = c.at("row_offsets").as<std::uint32_t>();
  auto cols = c.at("col_indices").as<std::uint32_t>();
  const auto& fsec = c.at("features");
  if (fsec.shape.size() != 2) throw FormatError("GRPH: features must be 2-D");
  auto fvals = fsec.as<float>();
  auto features = std::make_shared<Matrix>(static_cast<Eigen::Index>(fsec.shape[0]),
                                           static_cast<Eigen::Index>(fsec.shape[1]));
  if (!fvals.empty()) std::memcpy(features->data(), fvals.data(), fvals.size() * sizeof(float));
  SplitMasks masks{c.at("mask_train").as<std::uint8_t>(), c.at("mask_val").as<std::uint8_t>(),
                   c.at("mask_test").as<std::uint8_t>(), c.at("mask_unlabeled").as<std::uint8_t>()};
  return Graph::from_csr(std::move(offsets), std::move(cols), std::move(features), c.at("labels").as<std::int64_t>(),
                         std::move(masks));
}

void save_graph(const std::filesystem::path& path, const Graph& g) { write_file(path, graph_to_container(g)); }

Graph load_graph(const std::filesystem::path& path) { return graph_from_container(read_file(path)); }

}  // namespace evagraph::grph
