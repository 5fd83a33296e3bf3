#include "profpipe/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace profpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kLengthPrefix = 8;

template <typename T>
void append_le(std::vector<std::uint8_t>& out, const std::vector<T>& values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(T));
  std::memcpy(out.data() + start, values.data(), values.size() * sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto* p = out.data() + start + i * sizeof(T);
      std::reverse(p, p + sizeof(T));
    }
  }
}

template <typename T>
std::vector<T> read_le(const std::uint8_t* p, std::size_t count) {
  std::vector<T> values(count);
  std::memcpy(values.data(), p, count * sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<std::uint8_t*>(values.data());
    for (std::size_t i = 0; i < count; ++i) std::reverse(bytes + i * sizeof(T), bytes + (i + 1) * sizeof(T));
  }
  return values;
}

std::size_t dtype_size(std::string_view dtype) {
  if (dtype == "float32") return 4;
  if (dtype == "float64") return 8;
  throw CorruptContainerError("unsupported dtype '" + std::string(dtype) + "'");
}

}  // namespace

std::int64_t NamedArray::element_count() const {
  std::int64_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string_view NamedArray::dtype() const {
  return std::holds_alternative<std::vector<float>>(data) ? "float32" : "float64";
}

const NamedArray* Container::find(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const NamedArray& Container::at(std::string_view name) const {
  const auto* a = find(name);
  if (a == nullptr) throw CorruptContainerError("container has no array '" + std::string(name) + "'");
  return *a;
}

std::vector<std::uint8_t> encode_container(const Container& container) {
  json entries = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : container.arrays) {
    const auto count = std::visit([](const auto& v) { return v.size(); }, a.data);
    if (static_cast<std::int64_t>(count) != a.element_count()) {
      throw ValidationError("array '" + a.name + "' holds " + std::to_string(count) +
                            " values but its shape implies " + std::to_string(a.element_count()));
    }
    const std::uint64_t nbytes = count * dtype_size(a.dtype());
    entries.push_back({{"name", a.name},
                       {"dtype", a.dtype()},
                       {"shape", a.shape},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  const json header = {{"format", kContainerFormat},
                       {"version", kContainerVersion},
                       {"meta", container.meta},
                       {"arrays", entries}};
  const std::string text = header.dump();
  if (text.size() > 99'999'999) throw ValidationError("container header too large");

  std::vector<std::uint8_t> out;
  out.reserve(kLengthPrefix + text.size() + offset);
  char prefix[kLengthPrefix + 1];
  std::snprintf(prefix, sizeof(prefix), "%08zu", text.size());
  out.insert(out.end(), prefix, prefix + kLengthPrefix);
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& a : container.arrays) {
    std::visit([&](const auto& v) { append_le(out, v); }, a.data);
  }
  return out;
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kLengthPrefix) {
    throw CorruptContainerError("container truncated: " + std::to_string(bytes.size()) +
                                " bytes, shorter than the length prefix");
  }
  std::size_t header_len = 0;
  for (std::size_t i = 0; i < kLengthPrefix; ++i) {
    const auto c = static_cast<char>(bytes[i]);
    if (c < '0' || c > '9') throw CorruptContainerError("corrupt header: length prefix is not decimal");
    header_len = header_len * 10 + static_cast<std::size_t>(c - '0');
  }
  if (bytes.size() < kLengthPrefix + header_len) {
    throw CorruptContainerError("corrupt header: declared length " + std::to_string(header_len) +
                                " exceeds file size");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + kLengthPrefix, bytes.begin() + kLengthPrefix + header_len);
  } catch (const json::exception& e) {
    throw CorruptContainerError(std::string("corrupt header: ") + e.what());
  }

  Container container;
  const auto payload = bytes.subspan(kLengthPrefix + header_len);
  try {
    if (header.at("format").get<std::string>() != kContainerFormat) {
      throw CorruptContainerError("corrupt header: unexpected format tag");
    }
    container.meta = header.value("meta", json::object());
    for (const auto& entry : header.at("arrays")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto dtype = entry.at("dtype").get<std::string>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
      for (const auto d : a.shape) {
        if (d < 0) throw CorruptContainerError("corrupt header: negative dimension in '" + a.name + "'");
      }
      const auto count = static_cast<std::uint64_t>(a.element_count());
      if (count * dtype_size(dtype) != nbytes) {
        throw CorruptContainerError("corrupt header: size mismatch for array '" + a.name + "'");
      }
      if (offset > payload.size() || nbytes > payload.size() - offset) {
        throw CorruptContainerError("corrupt container: array '" + a.name +
                                    "' extends past end of file (truncated?)");
      }
      const auto* p = payload.data() + offset;
      if (dtype == "float32") {
        a.data = read_le<float>(p, count);
      } else {
        a.data = read_le<double>(p, count);
      }
      container.arrays.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw CorruptContainerError(std::string("corrupt header: ") + e.what());
  }
  return container;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text_file(const fs::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_container(const fs::path& path, const Container& container) {
  write_file(path, encode_container(container));
}

Container read_container(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing file " + path.string());
  return decode_container(read_file(path));
}

}  // namespace profpipe
