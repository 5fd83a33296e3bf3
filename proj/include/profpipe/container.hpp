#pragma once

// Header-prefixed binary container shared by clip files and model checkpoints.
//
// Layout:
//   bytes [0, 8)        header length N as zero-padded ASCII decimal
//   bytes [8, 8 + N)    UTF-8 JSON header
//   bytes [8 + N, ...)  payload: arrays back to back, little-endian
//
// The header carries {"format", "version", "meta", "arrays"}; each array entry
// lists name, dtype ("float32" | "float64"), shape, and byte offset/size
// relative to the payload start.

#include "profpipe/core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace profpipe {

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  std::int64_t element_count() const;
  std::string_view dtype() const;
};

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(std::string_view name) const;
  /// Throws CorruptContainerError when absent.
  const NamedArray& at(std::string_view name) const;
};

inline constexpr std::string_view kContainerFormat = "profpipe-container";
inline constexpr int kContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const Container& container);
Container decode_container(std::span<const std::uint8_t> bytes);

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path);

/// Write bytes to a file, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Matrix <-> array helpers. Matrices are stored row-major with shape [rows, cols].
template <typename Derived>
NamedArray make_array(std::string name, const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  std::vector<Scalar> values(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) values[k++] = m(r, c);
  return NamedArray{std::move(name), {m.rows(), m.cols()}, std::move(values)};
}

template <typename Scalar>
Matrix<Scalar> to_matrix(const NamedArray& array) {
  if (array.shape.size() != 2) {
    throw CorruptContainerError("array '" + array.name + "' is not two-dimensional");
  }
  const auto rows = static_cast<Eigen::Index>(array.shape[0]);
  const auto cols = static_cast<Eigen::Index>(array.shape[1]);
  Matrix<Scalar> m(rows, cols);
  std::visit(
      [&](const auto& values) {
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
          for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(values[k++]);
      },
      array.data);
  return m;
}

}  // namespace profpipe
