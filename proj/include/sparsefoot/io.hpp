#pragma once

// Text and image formats: row-major CSV grids, 16-bit PGM, and the flat
// `key = value` run configuration.

#include "sparsefoot/grid.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace sparsefoot {

/// Fixed-point text with `decimals` places; "inf", "-inf" and "nan" spelled out.
std::string format_double(double value, int decimals = 6);

/// One line per row, comma separated. Reals use 6 decimals, booleans 0/1.
template <typename Derived>
void write_csv_grid(std::ostream& out, const Eigen::DenseBase<Derived>& grid, int decimals = 6) {
  using Scalar = typename Derived::Scalar;
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      if (c) out << ',';
      if constexpr (std::is_same_v<Scalar, bool>) {
        out << (grid(r, c) ? '1' : '0');
      } else if constexpr (std::is_integral_v<Scalar>) {
        out << grid(r, c);
      } else {
        out << format_double(double(grid(r, c)), decimals);
      }
    }
    out << '\n';
  }
}

/// Parses a CSV of reals written by write_csv_grid. Throws IoError.
GridXd read_csv_grid(std::istream& in);

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::string> comments;
  /// Row-major samples.
  std::vector<std::uint16_t> pixels;
};

/// 16-bit binary PGM of `values` (rows become image rows). Values are mapped
/// affinely so that value = offset + scale * sample; the header comment
/// "# scale <s> offset <o>" records the mapping. Non-finite values map to 0.
void write_pgm16_affine(const std::filesystem::path& path, const GridXd& values);

/// 16-bit binary PGM with a fixed quantization step (value = step * sample),
/// clamped to [0, 65535].
void write_pgm16_quantized(const std::filesystem::path& path, const GridXd& values, double step);

/// 8-bit binary PGM, 255 for true.
void write_pgm_mask(const std::filesystem::path& path, const MaskX& mask);

PgmImage read_pgm(const std::filesystem::path& path);

/// Writes a text file, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Flat key-value configuration restricted to a known key set.
class RunConfig {
 public:
  explicit RunConfig(std::vector<ConfigKey> keys);

  /// Parses `key = value` lines; `#` starts a comment. Throws ConfigError.
  void merge_text(std::string_view text, std::string_view source = "config");
  void merge_file(const std::filesystem::path& path);
  /// Throws ConfigError for unknown keys.
  void set(std::string_view key, std::string_view value);

  bool has_key(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  /// Comma-separated list.
  std::vector<std::string> get_list(std::string_view key) const;
  std::vector<double> get_double_list(std::string_view key) const;

  /// All keys in declaration order, one `key = value` per line.
  std::string resolved_text() const;
  const std::vector<ConfigKey>& keys() const { return keys_; }

 private:
  std::vector<ConfigKey> keys_;
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace sparsefoot
