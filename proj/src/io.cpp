#include "sparsefoot/io.hpp"

#include "sparsefoot/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

namespace sparsefoot {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void write_pgm16(const std::filesystem::path& path, int width, int height,
                 const std::vector<std::string>& comments, const std::vector<std::uint16_t>& px) {
  std::ofstream out = open_out(path);
  out << "P5\n";
  for (const auto& c : comments) out << "# " << c << '\n';
  out << width << ' ' << height << "\n65535\n";
  for (std::uint16_t v : px) {
    const char bytes[2] = {char(v >> 8), char(v & 0xff)};
    out.write(bytes, 2);
  }
}

}  // namespace

std::string format_double(double value, int decimals) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

GridXd read_csv_grid(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto t = trim(cell);
      if (t == "inf") {
        row.push_back(std::numeric_limits<double>::infinity());
      } else if (t == "-inf") {
        row.push_back(-std::numeric_limits<double>::infinity());
      } else if (t == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        try {
          row.push_back(std::stod(std::string(t)));
        } catch (const std::exception&) {
          throw Error(ErrorCode::IoError, "bad CSV value '" + std::string(t) + "'");
        }
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::IoError, "ragged CSV grid");
    rows.push_back(std::move(row));
  }
  GridXd g(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) g(r, c) = rows[r][c];
  return g;
}

void write_pgm16_affine(const std::filesystem::path& path, const GridXd& values) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    const double v = values.data()[k];
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  const double scale = hi > lo ? (hi - lo) / 65535.0 : 1.0;
  std::vector<std::uint16_t> px;
  px.reserve(std::size_t(values.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      const double q = std::isfinite(v) ? std::round((v - lo) / scale) : 0.0;
      px.push_back(std::uint16_t(std::clamp(q, 0.0, 65535.0)));
    }
  }
  write_pgm16(path, int(values.cols()), int(values.rows()),
              {"scale " + format_double(scale, 12) + " offset " + format_double(lo, 6)}, px);
}

void write_pgm16_quantized(const std::filesystem::path& path, const GridXd& values, double step) {
  std::vector<std::uint16_t> px;
  px.reserve(std::size_t(values.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      px.push_back(std::uint16_t(std::clamp(std::round(values(r, c) / step), 0.0, 65535.0)));
  write_pgm16(path, int(values.cols()), int(values.rows()),
              {"scale " + format_double(step, 6) + " offset 0.000000"}, px);
}

void write_pgm_mask(const std::filesystem::path& path, const MaskX& mask) {
  std::ofstream out = open_out(path);
  out << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c) out.put(mask(r, c) ? char(255) : char(0));
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  PgmImage img;
  std::string magic;
  in >> magic;
  if (magic != "P5") throw Error(ErrorCode::IoError, "not a binary PGM: " + path.string());
  int fields[3];
  for (int k = 0; k < 3;) {
    in >> std::ws;
    if (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      img.comments.push_back(std::string(trim(std::string_view(comment).substr(1))));
      continue;
    }
    if (!(in >> fields[k++])) throw Error(ErrorCode::IoError, "truncated PGM header");
  }
  in.get();
  img.width = fields[0];
  img.height = fields[1];
  img.maxval = fields[2];
  const std::size_t n = std::size_t(img.width) * std::size_t(img.height);
  img.pixels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (img.maxval > 255) {
      const int hi = in.get(), lo = in.get();
      img.pixels[k] = std::uint16_t((hi << 8) | lo);
    } else {
      img.pixels[k] = std::uint16_t(in.get());
    }
  }
  if (!in) throw Error(ErrorCode::IoError, "truncated PGM data: " + path.string());
  return img;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out = open_out(path);
  out << content;
}

RunConfig::RunConfig(std::vector<ConfigKey> keys) : keys_(std::move(keys)) {
  for (const auto& k : keys_) values_[k.name] = k.default_value;
}

void RunConfig::merge_text(std::string_view text, std::string_view source) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, std::string(source) + ":" + std::to_string(line_no) +
                                              ": expected 'key = value'");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw Error(ErrorCode::ConfigError, "unknown key '" + std::string(key) + "'");
  it->second = std::string(value);
}

bool RunConfig::has_key(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw Error(ErrorCode::ConfigError, "unknown key '" + std::string(key) + "'");
  return it->second;
}

double RunConfig::get_double(std::string_view key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "' expects a number, got '" + v + "'");
  }
}

std::int64_t RunConfig::get_int(std::string_view key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t RunConfig::get_uint(std::string_view key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw Error(ErrorCode::ConfigError,
                "key '" + std::string(key) + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

bool RunConfig::get_bool(std::string_view key) const {
  const std::string& v = get(key);
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigError, "key '" + std::string(key) + "' expects on/off, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(std::string_view key) const {
  std::vector<std::string> items;
  std::string_view rest = get(key);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    if (!item.empty()) items.emplace_back(item);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  return items;
}

std::vector<double> RunConfig::get_double_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError,
                  "key '" + std::string(key) + "' expects numbers, got '" + item + "'");
    }
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& k : keys_) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

}  // namespace sparsefoot
