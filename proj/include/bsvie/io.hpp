#pragma once

// Columnar binary container: 8-byte magic, u64 header length, JSON header,
// then little-endian float64 columns in header order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace bsvie {

using json = nlohmann::json;

struct Column {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> data;
};

struct ColumnarFile {
  json header;
  std::map<std::string, std::vector<double>> columns;
  std::map<std::string, std::vector<std::size_t>> shapes;
};

inline constexpr char kColumnarMagic[8] = {'B', 'S', 'V', 'I', 'E', 'C', 'O', 'L'};

inline void write_columnar(const std::string& path, json header, const std::vector<Column>& cols) {
  json desc = json::array();
  std::uint64_t offset = 0;
  for (const auto& c : cols) {
    desc.push_back({{"name", c.name}, {"shape", c.shape}, {"dtype", "float64"}, {"offset", offset}});
    offset += c.data.size() * sizeof(double);
  }
  header["columns"] = desc;
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(kColumnarMagic, 8);
  const std::uint64_t len = h.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& c : cols)
    out.write(reinterpret_cast<const char*>(c.data.data()), static_cast<std::streamsize>(c.data.size() * sizeof(double)));
  if (!out) fail(ErrorCode::IoError, "short write to '" + path + "'");
}

inline ColumnarFile read_columnar(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kColumnarMagic, 8) != 0) fail(ErrorCode::IoError, "'" + path + "' is not a columnar file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string h(len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(len));
  ColumnarFile f;
  f.header = json::parse(h);
  for (const auto& c : f.header.at("columns")) {
    std::vector<std::size_t> shape = c.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (auto s : shape) count *= s;
    std::vector<double> v(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) fail(ErrorCode::IoError, "truncated column '" + c.at("name").get<std::string>() + "'");
    const std::string name = c.at("name");
    f.shapes[name] = shape;
    f.columns[name] = std::move(v);
  }
  return f;
}

// Writes a CSV with a leading config_hash column on every row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::string hash, const std::vector<std::string>& cols)
      : out_(path), hash_(std::move(hash)) {
    if (!out_) fail(ErrorCode::IoError, "cannot write '" + path + "'");
    out_ << "config_hash";
    for (const auto& c : cols) out_ << "," << c;
    out_ << "\n";
  }
  template <class... Ts>
  void row(const Ts&... vals) {
    out_ << hash_;
    ((out_ << "," << cell(vals)), ...);
    out_ << "\n";
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  std::ofstream out_;
  std::string hash_;
};

}  // namespace bsvie
