#include "sgspde/snapshot.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sgspde/errors.hpp"

namespace sgspde {

const char* library_version() { return SGSPDE_VERSION; }

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_header(const SnapshotHeader& h) {
  std::ostringstream os;
  os << "sgspde-snapshot d=" << h.d << " N=" << h.n << " X=" << format_number(h.halfwidth)
     << " t=" << format_number(h.t) << " field=" << h.field << " config_hash=" << h.config_hash
     << " version=" << h.version << " format=f64le\n";
  return os.str();
}

void write_snapshot(const std::filesystem::path& file, const SnapshotHeader& h, const Eigen::VectorXd& values) {
  const Eigen::Index expected = h.d == 1 ? h.n : Eigen::Index(h.n) * h.n;
  if (values.size() != expected) throw ShapeError("snapshot size does not match the header grid");
  std::string bytes = format_header(h);
  const std::size_t offset = bytes.size();
  bytes.resize(offset + 8 * static_cast<std::size_t>(values.size()));
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[j]);
    for (int b = 0; b < 8; ++b) bytes[offset + 8 * j + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  write_text(file, bytes);
}

Snapshot read_snapshot(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + file.string());
  std::string line;
  std::getline(in, line);
  Snapshot s;
  std::istringstream words(line);
  std::string word;
  words >> word;
  if (word != "sgspde-snapshot") throw ArgumentError(file.string() + " is not a snapshot");
  while (words >> word) {
    const auto eq = word.find('=');
    if (eq != std::string::npos) s.meta[word.substr(0, eq)] = word.substr(eq + 1);
  }
  const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (payload.size() % 8) throw ShapeError("snapshot payload is not a whole number of f64 values");
  s.values.resize(static_cast<Eigen::Index>(payload.size() / 8));
  for (Eigen::Index j = 0; j < s.values.size(); ++j) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(static_cast<unsigned char>(payload[8 * j + b])) << (8 * b);
    s.values[j] = std::bit_cast<double>(bits);
  }
  return s;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw ShapeError("CSV row width does not match the columns");
  rows.push_back(std::move(row));
}

std::string CsvTable::render(const std::string& config_hash) const {
  std::ostringstream os;
  os << "# config_hash=" << config_hash << " version=" << library_version() << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
    os << "\n";
  }
  return os.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + file.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ArgumentError("write failed for " + file.string());
}

}  // namespace sgspde
