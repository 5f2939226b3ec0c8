#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sgspde/grid.hpp"

namespace sgspde {

const char* library_version();

// %.17g, locale independent.
std::string format_number(double v);

struct SnapshotHeader {
  int d = 1;
  int n = 0;
  double halfwidth = 0;
  double t = 0;
  std::string field;  // u, mean, variance
  std::string config_hash;
  std::string version = library_version();
};

// One text line of key=value pairs terminated by '\n'.
std::string format_header(const SnapshotHeader& h);

// Header line followed by little-endian f64 values in row-major grid order.
void write_snapshot(const std::filesystem::path& file, const SnapshotHeader& h, const Eigen::VectorXd& values);

struct Snapshot {
  std::map<std::string, std::string> meta;
  Eigen::VectorXd values;
};
Snapshot read_snapshot(const std::filesystem::path& file);

// Comma-separated table whose first line is "# config_hash=... version=...".
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string render(const std::string& config_hash) const;
};
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace sgspde
