#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "latmax/lattice.hpp"
#include "latmax/lookup.hpp"
#include "latmax/mcdlm.hpp"

namespace latmax {

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Single-line JSON header, newline, raw little-endian float64 payload.
void write_volume(const std::string& path, const Field& field);
Field read_volume(const std::string& path);

void write_samples(const std::string& path, const PeakSampleSet& set);
PeakSampleSet read_samples(const std::string& path);

void write_lookup(const std::string& path, const LookupTable& table);
LookupTable read_lookup(const std::string& path);

// True if the file starts with the given magic string in its JSON header.
std::string file_magic(const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws IoError if absent
  std::vector<double> numbers(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
std::string to_csv(const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

std::string matrix_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

}  // namespace latmax
