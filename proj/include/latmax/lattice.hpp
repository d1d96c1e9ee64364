#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace latmax {

using Offset = std::vector<int>;
using Coord = std::vector<std::int64_t>;

/// Geometry of a regular D-dimensional lattice. Storage of any field on it is
/// row-major with the last axis varying fastest.
class LatticeSpec {
 public:
  LatticeSpec() = default;
  LatticeSpec(std::vector<std::size_t> sizes, std::vector<double> steps = {});

  std::size_t dim() const { return sizes_.size(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<double>& steps() const { return steps_; }
  std::size_t num_voxels() const;

  std::size_t flat_index(std::span<const std::int64_t> coord) const;
  Coord coord_of(std::size_t flat) const;
  bool contains(std::span<const std::int64_t> coord) const;

  friend bool operator==(const LatticeSpec&, const LatticeSpec&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> steps_;
};

enum class NeighborhoodKind { partial, full, custom };

std::string to_string(NeighborhoodKind kind);
NeighborhoodKind neighborhood_kind_from_string(const std::string& name);

// Base-3 slot of an offset in the 3^D hypercube: sum_i 3^i (a_i + 1), axis 0
// least significant. The center is slot (3^D - 1) / 2.
std::size_t canonical_index(std::span<const int> offset);
Offset offset_from_canonical(std::size_t index, std::size_t dim);
std::size_t canonical_center(std::size_t dim);

/// Neighbor displacements around a center voxel, kept in canonical order.
class Neighborhood {
 public:
  Neighborhood(NeighborhoodKind kind, std::size_t dim, std::vector<Offset> offsets);

  NeighborhoodKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return offsets_.size(); }
  const std::vector<Offset>& offsets() const { return offsets_; }

  friend bool operator==(const Neighborhood&, const Neighborhood&) = default;

 private:
  NeighborhoodKind kind_;
  std::size_t dim_;
  std::vector<Offset> offsets_;
};

Neighborhood build_neighborhood(NeighborhoodKind kind, std::size_t dim);
Neighborhood custom_neighborhood(std::size_t dim, std::vector<Offset> offsets);

/// Real values on a lattice. All values are finite.
class Field {
 public:
  Field() = default;
  Field(LatticeSpec lattice, std::vector<double> values);

  const LatticeSpec& lattice() const { return lattice_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  LatticeSpec lattice_;
  std::vector<double> values_;
};

/// Boolean inclusion mask on a lattice (nonzero = inside).
struct Mask {
  LatticeSpec lattice;
  std::vector<std::uint8_t> inside;

  bool contains(std::size_t flat) const { return inside[flat] != 0; }
};

enum class BoundaryPolicy { exclude, reduced };

struct PeakRecord {
  Coord location;
  std::size_t flat_index = 0;
  double height = 0.0;
  NeighborhoodKind kind = NeighborhoodKind::full;
  bool boundary = false;
  // Number of in-lattice neighbors along each axis among the axis-aligned
  // pair s +/- e_d; used by the boundary variants of the analytic density.
  std::vector<int> axis_neighbors;
  std::map<std::string, double> pvalues;

  void set_pvalue(const std::string& method, double p);
};

// Every voxel strictly above all of its in-lattice (and in-mask) neighbors.
// Under `exclude`, voxels with any neighbor outside the lattice or mask are
// skipped; under `reduced` they are compared with the neighbors that remain.
std::vector<PeakRecord> find_peaks(const Field& field, const Neighborhood& nbhd,
                                   BoundaryPolicy policy = BoundaryPolicy::exclude,
                                   const Mask* mask = nullptr);

double fwhm_to_rho(double fwhm);
double rho_to_fwhm(double rho);
double fwhm_to_eta(double fwhm);
double eta_to_fwhm(double eta);
// Kernel standard deviation giving adjacent-voxel correlation rho for a
// continuous Gaussian kernel at lattice step `step`.
double rho_to_eta(double rho, double step = 1.0);

}  // namespace latmax
