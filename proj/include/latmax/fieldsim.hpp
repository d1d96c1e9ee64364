#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latmax/covariance.hpp"
#include "latmax/lattice.hpp"

namespace latmax {

struct SimModel {
  enum class Kind { gaussian, student_t, nonseparable };
  Kind kind = Kind::gaussian;
  int nu = 0;                // t-fields only
  KernelSpec second_kernel;  // nonseparable only

  static SimModel gaussian() { return {}; }
  static SimModel student_t(int nu);
  // Average of a field smoothed with the spec's kernel and one smoothed with
  // `other`, rescaled to unit variance.
  static SimModel nonseparable(KernelSpec other);
  // Convenience: the two kernels are elliptical with swapped bandwidths.
  static SimModel swapped(const KernelSpec& first);
};

struct SimSpec {
  LatticeSpec lattice;
  KernelSpec kernel;
  SimModel model;
  std::size_t n_fields = 1;
  std::uint64_t seed = 0;

  void validate() const;
  // ceil(4 eta_max) voxels per side, the nominal padding of the target grid.
  std::size_t nominal_padding() const;
};

// White noise value at a global lattice coordinate. Coordinates may be
// negative (padding); each axis must stay within +/- 2^20.
double lattice_noise(std::uint64_t seed, std::uint64_t field, std::uint32_t substream,
                     std::span<const std::int64_t> coord);

// Smoothed unit-variance Gaussian field; padding counts extra voxels per side
// beyond the target region (at least the kernel window is always used).
Field smooth_noise(const LatticeSpec& lattice, const KernelSpec& kernel, std::uint64_t seed,
                   std::uint64_t field, std::uint32_t substream, std::size_t padding = 0);

// Field number `index` of the ensemble, for any model.
Field simulate_field(const SimSpec& spec, std::size_t index);

/// Lazily generated ensemble; holds at most one output field at a time.
class FieldStream {
 public:
  explicit FieldStream(SimSpec spec);
  bool next(Field& out);
  std::size_t position() const { return next_; }
  const SimSpec& spec() const { return spec_; }

 private:
  SimSpec spec_;
  std::size_t next_ = 0;
};

std::vector<Field> simulate_gaussian(const SimSpec& spec);
std::vector<Field> simulate_t(const SimSpec& spec);
std::vector<Field> simulate_nonseparable(const SimSpec& spec);

/// Pooled peak heights of an ensemble. The reference p-value of height g is
/// the fraction of pooled heights strictly above g.
class ReferenceDistribution {
 public:
  explicit ReferenceDistribution(std::vector<double> heights);

  const std::vector<double>& heights() const { return heights_; }  // ascending
  std::size_t size() const { return heights_.size(); }
  double pvalue(double g) const;
  std::vector<double> pvalues() const;  // aligned with heights()

 private:
  std::vector<double> heights_;
};

ReferenceDistribution reference_distribution(std::span<const Field> fields, const Neighborhood& nbhd,
                                             BoundaryPolicy policy = BoundaryPolicy::exclude);

// Generates the ensemble on `threads` workers and pools its peaks without
// keeping fields in memory. Independent of the thread count.
ReferenceDistribution reference_distribution(const SimSpec& spec, const Neighborhood& nbhd,
                                             BoundaryPolicy policy = BoundaryPolicy::exclude,
                                             unsigned threads = 0);

}  // namespace latmax
