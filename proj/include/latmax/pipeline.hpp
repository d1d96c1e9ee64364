#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "latmax/covariance.hpp"
#include "latmax/io.hpp"
#include "latmax/lattice.hpp"
#include "latmax/lookup.hpp"
#include "latmax/mcdlm.hpp"
#include "latmax/validate.hpp"

namespace latmax {

/// Subject volumes on a common lattice, optionally masked.
struct StudyData {
  std::vector<Field> subjects;
  std::optional<Mask> mask;

  void validate() const;
  const LatticeSpec& lattice() const { return subjects.front().lattice(); }
};

struct TMap {
  Field t;  // 0 outside the mask
  double nu = 0.0;
};

TMap one_sample_t(const StudyData& study);

// Subjects minus the cross-subject mean, divided by the voxelwise SD.
std::vector<Field> standardized_residuals(const StudyData& study);

enum class PeakMethod { mcdlm_t, mcdlm_gaussianized, lookup_if_isotropic, external_p };

std::string to_string(PeakMethod m);
PeakMethod peak_method_from_string(const std::string& s);

struct AnalyzeOptions {
  PeakMethod method = PeakMethod::mcdlm_t;
  BoundaryPolicy boundary = BoundaryPolicy::exclude;
  bool isotropic_pooling = false;
  SampleOptions sampling;  // target_n 0 means the covariance-dependent default
  const LookupTable* table = nullptr;
  // Axis correlations within this spread count as isotropic for the lookup path.
  double isotropy_tolerance = 0.02;
  std::map<std::size_t, double> external_p;  // flat voxel index -> p
  double alpha = 0.05;
};

struct AnalysisResult {
  std::vector<PeakRecord> peaks;
  std::vector<bool> censored;
  std::vector<double> adjusted;  // BH-adjusted p, aligned with peaks
  std::vector<bool> rejected;
  std::string method;            // label actually used for the p-values
  NeighborhoodCov cov;
  std::vector<double> axis_rho;
  double nu = 0.0;
};

AnalysisResult analyze_peaks(const StudyData& study, const Neighborhood& nbhd, const AnalyzeOptions& options);

// Rows: location, height, p-value per method, censored flag, BH-adjusted p, rejected.
CsvTable peak_table(const AnalysisResult& result);

// The covariance restricted to the center and the neighbors flagged present.
NeighborhoodCov restrict_cov(const NeighborhoodCov& cov, const std::vector<bool>& present);

// Which neighborhood offsets of a peak fall inside the lattice and mask.
std::vector<bool> present_neighbors(const PeakRecord& peak, const LatticeSpec& lattice, const Neighborhood& nbhd,
                                    const Mask* mask);

}  // namespace latmax
