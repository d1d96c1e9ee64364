#include "latmax/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latmax/errors.hpp"
#include "latmax/special.hpp"

namespace latmax {

void StudyData::validate() const {
  if (subjects.size() < 2) throw std::invalid_argument("a study needs at least 2 subjects");
  const LatticeSpec& lat = subjects.front().lattice();
  for (const auto& s : subjects)
    if (s.lattice() != lat) throw std::invalid_argument("subjects are on different lattices");
  if (mask && (mask->lattice != lat || mask->inside.size() != lat.num_voxels()))
    throw std::invalid_argument("mask lattice does not match the subjects");
}

TMap one_sample_t(const StudyData& study) {
  study.validate();
  const std::size_t n = study.subjects.size();
  const std::size_t nv = study.lattice().num_voxels();
  std::vector<double> t(nv, 0.0);
  for (std::size_t v = 0; v < nv; ++v) {
    if (study.mask && !study.mask->contains(v)) continue;
    double mean = 0.0;
    for (const auto& s : study.subjects) mean += s[v];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : study.subjects) ss += (s[v] - mean) * (s[v] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw NumericError("zero variance across subjects at voxel " + std::to_string(v));
    t[v] = mean * std::sqrt(static_cast<double>(n)) / sd;
  }
  return {Field(study.lattice(), std::move(t)), static_cast<double>(n - 1)};
}

std::vector<Field> standardized_residuals(const StudyData& study) {
  study.validate();
  const std::size_t n = study.subjects.size();
  const std::size_t nv = study.lattice().num_voxels();
  std::vector<std::vector<double>> r(n, std::vector<double>(nv, 0.0));
  for (std::size_t v = 0; v < nv; ++v) {
    if (study.mask && !study.mask->contains(v)) continue;
    double mean = 0.0;
    for (const auto& s : study.subjects) mean += s[v];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : study.subjects) ss += (s[v] - mean) * (s[v] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw NumericError("zero variance across subjects at voxel " + std::to_string(v));
    for (std::size_t i = 0; i < n; ++i) r[i][v] = (study.subjects[i][v] - mean) / sd;
  }
  std::vector<Field> out;
  out.reserve(n);
  for (auto& v : r) out.emplace_back(study.lattice(), std::move(v));
  return out;
}

std::string to_string(PeakMethod m) {
  switch (m) {
    case PeakMethod::mcdlm_t: return "mcdlm_t";
    case PeakMethod::mcdlm_gaussianized: return "mcdlm_gaussianized";
    case PeakMethod::lookup_if_isotropic: return "lookup";
    case PeakMethod::external_p: return "external";
  }
  return "unknown";
}

PeakMethod peak_method_from_string(const std::string& s) {
  if (s == "mcdlm_t" || s == "t") return PeakMethod::mcdlm_t;
  if (s == "mcdlm_gaussianized" || s == "gaussianized") return PeakMethod::mcdlm_gaussianized;
  if (s == "lookup") return PeakMethod::lookup_if_isotropic;
  if (s == "external") return PeakMethod::external_p;
  throw std::invalid_argument("unknown method: " + s);
}

NeighborhoodCov restrict_cov(const NeighborhoodCov& cov, const std::vector<bool>& present) {
  const auto& nb = cov.nbhd();
  if (present.size() != nb.size()) throw std::invalid_argument("presence flags do not match the neighborhood");
  std::vector<Offset> offsets;
  std::vector<Eigen::Index> keep{0};
  for (std::size_t j = 0; j < nb.size(); ++j)
    if (present[j]) {
      offsets.push_back(nb.offsets()[j]);
      keep.push_back(static_cast<Eigen::Index>(j + 1));
    }
  if (offsets.size() == nb.size()) return cov;
  const auto k = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) m(i, j) = cov.matrix()(keep[i], keep[j]);
  NeighborhoodCov out(custom_neighborhood(nb.dim(), std::move(offsets)), std::move(m), cov.provenance());
  if (cov.psd_repaired()) out.mark_repaired(cov.max_clipped());
  return out;
}

std::vector<bool> present_neighbors(const PeakRecord& peak, const LatticeSpec& lattice, const Neighborhood& nbhd,
                                    const Mask* mask) {
  std::vector<bool> present(nbhd.size(), true);
  Coord c(lattice.dim());
  for (std::size_t j = 0; j < nbhd.size(); ++j) {
    for (std::size_t d = 0; d < lattice.dim(); ++d) c[d] = peak.location[d] + nbhd.offsets()[j][d];
    present[j] = lattice.contains(c) && (!mask || mask->contains(lattice.flat_index(c)));
  }
  return present;
}

namespace {

std::string presence_key(const std::vector<bool>& present) {
  std::string k;
  for (bool b : present) k += b ? '1' : '0';
  return k;
}

SampleOptions sampling_for(const NeighborhoodCov& cov, SampleOptions o) {
  if (o.target_n == 0) o.target_n = default_target_n(cov);
  o.max_m = std::max(o.max_m, o.target_n);
  return o;
}

}  // namespace

AnalysisResult analyze_peaks(const StudyData& study, const Neighborhood& nbhd, const AnalyzeOptions& options) {
  study.validate();
  if (nbhd.dim() != study.lattice().dim()) throw std::invalid_argument("neighborhood/lattice dimension mismatch");
  const Mask* mask = study.mask ? &*study.mask : nullptr;

  const TMap tmap = one_sample_t(study);
  const auto residuals = standardized_residuals(study);
  EmpiricalCovOptions eo;
  eo.isotropic = options.isotropic_pooling;
  eo.standardize = false;
  eo.mask = mask;
  const NeighborhoodCov cov = psd_repair(empirical_cov(residuals, nbhd, eo));

  AnalysisResult res{{}, {}, {}, {}, "", cov, axis_lag1_correlations(cov), tmap.nu};
  res.peaks = find_peaks(tmap.t, nbhd, options.boundary, mask);
  if (res.peaks.empty()) throw NumericError("no peaks in the t map");
  res.censored.assign(res.peaks.size(), false);

  PeakMethod method = options.method;
  std::vector<double> rho_axes = res.axis_rho;
  if (method == PeakMethod::lookup_if_isotropic) {
    const LookupTable* table = options.table;
    bool usable = table && table->dim == nbhd.dim() && nbhd.kind() == NeighborhoodKind::full;
    double rho = 0.0;
    if (usable) {
      const auto [lo, hi] = std::minmax_element(rho_axes.begin(), rho_axes.end());
      usable = std::isfinite(*lo) && std::isfinite(*hi) && *hi - *lo <= options.isotropy_tolerance;
      for (double r : rho_axes) rho += r / static_cast<double>(rho_axes.size());
      usable = usable && rho >= table->rhos.front() && rho <= table->rhos.back();
    }
    if (usable) {
      res.method = "lookup";
      for (std::size_t i = 0; i < res.peaks.size(); ++i) {
        auto& p = res.peaks[i];
        const LookupResult q = query(*table, rho, gaussianize_t(p.height, tmap.nu));
        p.set_pvalue(res.method, q.pvalue);
        res.censored[i] = q.censored;
      }
    } else {
      method = PeakMethod::mcdlm_gaussianized;
    }
  }

  if (method == PeakMethod::external_p) {
    res.method = "external";
    for (auto& p : res.peaks) {
      const auto it = options.external_p.find(p.flat_index);
      if (it == options.external_p.end())
        throw std::invalid_argument("no external p-value for the peak at voxel " + std::to_string(p.flat_index));
      p.set_pvalue(res.method, it->second);
    }
  } else if (method == PeakMethod::mcdlm_t || method == PeakMethod::mcdlm_gaussianized) {
    const bool t_model = method == PeakMethod::mcdlm_t;
    res.method = to_string(method);
    const PeakModel model = t_model ? PeakModel::student_t(tmap.nu) : PeakModel::gaussian();
    std::map<std::string, PeakSampleSet> sets;
    for (std::size_t i = 0; i < res.peaks.size(); ++i) {
      auto& p = res.peaks[i];
      const auto present = present_neighbors(p, study.lattice(), nbhd, mask);
      const std::string key = presence_key(present);
      auto it = sets.find(key);
      if (it == sets.end()) {
        const NeighborhoodCov sub = restrict_cov(cov, present);
        it = sets.emplace(key, sample_local_maxima(sub, model, sampling_for(sub, options.sampling))).first;
      }
      const double h = t_model ? p.height : gaussianize_t(p.height, tmap.nu);
      const PValue pv = peak_pvalue(it->second, h);
      p.set_pvalue(res.method, pv.value);
      res.censored[i] = pv.censored;
    }
  }

  std::vector<double> ps;
  for (const auto& p : res.peaks) ps.push_back(p.pvalues.at(res.method));
  const BHResult bh = bh_adjust(ps, options.alpha);
  res.adjusted = bh.adjusted;
  res.rejected = bh.rejected;
  return res;
}

CsvTable peak_table(const AnalysisResult& result) {
  CsvTable t;
  const std::size_t dim = result.peaks.empty() ? 0 : result.peaks.front().location.size();
  for (std::size_t d = 0; d < dim; ++d) t.header.push_back("x" + std::to_string(d));
  t.header.push_back("height");
  std::vector<std::string> methods;
  for (const auto& p : result.peaks)
    for (const auto& [m, v] : p.pvalues)
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
  for (const auto& m : methods) t.header.push_back("p_" + m);
  t.header.insert(t.header.end(), {"censored", "boundary", "p_bh", "rejected"});
  for (std::size_t i = 0; i < result.peaks.size(); ++i) {
    const auto& p = result.peaks[i];
    std::vector<std::string> row;
    for (auto c : p.location) row.push_back(std::to_string(c));
    row.push_back(format_double(p.height));
    for (const auto& m : methods) {
      const auto it = p.pvalues.find(m);
      row.push_back(it == p.pvalues.end() ? "" : format_double(it->second));
    }
    row.push_back(i < result.censored.size() && result.censored[i] ? "1" : "0");
    row.push_back(p.boundary ? "1" : "0");
    row.push_back(i < result.adjusted.size() ? format_double(result.adjusted[i]) : "");
    row.push_back(i < result.rejected.size() && result.rejected[i] ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace latmax
