#include "latmax/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "latmax/errors.hpp"

namespace latmax {

KernelSpec KernelSpec::isotropic(double eta) { return {KernelKind::isotropic_gaussian, {eta}}; }

KernelSpec KernelSpec::elliptical(std::vector<double> etas) {
  return {KernelKind::elliptical_gaussian, std::move(etas)};
}

KernelSpec KernelSpec::continuous(std::vector<double> etas) {
  return {KernelKind::continuous_gaussian, std::move(etas)};
}

double KernelSpec::eta(std::size_t axis) const {
  if (etas.size() == 1) return etas[0];
  return etas.at(axis);
}

void KernelSpec::validate(std::size_t dim) const {
  if (etas.empty()) throw std::invalid_argument("kernel needs at least one bandwidth");
  if (kind == KernelKind::isotropic_gaussian && etas.size() != 1)
    throw std::invalid_argument("isotropic kernel takes exactly one bandwidth");
  if (kind != KernelKind::isotropic_gaussian && etas.size() != 1 && etas.size() != dim)
    throw std::invalid_argument("kernel bandwidth count does not match dimension");
  for (double e : etas)
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("kernel bandwidths must be > 0");
}

int kernel_window(double eta, double step) {
  return std::max(1, static_cast<int>(std::ceil(8.0 * eta / step)));
}

std::vector<double> kernel_weights(double eta, double step) {
  const int w = kernel_window(eta, step);
  std::vector<double> k(2 * w + 1);
  for (int j = -w; j <= w; ++j) {
    const double x = j * step / eta;
    k[j + w] = std::exp(-0.5 * x * x);
  }
  return k;
}

double discrete_axis_correlation(double eta, double step, int lag) {
  const int w = kernel_window(eta, step);
  const auto k = kernel_weights(eta, step);
  double num = 0.0;
  double den = 0.0;
  for (int j = -w; j <= w; ++j) {
    den += k[j + w] * k[j + w];
    const int jj = j - lag;
    if (jj >= -w && jj <= w) num += k[j + w] * k[jj + w];
  }
  if (!(den > 0.0) || !std::isfinite(den))
    throw NumericError("degenerate kernel weights (all zero within the truncation window)");
  return num / den;
}

double kernel_correlation(const KernelSpec& kernel, std::span<const double> steps,
                          std::span<const int> lag) {
  kernel.validate(steps.size());
  if (kernel.kind == KernelKind::continuous_gaussian) {
    double q = 0.0;
    for (std::size_t d = 0; d < steps.size(); ++d) {
      const double x = lag[d] * steps[d];
      const double e = kernel.eta(d);
      q += x * x / (2.0 * e * e);
    }
    return std::exp(-0.5 * q);
  }
  double r = 1.0;
  for (std::size_t d = 0; d < steps.size(); ++d)
    r *= discrete_axis_correlation(kernel.eta(d), steps[d], lag[d]);
  return r;
}

std::string to_string(CovProvenance p) {
  switch (p) {
    case CovProvenance::kronecker: return "kronecker";
    case CovProvenance::discrete_kernel: return "discrete_kernel";
    case CovProvenance::continuous_kernel: return "continuous_kernel";
    case CovProvenance::empirical: return "empirical";
    case CovProvenance::mixture: return "mixture";
  }
  return "unknown";
}

NeighborhoodCov::NeighborhoodCov(Neighborhood nbhd, Eigen::MatrixXd matrix, CovProvenance provenance)
    : nbhd_(std::move(nbhd)), matrix_(std::move(matrix)), provenance_(provenance) {
  const auto n = static_cast<Eigen::Index>(nbhd_.size() + 1);
  if (matrix_.rows() != n || matrix_.cols() != n)
    throw std::invalid_argument("covariance matrix size does not match neighborhood");
  if (!matrix_.allFinite()) throw std::invalid_argument("covariance matrix has non-finite entries");
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& m) {
  Eigen::VectorXd d = m.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) throw NumericError("covariance has a non-positive diagonal entry");
    d[i] = 1.0 / std::sqrt(d[i]);
  }
  Eigen::MatrixXd out = d.asDiagonal() * m * d.asDiagonal();
  out = 0.5 * (out + out.transpose());
  out.diagonal().setOnes();
  return out;
}

namespace {

// Position of each point {center, offsets...} as a D-vector.
std::vector<Offset> neighborhood_points(const Neighborhood& nbhd) {
  std::vector<Offset> pts;
  pts.emplace_back(nbhd.dim(), 0);
  for (const auto& a : nbhd.offsets()) pts.push_back(a);
  return pts;
}

}  // namespace

NeighborhoodCov kronecker_cov(double rho, std::size_t dim) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  if (dim == 0) throw std::invalid_argument("dimension must be >= 1");
  const double r4 = rho * rho * rho * rho;
  Eigen::Matrix3d a;
  a << 1.0, rho, r4, rho, 1.0, rho, r4, rho, 1.0;

  // Kronecker product built so that axis 0 is the least significant base-3
  // digit: full = A_{D-1} (x) ... (x) A_0.
  Eigen::MatrixXd full = Eigen::MatrixXd::Ones(1, 1);
  for (std::size_t i = 0; i < dim; ++i) {
    const Eigen::Index n = full.rows();
    Eigen::MatrixXd next(3 * n, 3 * n);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) next.block(p * n, q * n, n, n) = a(p, q) * full;
    full = std::move(next);
  }

  Neighborhood nbhd = build_neighborhood(NeighborhoodKind::full, dim);
  std::vector<std::size_t> slot;
  slot.push_back(canonical_center(dim));
  for (const auto& off : nbhd.offsets()) slot.push_back(canonical_index(off));
  const auto n = static_cast<Eigen::Index>(slot.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = full(static_cast<Eigen::Index>(slot[i]), static_cast<Eigen::Index>(slot[j]));
  return NeighborhoodCov(std::move(nbhd), std::move(m), CovProvenance::kronecker);
}

Eigen::MatrixXd full_canonical_matrix(const NeighborhoodCov& cov) {
  const auto& nbhd = cov.nbhd();
  const std::size_t dim = nbhd.dim();
  std::size_t slots = 1;
  for (std::size_t i = 0; i < dim; ++i) slots *= 3;
  if (nbhd.size() != slots - 1) throw std::invalid_argument("full_canonical_matrix needs a fully connected neighborhood");
  std::vector<std::size_t> slot;
  slot.push_back(canonical_center(dim));
  for (const auto& off : nbhd.offsets()) slot.push_back(canonical_index(off));
  Eigen::MatrixXd full(static_cast<Eigen::Index>(slots), static_cast<Eigen::Index>(slots));
  for (std::size_t i = 0; i < slot.size(); ++i)
    for (std::size_t j = 0; j < slot.size(); ++j)
      full(static_cast<Eigen::Index>(slot[i]), static_cast<Eigen::Index>(slot[j])) =
          cov.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return full;
}

NeighborhoodCov kernel_cov(const KernelSpec& kernel, const LatticeSpec& lattice,
                           const Neighborhood& nbhd) {
  if (nbhd.dim() != lattice.dim()) throw std::invalid_argument("neighborhood/lattice dimension mismatch");
  kernel.validate(lattice.dim());
  const auto pts = neighborhood_points(nbhd);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd m(n, n);
  Offset lag(nbhd.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      for (std::size_t d = 0; d < nbhd.dim(); ++d) lag[d] = pts[j][d] - pts[i][d];
      m(i, j) = m(j, i) = kernel_correlation(kernel, lattice.steps(), lag);
    }
  }
  const auto prov = kernel.kind == KernelKind::continuous_gaussian ? CovProvenance::continuous_kernel
                                                                  : CovProvenance::discrete_kernel;
  return NeighborhoodCov(nbhd, std::move(m), prov);
}

std::vector<Offset> pooled_lags(std::span<const int> lag, std::span<const double> steps, bool isotropic) {
  if (!isotropic) return {Offset(lag.begin(), lag.end())};
  const std::size_t dim = lag.size();
  double len2 = 0.0;
  for (std::size_t d = 0; d < dim; ++d) len2 += (lag[d] * steps[d]) * (lag[d] * steps[d]);
  std::vector<int> bound(dim);
  for (std::size_t d = 0; d < dim; ++d)
    bound[d] = static_cast<int>(std::floor(std::sqrt(len2) / steps[d] + 1e-9));
  std::vector<Offset> out;
  Offset cur(dim);
  for (std::size_t d = 0; d < dim; ++d) cur[d] = -bound[d];
  const double tol = 1e-9 * std::max(1.0, len2);
  for (;;) {
    double l2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) l2 += (cur[d] * steps[d]) * (cur[d] * steps[d]);
    if (std::abs(l2 - len2) <= tol) out.push_back(cur);
    std::size_t d = 0;
    for (; d < dim; ++d) {
      if (++cur[d] <= bound[d]) break;
      cur[d] = -bound[d];
    }
    if (d == dim) break;
  }
  return out;
}

namespace {

// Calls fn(x_flat, y_flat) for every voxel pair with y = x + lag inside the
// lattice (and mask).
template <typename Fn>
void for_each_lag_pair(const LatticeSpec& lat, std::span<const int> lag, const Mask* mask, Fn&& fn) {
  const std::size_t dim = lat.dim();
  std::vector<std::int64_t> lo(dim), hi(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    const auto size = static_cast<std::int64_t>(lat.sizes()[d]);
    lo[d] = std::max<std::int64_t>(0, -lag[d]);
    hi[d] = std::min<std::int64_t>(size, size - lag[d]);
    if (lo[d] >= hi[d]) return;
  }
  std::ptrdiff_t shift = 0;
  {
    std::ptrdiff_t stride = 1;
    for (std::size_t d = dim; d-- > 0;) {
      shift += lag[d] * stride;
      stride *= static_cast<std::ptrdiff_t>(lat.sizes()[d]);
    }
  }
  Coord c(lo.begin(), lo.end());
  for (;;) {
    const std::size_t x = lat.flat_index(c);
    const auto y = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(x) + shift);
    if (!mask || (mask->contains(x) && mask->contains(y))) fn(x, y);
    bool done = true;
    for (std::size_t d = dim; d-- > 0;) {
      if (++c[d] < hi[d]) {
        done = false;
        break;
      }
      c[d] = lo[d];
    }
    if (done) break;
  }
}

}  // namespace

std::size_t lag_pair_count(const LatticeSpec& lattice, std::span<const int> lag, bool isotropic,
                           const Mask* mask) {
  std::size_t count = 0;
  for (const auto& l : pooled_lags(lag, lattice.steps(), isotropic))
    for_each_lag_pair(lattice, l, mask, [&](std::size_t, std::size_t) { ++count; });
  return count;
}

NeighborhoodCov empirical_cov(std::span<const Field> fields, const Neighborhood& nbhd,
                              const EmpiricalCovOptions& options) {
  if (fields.size() < 2) throw std::invalid_argument("empirical_cov needs at least 2 fields");
  const LatticeSpec& lat = fields.front().lattice();
  for (const auto& f : fields)
    if (f.lattice() != lat) throw std::invalid_argument("fields are on different lattices");
  if (nbhd.dim() != lat.dim()) throw std::invalid_argument("neighborhood/lattice dimension mismatch");
  const Mask* mask = options.mask;
  if (mask && (mask->lattice != lat || mask->inside.size() != lat.num_voxels()))
    throw std::invalid_argument("mask lattice does not match fields");

  const std::size_t nv = lat.num_voxels();
  const std::size_t n = fields.size();
  std::vector<std::vector<double>> z(n);
  if (options.standardize) {
    std::vector<double> mean(nv, 0.0), sd(nv, 0.0);
    for (const auto& f : fields)
      for (std::size_t v = 0; v < nv; ++v) mean[v] += f[v];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (const auto& f : fields)
      for (std::size_t v = 0; v < nv; ++v) sd[v] += (f[v] - mean[v]) * (f[v] - mean[v]);
    for (std::size_t v = 0; v < nv; ++v) {
      sd[v] = std::sqrt(sd[v] / static_cast<double>(n - 1));
      if (!(sd[v] > 0.0) && (!mask || mask->contains(v)))
        throw NumericError("zero variance at voxel " + std::to_string(v) + " across fields");
    }
    for (std::size_t i = 0; i < n; ++i) {
      z[i].resize(nv);
      for (std::size_t v = 0; v < nv; ++v) z[i][v] = sd[v] > 0.0 ? (fields[i][v] - mean[v]) / sd[v] : 0.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) z[i] = fields[i].values();
  }

  const auto pts = neighborhood_points(nbhd);
  // Lag estimates keyed by the pooled-set representative so symmetric and
  // (for isotropy) equal-length lags share one estimate.
  std::map<Offset, double> cache;
  auto estimate = [&](const Offset& lag) {
    auto lags = pooled_lags(lag, lat.steps(), options.isotropic);
    if (!options.isotropic) {
      Offset neg(lag.size());
      for (std::size_t d = 0; d < lag.size(); ++d) neg[d] = -lag[d];
      if (neg < lag) lags = {neg};
    }
    const Offset key = lags.front();
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& l : lags) {
      std::vector<std::pair<std::size_t, std::size_t>> idx;
      for_each_lag_pair(lat, l, mask, [&](std::size_t x, std::size_t y) { idx.emplace_back(x, y); });
      pairs += idx.size();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& zi = z[i];
        double s = 0.0;
        for (const auto& [x, y] : idx) s += zi[x] * zi[y];
        sum += s;
      }
    }
    if (pairs == 0) throw NumericError("no voxel pairs available for a required lag");
    const double value = sum / (static_cast<double>(n) * static_cast<double>(pairs));
    cache.emplace(key, value);
    return value;
  };

  const auto k1 = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd m(k1, k1);
  Offset lag(nbhd.dim());
  for (Eigen::Index i = 0; i < k1; ++i) {
    for (Eigen::Index j = i; j < k1; ++j) {
      for (std::size_t d = 0; d < nbhd.dim(); ++d) lag[d] = pts[j][d] - pts[i][d];
      m(i, j) = m(j, i) = estimate(lag);
    }
  }
  return NeighborhoodCov(nbhd, standardize(m), CovProvenance::empirical);
}

NeighborhoodCov mixture_cov(const NeighborhoodCov& a, const NeighborhoodCov& b) {
  if (a.size() != b.size() || !(a.nbhd() == b.nbhd()))
    throw std::invalid_argument("mixture_cov: covariances have different neighborhoods");
  Eigen::MatrixXd m = 0.25 * (a.matrix() + b.matrix());
  return NeighborhoodCov(a.nbhd(), standardize(m), CovProvenance::mixture);
}

NeighborhoodCov psd_repair(const NeighborhoodCov& cov, double floor) {
  const Eigen::MatrixXd& m = cov.matrix();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("psd_repair: matrix is not symmetric");
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Eigen::VectorXd values = eig.eigenvalues();
  double max_clipped = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < floor) {
      max_clipped = std::max(max_clipped, floor - values[i]);
      values[i] = floor;
    }
  }
  if (max_clipped == 0.0) {
    NeighborhoodCov out(cov.nbhd(), std::move(sym), cov.provenance());
    if (cov.psd_repaired()) out.mark_repaired(cov.max_clipped());
    return out;
  }
  Eigen::MatrixXd rebuilt = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  NeighborhoodCov out(cov.nbhd(), standardize(rebuilt), cov.provenance());
  out.mark_repaired(max_clipped);
  return out;
}

std::vector<double> axis_lag1_correlations(const NeighborhoodCov& cov) {
  const auto& nbhd = cov.nbhd();
  std::vector<double> out(nbhd.dim(), std::nan(""));
  for (std::size_t j = 0; j < nbhd.size(); ++j) {
    const auto& a = nbhd.offsets()[j];
    int nonzero = 0;
    std::size_t axis = 0;
    for (std::size_t d = 0; d < a.size(); ++d)
      if (a[d] != 0) {
        ++nonzero;
        axis = d;
      }
    if (nonzero == 1 && a[axis] == 1) out[axis] = cov.matrix()(0, static_cast<Eigen::Index>(j + 1));
  }
  return out;
}

}  // namespace latmax
