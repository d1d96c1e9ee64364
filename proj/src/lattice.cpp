#include "latmax/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace latmax {

namespace {

const double kFwhmPerEta = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

std::size_t pow3(std::size_t dim) {
  std::size_t p = 1;
  for (std::size_t i = 0; i < dim; ++i) p *= 3;
  return p;
}

}  // namespace

LatticeSpec::LatticeSpec(std::vector<std::size_t> sizes, std::vector<double> steps)
    : sizes_(std::move(sizes)), steps_(std::move(steps)) {
  if (sizes_.empty()) throw std::invalid_argument("lattice dimension must be >= 1");
  if (steps_.empty()) steps_.assign(sizes_.size(), 1.0);
  if (steps_.size() != sizes_.size())
    throw std::invalid_argument("lattice steps and sizes differ in length");
  for (auto s : sizes_)
    if (s == 0) throw std::invalid_argument("lattice sizes must be >= 1");
  for (auto v : steps_)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("lattice steps must be > 0");
}

std::size_t LatticeSpec::num_voxels() const {
  std::size_t n = 1;
  for (auto s : sizes_) n *= s;
  return n;
}

std::size_t LatticeSpec::flat_index(std::span<const std::int64_t> coord) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < sizes_.size(); ++d)
    flat = flat * sizes_[d] + static_cast<std::size_t>(coord[d]);
  return flat;
}

Coord LatticeSpec::coord_of(std::size_t flat) const {
  Coord c(sizes_.size());
  for (std::size_t d = sizes_.size(); d-- > 0;) {
    c[d] = static_cast<std::int64_t>(flat % sizes_[d]);
    flat /= sizes_[d];
  }
  return c;
}

bool LatticeSpec::contains(std::span<const std::int64_t> coord) const {
  for (std::size_t d = 0; d < sizes_.size(); ++d)
    if (coord[d] < 0 || coord[d] >= static_cast<std::int64_t>(sizes_[d])) return false;
  return true;
}

std::string to_string(NeighborhoodKind kind) {
  switch (kind) {
    case NeighborhoodKind::partial: return "pc";
    case NeighborhoodKind::full: return "fc";
    case NeighborhoodKind::custom: return "custom";
  }
  return "custom";
}

NeighborhoodKind neighborhood_kind_from_string(const std::string& name) {
  if (name == "pc" || name == "partial") return NeighborhoodKind::partial;
  if (name == "fc" || name == "full") return NeighborhoodKind::full;
  if (name == "custom") return NeighborhoodKind::custom;
  throw std::invalid_argument("unknown neighborhood kind: " + name);
}

std::size_t canonical_index(std::span<const int> offset) {
  std::size_t index = 0;
  std::size_t place = 1;
  for (int a : offset) {
    index += place * static_cast<std::size_t>(a + 1);
    place *= 3;
  }
  return index;
}

Offset offset_from_canonical(std::size_t index, std::size_t dim) {
  Offset a(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    a[i] = static_cast<int>(index % 3) - 1;
    index /= 3;
  }
  return a;
}

std::size_t canonical_center(std::size_t dim) { return (pow3(dim) - 1) / 2; }

Neighborhood::Neighborhood(NeighborhoodKind kind, std::size_t dim, std::vector<Offset> offsets)
    : kind_(kind), dim_(dim), offsets_(std::move(offsets)) {
  if (dim_ == 0) throw std::invalid_argument("neighborhood dimension must be >= 1");
  std::set<std::size_t> seen;
  for (const auto& a : offsets_) {
    if (a.size() != dim_) throw std::invalid_argument("offset has wrong dimension");
    bool zero = true;
    for (int v : a) {
      if (v < -1 || v > 1) throw std::invalid_argument("offset entries must be in {-1,0,1}");
      zero = zero && v == 0;
    }
    if (zero) throw std::invalid_argument("offsets must exclude the zero vector");
    if (!seen.insert(canonical_index(a)).second)
      throw std::invalid_argument("duplicate neighborhood offset");
  }
  std::sort(offsets_.begin(), offsets_.end(), [](const Offset& x, const Offset& y) {
    return canonical_index(x) < canonical_index(y);
  });
}

Neighborhood build_neighborhood(NeighborhoodKind kind, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("neighborhood dimension must be >= 1");
  std::vector<Offset> offsets;
  const std::size_t slots = pow3(dim);
  const std::size_t center = canonical_center(dim);
  for (std::size_t m = 0; m < slots; ++m) {
    if (m == center) continue;
    Offset a = offset_from_canonical(m, dim);
    int nonzero = 0;
    for (int v : a) nonzero += v != 0;
    if (kind == NeighborhoodKind::full || (kind == NeighborhoodKind::partial && nonzero == 1))
      offsets.push_back(std::move(a));
  }
  if (kind == NeighborhoodKind::custom)
    throw std::invalid_argument("custom neighborhoods need explicit offsets");
  return Neighborhood(kind, dim, std::move(offsets));
}

Neighborhood custom_neighborhood(std::size_t dim, std::vector<Offset> offsets) {
  return Neighborhood(NeighborhoodKind::custom, dim, std::move(offsets));
}

Field::Field(LatticeSpec lattice, std::vector<double> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (values_.size() != lattice_.num_voxels())
    throw std::invalid_argument("field length does not match lattice");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("field contains non-finite values");
}

void PeakRecord::set_pvalue(const std::string& method, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p-value outside [0,1]");
  pvalues[method] = p;
}

std::vector<PeakRecord> find_peaks(const Field& field, const Neighborhood& nbhd,
                                   BoundaryPolicy policy, const Mask* mask) {
  const LatticeSpec& lat = field.lattice();
  if (field.size() == 0) throw std::invalid_argument("empty field");
  if (nbhd.dim() != lat.dim()) throw std::invalid_argument("neighborhood/lattice dimension mismatch");
  if (mask && (mask->lattice != lat || mask->inside.size() != lat.num_voxels()))
    throw std::invalid_argument("mask lattice does not match field");

  const std::size_t dim = lat.dim();
  const auto& offsets = nbhd.offsets();
  std::vector<std::ptrdiff_t> stride(dim);
  {
    std::ptrdiff_t s = 1;
    for (std::size_t d = dim; d-- > 0;) {
      stride[d] = s;
      s *= static_cast<std::ptrdiff_t>(lat.sizes()[d]);
    }
  }
  std::vector<std::ptrdiff_t> delta(offsets.size(), 0);
  for (std::size_t j = 0; j < offsets.size(); ++j)
    for (std::size_t d = 0; d < dim; ++d) delta[j] += offsets[j][d] * stride[d];

  std::vector<PeakRecord> peaks;
  const auto& v = field.values();
  Coord c(dim, 0);
  for (std::size_t flat = 0; flat < v.size(); ++flat) {
    if (flat > 0) {
      for (std::size_t d = dim; d-- > 0;) {
        if (++c[d] < static_cast<std::int64_t>(lat.sizes()[d])) break;
        c[d] = 0;
      }
    }
    if (mask && !mask->contains(flat)) continue;
    const double center = v[flat];
    bool boundary = false;
    bool is_max = true;
    for (std::size_t j = 0; j < offsets.size() && is_max; ++j) {
      bool inside = true;
      for (std::size_t d = 0; d < dim; ++d) {
        const std::int64_t x = c[d] + offsets[j][d];
        if (x < 0 || x >= static_cast<std::int64_t>(lat.sizes()[d])) {
          inside = false;
          break;
        }
      }
      const std::size_t nb = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(flat) + delta[j]);
      if (inside && mask && !mask->contains(nb)) inside = false;
      if (!inside) {
        boundary = true;
        if (policy == BoundaryPolicy::exclude) is_max = false;
        continue;
      }
      if (!(center > v[nb])) is_max = false;
    }
    if (!is_max) continue;

    PeakRecord rec;
    rec.location = c;
    rec.flat_index = flat;
    rec.height = center;
    rec.kind = nbhd.kind();
    rec.boundary = boundary;
    rec.axis_neighbors.assign(dim, 0);
    for (std::size_t d = 0; d < dim; ++d) {
      for (int sign : {-1, 1}) {
        const std::int64_t x = c[d] + sign;
        if (x < 0 || x >= static_cast<std::int64_t>(lat.sizes()[d])) continue;
        const std::size_t nb = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(flat) + sign * stride[d]);
        if (mask && !mask->contains(nb)) continue;
        ++rec.axis_neighbors[d];
      }
    }
    peaks.push_back(std::move(rec));
  }
  return peaks;
}

double fwhm_to_eta(double fwhm) {
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw std::invalid_argument("fwhm must be > 0");
  return fwhm / kFwhmPerEta;
}

double eta_to_fwhm(double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be > 0");
  return eta * kFwhmPerEta;
}

double rho_to_eta(double rho, double step) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  return step / (2.0 * std::sqrt(-std::log(rho)));
}

double fwhm_to_rho(double fwhm) {
  const double eta = fwhm_to_eta(fwhm);
  return std::exp(-1.0 / (4.0 * eta * eta));
}

double rho_to_fwhm(double rho) { return eta_to_fwhm(rho_to_eta(rho)); }

}  // namespace latmax
