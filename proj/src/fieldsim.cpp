#include "latmax/fieldsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "latmax/errors.hpp"
#include "latmax/rng.hpp"

namespace latmax {

namespace {

constexpr std::int64_t kCoordOffset = std::int64_t{1} << 20;

double unit_from(std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t x = (std::uint64_t{hi} << 32) | lo;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// 1D correlation along the remaining axes of a row-major block:
// out[o, i, r] = sum_j w[j] in[o, i + j, r].
std::vector<double> convolve_axis(const std::vector<double>& in, std::size_t outer, std::size_t len_in,
                                  std::size_t inner, const std::vector<double>& w) {
  const std::size_t taps = w.size();
  const std::size_t len_out = len_in - taps + 1;
  std::vector<double> out(outer * len_out * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < len_out; ++i) {
      double* dst = &out[(o * len_out + i) * inner];
      for (std::size_t j = 0; j < taps; ++j) {
        const double wj = w[j];
        const double* src = &in[(o * len_in + i + j) * inner];
        for (std::size_t r = 0; r < inner; ++r) dst[r] += wj * src[r];
      }
    }
  return out;
}

}  // namespace

SimModel SimModel::student_t(int nu) {
  if (nu < 1) throw std::invalid_argument("t-field degrees of freedom must be >= 1");
  SimModel m;
  m.kind = Kind::student_t;
  m.nu = nu;
  return m;
}

SimModel SimModel::nonseparable(KernelSpec other) {
  SimModel m;
  m.kind = Kind::nonseparable;
  m.second_kernel = std::move(other);
  return m;
}

SimModel SimModel::swapped(const KernelSpec& first) {
  if (first.etas.size() != 2) throw std::invalid_argument("swapped kernels need two bandwidths");
  return nonseparable(KernelSpec::elliptical({first.etas[1], first.etas[0]}));
}

void SimSpec::validate() const {
  const std::size_t dim = lattice.dim();
  if (dim == 0 || dim > 3) throw std::invalid_argument("simulation supports 1 to 3 dimensions");
  if (n_fields < 1) throw std::invalid_argument("n_fields must be >= 1");
  kernel.validate(dim);
  for (auto s : lattice.sizes())
    if (s > static_cast<std::size_t>(kCoordOffset / 2)) throw std::invalid_argument("lattice too large to simulate");
  if (model.kind == SimModel::Kind::student_t && model.nu < 1)
    throw std::invalid_argument("t-field degrees of freedom must be >= 1");
  if (model.kind == SimModel::Kind::nonseparable) {
    if (dim != 2) throw std::invalid_argument("nonseparable mixtures are defined on 2D lattices");
    model.second_kernel.validate(dim);
  }
}

std::size_t SimSpec::nominal_padding() const {
  double eta = 0.0;
  for (std::size_t d = 0; d < lattice.dim(); ++d) eta = std::max(eta, kernel.eta(d) / lattice.steps()[d]);
  if (model.kind == SimModel::Kind::nonseparable)
    for (std::size_t d = 0; d < lattice.dim(); ++d)
      eta = std::max(eta, model.second_kernel.eta(d) / lattice.steps()[d]);
  return static_cast<std::size_t>(std::ceil(4.0 * eta));
}

double lattice_noise(std::uint64_t seed, std::uint64_t field, std::uint32_t substream,
                     std::span<const std::int64_t> coord) {
  if (coord.size() > 3) throw std::invalid_argument("noise addressing supports at most 3 axes");
  if (field > 0xffffffffull) throw std::invalid_argument("field index exceeds 32 bits");
  std::uint64_t packed = 0;
  for (std::size_t d = 0; d < coord.size(); ++d) {
    const std::int64_t c = coord[d] + kCoordOffset;
    if (c < 0 || c >= 2 * kCoordOffset) throw std::invalid_argument("coordinate out of noise range");
    packed |= static_cast<std::uint64_t>(c) << (21 * d);
  }
  const PhiloxCounter ctr{static_cast<std::uint32_t>(packed), static_cast<std::uint32_t>(packed >> 32),
                          static_cast<std::uint32_t>(field), substream};
  const auto r = philox4x32(ctr, key_from_seed(seed));
  const double u1 = unit_from(r[0], r[1]);
  const double u2 = unit_from(r[2], r[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Field smooth_noise(const LatticeSpec& lattice, const KernelSpec& kernel, std::uint64_t seed,
                   std::uint64_t field, std::uint32_t substream, std::size_t padding) {
  const std::size_t dim = lattice.dim();
  kernel.validate(dim);
  std::vector<std::vector<double>> weights(dim);
  std::vector<std::int64_t> pad(dim);
  double norm2 = 1.0;
  for (std::size_t d = 0; d < dim; ++d) {
    weights[d] = kernel_weights(kernel.eta(d), lattice.steps()[d]);
    const auto w = static_cast<std::int64_t>(weights[d].size() / 2);
    // Voxels past the window never enter the sum, so extra padding is inert.
    pad[d] = std::max<std::int64_t>(w, static_cast<std::int64_t>(padding));
    double s = 0.0;
    for (double x : weights[d]) s += x * x;
    norm2 *= s;
  }

  // Noise on the padded box [-pad, n + pad), keyed by global coordinate.
  std::vector<std::size_t> ext(dim);
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) {
    ext[d] = lattice.sizes()[d] + 2 * static_cast<std::size_t>(pad[d]);
    total *= ext[d];
  }
  std::vector<double> buf(total);
  Coord c(dim);
  for (std::size_t d = 0; d < dim; ++d) c[d] = -pad[d];
  for (std::size_t flat = 0; flat < total; ++flat) {
    buf[flat] = lattice_noise(seed, field, substream, c);
    for (std::size_t d = dim; d-- > 0;) {
      if (++c[d] < static_cast<std::int64_t>(lattice.sizes()[d]) + pad[d]) break;
      c[d] = -pad[d];
    }
  }

  // Trim the unused margin, then convolve axis by axis.
  for (std::size_t d = 0; d < dim; ++d) {
    const std::size_t w = weights[d].size() / 2;
    const std::size_t excess = static_cast<std::size_t>(pad[d]) - w;
    std::size_t outer = 1, inner = 1;
    for (std::size_t e = 0; e < d; ++e) outer *= ext[e];
    for (std::size_t e = d + 1; e < dim; ++e) inner *= ext[e];
    if (excess > 0) {
      std::vector<double> tap(2 * excess + 1, 0.0);
      tap[excess] = 1.0;
      buf = convolve_axis(buf, outer, ext[d], inner, tap);
      ext[d] -= 2 * excess;
    }
    buf = convolve_axis(buf, outer, ext[d], inner, weights[d]);
    ext[d] = lattice.sizes()[d];
  }
  const double scale = 1.0 / std::sqrt(norm2);
  for (double& v : buf) v *= scale;
  return Field(lattice, std::move(buf));
}

Field simulate_field(const SimSpec& spec, std::size_t index) {
  spec.validate();
  if (index >= spec.n_fields) throw std::out_of_range("field index past the end of the ensemble");
  const std::size_t padding = spec.nominal_padding();
  switch (spec.model.kind) {
    case SimModel::Kind::gaussian:
      return smooth_noise(spec.lattice, spec.kernel, spec.seed, index, 0, padding);
    case SimModel::Kind::student_t: {
      const Field eps = smooth_noise(spec.lattice, spec.kernel, spec.seed, index, 0, padding);
      std::vector<double> ss(eps.size(), 0.0);
      for (int i = 1; i <= spec.model.nu; ++i) {
        const Field z = smooth_noise(spec.lattice, spec.kernel, spec.seed, index,
                                     static_cast<std::uint32_t>(i), padding);
        for (std::size_t k = 0; k < ss.size(); ++k) ss[k] += z[k] * z[k];
      }
      std::vector<double> t(eps.size());
      for (std::size_t k = 0; k < t.size(); ++k) t[k] = eps[k] / std::sqrt(ss[k] / spec.model.nu);
      return Field(spec.lattice, std::move(t));
    }
    case SimModel::Kind::nonseparable: {
      const Field a = smooth_noise(spec.lattice, spec.kernel, spec.seed, index, 0, padding);
      const Field b = smooth_noise(spec.lattice, spec.model.second_kernel, spec.seed, index, 1, padding);
      std::vector<double> m(a.size());
      for (std::size_t k = 0; k < m.size(); ++k) m[k] = (a[k] + b[k]) / std::numbers::sqrt2;
      return Field(spec.lattice, std::move(m));
    }
  }
  throw std::logic_error("unknown simulation model");
}

FieldStream::FieldStream(SimSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

bool FieldStream::next(Field& out) {
  if (next_ >= spec_.n_fields) return false;
  out = simulate_field(spec_, next_++);
  return true;
}

namespace {

std::vector<Field> simulate_all(const SimSpec& spec, SimModel::Kind expected) {
  if (spec.model.kind != expected) throw std::invalid_argument("simulation model does not match the call");
  std::vector<Field> out;
  out.reserve(spec.n_fields);
  FieldStream stream(spec);
  Field f;
  while (stream.next(f)) out.push_back(std::move(f));
  return out;
}

}  // namespace

std::vector<Field> simulate_gaussian(const SimSpec& spec) { return simulate_all(spec, SimModel::Kind::gaussian); }
std::vector<Field> simulate_t(const SimSpec& spec) { return simulate_all(spec, SimModel::Kind::student_t); }
std::vector<Field> simulate_nonseparable(const SimSpec& spec) {
  return simulate_all(spec, SimModel::Kind::nonseparable);
}

ReferenceDistribution::ReferenceDistribution(std::vector<double> heights) : heights_(std::move(heights)) {
  if (heights_.empty()) throw NumericError("no peaks found in the reference ensemble");
  std::sort(heights_.begin(), heights_.end());
}

double ReferenceDistribution::pvalue(double g) const {
  const auto above = heights_.end() - std::upper_bound(heights_.begin(), heights_.end(), g);
  return static_cast<double>(above) / static_cast<double>(heights_.size());
}

std::vector<double> ReferenceDistribution::pvalues() const {
  std::vector<double> p(heights_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = pvalue(heights_[i]);
  return p;
}

ReferenceDistribution reference_distribution(std::span<const Field> fields, const Neighborhood& nbhd,
                                             BoundaryPolicy policy) {
  if (fields.empty()) throw std::invalid_argument("reference needs at least one field");
  std::vector<double> h;
  for (const auto& f : fields)
    for (const auto& p : find_peaks(f, nbhd, policy)) h.push_back(p.height);
  return ReferenceDistribution(std::move(h));
}

ReferenceDistribution reference_distribution(const SimSpec& spec, const Neighborhood& nbhd,
                                             BoundaryPolicy policy, unsigned threads) {
  spec.validate();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, spec.n_fields));
  std::vector<std::vector<double>> parts(threads);
  auto work = [&](unsigned t) {
    for (std::size_t i = t; i < spec.n_fields; i += threads)
      for (const auto& p : find_peaks(simulate_field(spec, i), nbhd, policy)) parts[t].push_back(p.height);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  std::vector<double> h;
  for (auto& p : parts) h.insert(h.end(), p.begin(), p.end());
  return ReferenceDistribution(std::move(h));
}

}  // namespace latmax
