#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "latmax/adlm.hpp"
#include "latmax/covariance.hpp"
#include "latmax/errors.hpp"
#include "latmax/fieldsim.hpp"
#include "latmax/io.hpp"
#include "latmax/lattice.hpp"
#include "latmax/lookup.hpp"
#include "latmax/mcdlm.hpp"
#include "latmax/pipeline.hpp"
#include "latmax/validate.hpp"

using namespace latmax;

namespace {

void info(const GlobalFlags& g, const std::string& msg) {
  if (!g.quiet) std::fprintf(stderr, "%s\n", msg.c_str());
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::fputs(text.c_str(), stdout);
  else
    write_file_atomic(path, text);
}

// Per-axis bandwidths from exactly one of --rho / --fwhm / --eta.
std::vector<double> etas_from(std::size_t dim, const std::vector<double>& rho, const std::vector<double>& fwhm,
                              const std::vector<double>& eta) {
  const int given = !rho.empty() + !fwhm.empty() + !eta.empty();
  if (given != 1) throw std::invalid_argument("give exactly one of --rho, --fwhm, --eta");
  std::vector<double> out;
  if (!rho.empty())
    for (double r : rho) out.push_back(rho_to_eta(r));
  if (!fwhm.empty())
    for (double f : fwhm) out.push_back(fwhm_to_eta(f));
  if (!eta.empty()) out = eta;
  if (out.size() == 1) out.assign(dim, out[0]);
  if (out.size() != dim) throw std::invalid_argument("need one smoothing value or one per axis");
  return out;
}

struct CovSource {
  std::string matrix;
  std::string kind = "kronecker";
  std::vector<double> rho, fwhm, eta;
  std::size_t dim = 2;
  std::string nbhd = "fc";
  bool repair = false;

  void add(CLI::App* c) {
    c->add_option("--cov", matrix, "Covariance matrix CSV (center first, neighbors in canonical order)");
    c->add_option("--kind", kind, "kronecker | discrete | continuous")
        ->check(CLI::IsMember({"kronecker", "discrete", "continuous"}));
    c->add_option("--rho", rho, "Adjacent-voxel correlation (one value or one per axis)");
    c->add_option("--fwhm", fwhm, "Kernel FWHM in voxels (one value or one per axis)");
    c->add_option("--eta", eta, "Kernel standard deviation in voxels (one value or one per axis)");
    c->add_option("--dim", dim, "Lattice dimension")->check(CLI::Range(1, 3));
    c->add_option("--nbhd", nbhd, "pc | fc")->check(CLI::IsMember({"pc", "fc"}));
    c->add_flag("--psd-repair", repair, "Clip negative eigenvalues before use");
  }

  NeighborhoodCov build() const {
    const Neighborhood nb = build_neighborhood(neighborhood_kind_from_string(nbhd), dim);
    std::optional<NeighborhoodCov> cov;
    if (!matrix.empty()) {
      cov.emplace(nb, read_matrix_csv(matrix), CovProvenance::empirical);
    } else if (kind == "kronecker") {
      if (rho.size() != 1 || !fwhm.empty() || !eta.empty())
        throw std::invalid_argument("the kronecker kind takes a single --rho");
      const NeighborhoodCov full = kronecker_cov(rho[0], dim);
      if (nb.kind() == NeighborhoodKind::full) {
        cov.emplace(full);
      } else {
        std::vector<bool> keep;
        for (const auto& a : full.nbhd().offsets()) {
          int nz = 0;
          for (int v : a) nz += v != 0;
          keep.push_back(nz == 1);
        }
        const NeighborhoodCov sub = restrict_cov(full, keep);
        cov.emplace(nb, sub.matrix(), CovProvenance::kronecker);
      }
    } else {
      const auto e = etas_from(dim, rho, fwhm, eta);
      const KernelSpec k = kind == "discrete" ? KernelSpec::elliptical(e) : KernelSpec::continuous(e);
      cov.emplace(kernel_cov(k, LatticeSpec(std::vector<std::size_t>(dim, 3)), nb));
    }
    return repair ? psd_repair(*cov) : *cov;
  }
};

Mask mask_from(const std::string& path) {
  const Field f = read_volume(path);
  Mask m{f.lattice(), std::vector<std::uint8_t>(f.size())};
  for (std::size_t i = 0; i < f.size(); ++i) m.inside[i] = f[i] != 0.0;
  return m;
}

std::string peak_csv(const std::vector<PeakRecord>& peaks, std::size_t dim) {
  CsvTable t;
  for (std::size_t d = 0; d < dim; ++d) t.header.push_back("x" + std::to_string(d));
  t.header.insert(t.header.end(), {"height", "boundary"});
  for (const auto& p : peaks) {
    std::vector<std::string> row;
    for (auto c : p.location) row.push_back(std::to_string(c));
    row.push_back(format_double(p.height));
    row.push_back(p.boundary ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  return to_csv(t);
}

void add_rho(CLI::App& app, GlobalFlags&) {
  auto* c = app.add_subcommand("rho", "Convert between FWHM, kernel SD and adjacent-voxel correlation");
  auto o = std::make_shared<std::vector<double>>(3, std::nan(""));
  auto* g1 = c->add_option("--fwhm", (*o)[0], "FWHM in voxels");
  auto* g2 = c->add_option("--rho", (*o)[1], "Adjacent-voxel correlation");
  auto* g3 = c->add_option("--eta", (*o)[2], "Kernel SD in voxels");
  g1->excludes(g2)->excludes(g3);
  g2->excludes(g3);
  c->callback([o] {
    double eta;
    if (!std::isnan((*o)[0]))
      eta = fwhm_to_eta((*o)[0]);
    else if (!std::isnan((*o)[1]))
      eta = rho_to_eta((*o)[1]);
    else if (!std::isnan((*o)[2]))
      eta = (*o)[2];
    else
      throw std::invalid_argument("give one of --fwhm, --rho, --eta");
    const double rho = std::exp(-1.0 / (4.0 * eta * eta));
    std::printf("fwhm,eta,rho,rho_discrete\n%s,%s,%s,%s\n", format_double(eta_to_fwhm(eta)).c_str(),
                format_double(eta).c_str(), format_double(rho).c_str(),
                format_double(discrete_axis_correlation(eta, 1.0, 1)).c_str());
  });
}

void add_cov(CLI::App& app, GlobalFlags& g) {
  auto* cov = app.add_subcommand("cov", "Neighborhood covariance matrices");
  cov->require_subcommand(1);

  auto* b = cov->add_subcommand("build", "Analytic covariance as a CSV matrix");
  auto src = std::make_shared<CovSource>();
  auto out = std::make_shared<std::string>();
  src->add(b);
  b->add_option("--out", *out, "Output CSV (default stdout)");
  b->callback([src, out, &g] {
    const NeighborhoodCov c = src->build();
    if (c.psd_repaired()) info(g, "psd repair clipped " + format_double(c.max_clipped()));
    emit(*out, matrix_csv(c.matrix()));
  });

  struct Est {
    std::vector<std::string> in;
    std::string nbhd = "fc", mask, out;
    bool isotropic = false, raw = false, repair = false;
  };
  auto e = std::make_shared<Est>();
  auto* est = cov->add_subcommand("estimate", "Empirical covariance from volumes");
  est->add_option("--in", e->in, "Volume files")->required();
  est->add_option("--nbhd", e->nbhd, "pc | fc")->check(CLI::IsMember({"pc", "fc"}));
  est->add_option("--mask", e->mask, "Mask volume (nonzero = inside)");
  est->add_flag("--isotropic", e->isotropic, "Pool all lags of equal length");
  est->add_flag("--no-standardize", e->raw, "Skip voxelwise standardization");
  est->add_flag("--psd-repair", e->repair, "Clip negative eigenvalues");
  est->add_option("--out", e->out, "Output CSV (default stdout)");
  est->callback([e, &g] {
    std::vector<Field> fields;
    for (const auto& p : e->in) fields.push_back(read_volume(p));
    std::optional<Mask> mask;
    if (!e->mask.empty()) mask = mask_from(e->mask);
    EmpiricalCovOptions o;
    o.isotropic = e->isotropic;
    o.standardize = !e->raw;
    o.mask = mask ? &*mask : nullptr;
    const Neighborhood nb = build_neighborhood(neighborhood_kind_from_string(e->nbhd), fields.front().lattice().dim());
    NeighborhoodCov c = empirical_cov(fields, nb, o);
    if (e->repair) c = psd_repair(c);
    const auto r = axis_lag1_correlations(c);
    std::string msg = "lag-1 correlations:";
    for (double v : r) msg += " " + format_double(v);
    info(g, msg);
    emit(e->out, matrix_csv(c.matrix()));
  });
}

void add_sample(CLI::App& app, GlobalFlags& g) {
  struct Opt {
    CovSource src;
    std::string model = "gaussian", out;
    std::size_t target_n = 0, max_m = 100'000'000;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("sample", "Monte Carlo peak heights to a sample-set file");
  o->src.add(c);
  c->add_option("--model", o->model, "gaussian | t:<nu>");
  c->add_option("--target-n", o->target_n, "Accepted samples (default by covariance)");
  c->add_option("--max-m", o->max_m, "Attempt budget");
  c->add_option("--out", o->out, "Output sample-set file")->required();
  c->callback([o, &g] {
    const NeighborhoodCov cov = o->src.build();
    SampleOptions so;
    so.target_n = o->target_n ? o->target_n : default_target_n(cov);
    so.max_m = std::max(o->max_m, so.target_n);
    so.seed = g.seed;
    so.threads = g.threads;
    const PeakSampleSet set = sample_local_maxima(cov, PeakModel::parse(o->model), so);
    write_samples(o->out, set);
    info(g, "accepted " + std::to_string(set.accepted()) + " of " + std::to_string(set.attempted()));
  });
}

void add_pvalue(CLI::App& app, GlobalFlags&) {
  struct Opt {
    std::string samples, lookup, heights, column = "height", out;
    std::vector<double> height;
    double rho = std::nan("");
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("pvalue", "Peak p-values from a sample set or lookup table");
  c->add_option("--samples", o->samples, "Sample-set file");
  c->add_option("--lookup", o->lookup, "Lookup-table file (needs --rho)");
  c->add_option("--rho", o->rho, "Correlation for lookup queries");
  c->add_option("--height", o->height, "Peak height(s)");
  c->add_option("--heights", o->heights, "CSV with a height column");
  c->add_option("--column", o->column, "Height column name");
  c->add_option("--out", o->out, "Output CSV (default stdout)");
  c->callback([o] {
    if (o->samples.empty() == o->lookup.empty()) throw std::invalid_argument("give one of --samples, --lookup");
    std::vector<double> h = o->height;
    if (!o->heights.empty()) {
      const auto more = read_csv(o->heights).numbers(o->column);
      h.insert(h.end(), more.begin(), more.end());
    }
    if (h.empty()) throw std::invalid_argument("no heights given");
    CsvTable t;
    t.header = {"height", "p", "censored"};
    if (!o->samples.empty()) {
      const PeakSampleSet set = read_samples(o->samples);
      for (double u : h) {
        const PValue p = peak_pvalue(set, u);
        t.rows.push_back({format_double(u), format_double(p.value), p.censored ? "1" : "0"});
      }
    } else {
      if (std::isnan(o->rho)) throw std::invalid_argument("lookup queries need --rho");
      const LookupTable table = read_lookup(o->lookup);
      for (double u : h) {
        const LookupResult p = query(table, o->rho, u);
        t.rows.push_back({format_double(u), format_double(p.pvalue), p.censored ? "1" : "0"});
      }
    }
    emit(o->out, to_csv(t));
  });
}

void add_adlm(CLI::App& app, GlobalFlags&) {
  struct Opt {
    std::vector<double> rho, u;
    std::vector<int> profile;
    std::size_t dim = 0;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("adlm", "Analytic peak p-values (axis-neighbor connectivity)");
  c->add_option("--rho", o->rho, "Adjacent-voxel correlation (one value or one per axis)")->required();
  c->add_option("--dim", o->dim, "Dimension when a single --rho is given (default 1)");
  c->add_option("--u", o->u, "Peak height(s)")->required();
  c->add_option("--profile", o->profile, "Present axis neighbors per axis (0, 1, 2)");
  c->callback([o] {
    AdlmParams p;
    p.rhos = o->rho;
    if (p.rhos.size() == 1 && o->dim > 1) p.rhos.assign(o->dim, p.rhos[0]);
    p.profile = o->profile;
    const AdlmDistribution dist(p);
    std::printf("u,p\n");
    for (double u : o->u) std::printf("%s,%s\n", format_double(u).c_str(), format_double(dist.survival(u)).c_str());
    if (dist.degenerate()) std::fprintf(stderr, "warning: correlation near 1, small-h limit used\n");
  });
}

struct SimOpts {
  std::size_t dim = 2, size = 50, n = 1;
  std::vector<double> rho, fwhm, eta;
  std::string model = "gaussian";

  void add(CLI::App* c) {
    c->add_option("--dim", dim, "Lattice dimension")->check(CLI::Range(1, 3));
    c->add_option("--size", size, "Voxels per axis");
    c->add_option("--rho", rho, "Adjacent-voxel correlation per axis (sets the kernel SD)");
    c->add_option("--fwhm", fwhm, "Kernel FWHM per axis");
    c->add_option("--eta", eta, "Kernel SD per axis");
    c->add_option("--model", model, "gaussian | t:<nu> | nonseparable");
    c->add_option("--n", n, "Number of fields");
  }

  SimSpec spec(std::uint64_t seed) const {
    SimSpec s;
    s.lattice = LatticeSpec(std::vector<std::size_t>(dim, size));
    const auto e = etas_from(dim, rho, fwhm, eta);
    s.kernel = KernelSpec::elliptical(e);
    if (model == "gaussian") {
      s.model = SimModel::gaussian();
    } else if (model == "nonseparable") {
      s.model = SimModel::swapped(s.kernel);
    } else if (model.rfind("t:", 0) == 0) {
      s.model = SimModel::student_t(std::stoi(model.substr(2)));
    } else {
      throw std::invalid_argument("unknown model " + model);
    }
    s.n_fields = n;
    s.seed = seed;
    return s;
  }
};

void add_simulate(CLI::App& app, GlobalFlags& g) {
  struct Opt {
    SimOpts sim;
    std::string dir = ".", prefix = "field";
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("simulate", "Smoothed random fields to volume files");
  o->sim.add(c);
  c->add_option("--out-dir", o->dir, "Output directory");
  c->add_option("--prefix", o->prefix, "File name prefix");
  c->callback([o, &g] {
    const SimSpec spec = o->sim.spec(g.seed);
    std::filesystem::create_directories(o->dir);
    FieldStream stream(spec);
    Field f;
    char name[64];
    while (stream.next(f)) {
      std::snprintf(name, sizeof name, "_%05zu.vol", stream.position() - 1);
      write_volume((std::filesystem::path(o->dir) / (o->prefix + name)).string(), f);
    }
    info(g, "wrote " + std::to_string(spec.n_fields) + " fields");
  });
}

void add_peaks(CLI::App& app, GlobalFlags&) {
  struct Opt {
    std::string in, nbhd = "fc", boundary = "exclude", mask, out;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("peaks", "Local maxima of a volume as CSV");
  c->add_option("--in", o->in, "Volume file")->required();
  c->add_option("--nbhd", o->nbhd, "pc | fc")->check(CLI::IsMember({"pc", "fc"}));
  c->add_option("--boundary", o->boundary, "exclude | reduced")->check(CLI::IsMember({"exclude", "reduced"}));
  c->add_option("--mask", o->mask, "Mask volume");
  c->add_option("--out", o->out, "Output CSV (default stdout)");
  c->callback([o] {
    const Field f = read_volume(o->in);
    std::optional<Mask> mask;
    if (!o->mask.empty()) mask = mask_from(o->mask);
    const auto peaks = find_peaks(f, build_neighborhood(neighborhood_kind_from_string(o->nbhd), f.lattice().dim()),
                                  o->boundary == "reduced" ? BoundaryPolicy::reduced : BoundaryPolicy::exclude,
                                  mask ? &*mask : nullptr);
    emit(o->out, peak_csv(peaks, f.lattice().dim()));
  });
}

void add_reference(CLI::App& app, GlobalFlags& g) {
  struct Opt {
    std::vector<std::string> in;
    SimOpts sim;
    std::string nbhd = "fc", boundary = "exclude", out;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("reference", "Pooled peak heights and reference p-values");
  c->add_option("--in", o->in, "Volume files (omit to simulate with the flags below)");
  o->sim.add(c);
  c->add_option("--nbhd", o->nbhd, "pc | fc")->check(CLI::IsMember({"pc", "fc"}));
  c->add_option("--boundary", o->boundary, "exclude | reduced")->check(CLI::IsMember({"exclude", "reduced"}));
  c->add_option("--out", o->out, "Output CSV (default stdout)");
  c->callback([o, &g] {
    const BoundaryPolicy policy = o->boundary == "reduced" ? BoundaryPolicy::reduced : BoundaryPolicy::exclude;
    const auto kind = neighborhood_kind_from_string(o->nbhd);
    std::optional<ReferenceDistribution> ref;
    if (!o->in.empty()) {
      std::vector<Field> fields;
      for (const auto& p : o->in) fields.push_back(read_volume(p));
      ref.emplace(reference_distribution(fields, build_neighborhood(kind, fields.front().lattice().dim()), policy));
    } else {
      const SimSpec spec = o->sim.spec(g.seed);
      ref.emplace(reference_distribution(spec, build_neighborhood(kind, spec.lattice.dim()), policy, g.threads));
    }
    CsvTable t;
    t.header = {"height", "p_ref"};
    const auto p = ref->pvalues();
    for (std::size_t i = 0; i < p.size(); ++i) t.rows.push_back({format_double(ref->heights()[i]), format_double(p[i])});
    emit(o->out, to_csv(t));
    info(g, std::to_string(ref->size()) + " peaks pooled");
  });
}

void add_lookup(CLI::App& app, GlobalFlags& g) {
  auto* lu = app.add_subcommand("lookup", "Precomputed peak-height CDF tables");
  lu->require_subcommand(1);

  struct Build {
    std::size_t dim = 2, samples = 100'000, u_points = 100'000;
    std::string out;
  };
  auto b = std::make_shared<Build>();
  auto* bc = lu->add_subcommand("build", "Sample every rho row");
  bc->add_option("--dim", b->dim, "Dimension")->check(CLI::Range(1, 3));
  bc->add_option("--samples", b->samples, "Accepted samples per rho");
  bc->add_option("--u-points", b->u_points, "Height grid size");
  bc->add_option("--out", b->out, "Output table")->required();
  bc->callback([b, &g] {
    LookupBuildOptions o;
    o.samples_per_rho = b->samples;
    o.u_points = b->u_points;
    o.seed = g.seed;
    o.threads = g.threads;
    write_lookup(b->out, build_table(b->dim, o));
  });

  auto s = std::make_shared<std::pair<std::string, std::string>>();
  auto* sc = lu->add_subcommand("smooth", "Spline-smooth a table");
  sc->add_option("--in", s->first, "Input table")->required();
  sc->add_option("--out", s->second, "Output table")->required();
  sc->callback([s, &g] {
    const LookupTable t = smooth_table(read_lookup(s->first));
    info(g, "lambda_rho " + format_double(t.lambda_rho) + ", lambda_u " + format_double(t.lambda_u));
    write_lookup(s->second, t);
  });

  struct Query {
    std::string in;
    double rho = 0.5;
    std::vector<double> u;
  };
  auto q = std::make_shared<Query>();
  auto* qc = lu->add_subcommand("query", "Interpolated p-values");
  qc->add_option("--in", q->in, "Table")->required();
  qc->add_option("--rho", q->rho, "Correlation")->required();
  qc->add_option("--u", q->u, "Height(s)")->required();
  qc->callback([q] {
    const LookupTable t = read_lookup(q->in);
    std::printf("u,p,censored\n");
    for (double u : q->u) {
      const LookupResult r = query(t, q->rho, u);
      std::printf("%s,%s,%d\n", format_double(u).c_str(), format_double(r.pvalue).c_str(), r.censored ? 1 : 0);
    }
  });
}

StudyData study_from(const std::vector<std::string>& in, const std::string& mask) {
  StudyData s;
  for (const auto& p : in) s.subjects.push_back(read_volume(p));
  if (!mask.empty()) s.mask = mask_from(mask);
  return s;
}

void add_tstat(CLI::App& app, GlobalFlags& g) {
  struct Opt {
    std::vector<std::string> in;
    std::string mask, out;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("tstat", "One-sample t map of subject volumes");
  c->add_option("--in", o->in, "Subject volumes")->required();
  c->add_option("--mask", o->mask, "Mask volume");
  c->add_option("--out", o->out, "Output volume")->required();
  c->callback([o, &g] {
    const TMap t = one_sample_t(study_from(o->in, o->mask));
    write_volume(o->out, t.t);
    info(g, "degrees of freedom " + format_double(t.nu));
  });
}

void add_analyze(CLI::App& app, GlobalFlags& g) {
  struct Opt {
    std::vector<std::string> in;
    std::string mask, nbhd = "fc", boundary = "exclude", method = "mcdlm_t", lookup, external, out;
    bool isotropic = false;
    std::size_t target_n = 0;
    double alpha = 0.05;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("analyze", "t map, covariance, peak p-values and FDR");
  c->add_option("--in", o->in, "Subject volumes")->required();
  c->add_option("--mask", o->mask, "Mask volume");
  c->add_option("--nbhd", o->nbhd, "pc | fc")->check(CLI::IsMember({"pc", "fc"}));
  c->add_option("--boundary", o->boundary, "exclude | reduced")->check(CLI::IsMember({"exclude", "reduced"}));
  c->add_option("--method", o->method, "mcdlm_t | mcdlm_gaussianized | lookup | external");
  c->add_option("--lookup", o->lookup, "Lookup table for --method lookup");
  c->add_option("--external", o->external, "CSV with x0.. and p columns for --method external");
  c->add_flag("--isotropic", o->isotropic, "Isotropic lag pooling");
  c->add_option("--target-n", o->target_n, "Accepted samples (default by covariance)");
  c->add_option("--alpha", o->alpha, "FDR level");
  c->add_option("--out", o->out, "Peak CSV (default stdout)");
  c->callback([o, &g] {
    const StudyData study = study_from(o->in, o->mask);
    AnalyzeOptions a;
    a.method = peak_method_from_string(o->method);
    a.boundary = o->boundary == "reduced" ? BoundaryPolicy::reduced : BoundaryPolicy::exclude;
    a.isotropic_pooling = o->isotropic;
    a.sampling.target_n = o->target_n;
    a.sampling.seed = g.seed;
    a.sampling.threads = g.threads;
    a.alpha = o->alpha;
    std::optional<LookupTable> table;
    if (!o->lookup.empty()) {
      table = read_lookup(o->lookup);
      a.table = &*table;
    }
    if (!o->external.empty()) {
      const CsvTable ext = read_csv(o->external);
      const LatticeSpec& lat = study.lattice();
      const auto p = ext.numbers("p");
      std::vector<std::vector<double>> xs;
      for (std::size_t d = 0; d < lat.dim(); ++d) xs.push_back(ext.numbers("x" + std::to_string(d)));
      for (std::size_t r = 0; r < p.size(); ++r) {
        Coord cd(lat.dim());
        for (std::size_t d = 0; d < lat.dim(); ++d) cd[d] = static_cast<std::int64_t>(xs[d][r]);
        if (!lat.contains(cd)) throw std::invalid_argument("external p-value outside the lattice");
        a.external_p[lat.flat_index(cd)] = p[r];
      }
    }
    const Neighborhood nb = build_neighborhood(neighborhood_kind_from_string(o->nbhd), study.lattice().dim());
    const AnalysisResult r = analyze_peaks(study, nb, a);
    std::string msg = "method " + r.method + ", nu " + format_double(r.nu) + ", lag-1 correlations:";
    for (double v : r.axis_rho) msg += " " + format_double(v);
    std::size_t rej = 0;
    for (bool b : r.rejected) rej += b;
    msg += "; " + std::to_string(r.peaks.size()) + " peaks, " + std::to_string(rej) + " significant";
    info(g, msg);
    emit(o->out, to_csv(peak_table(r)));
  });
}

void add_validate(CLI::App& app, GlobalFlags&) {
  struct Opt {
    std::string reference, ref_column = "p_ref", column = "p", out, svg;
    std::vector<std::string> methods;
    double lo = 0.001, hi = 0.05;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("validate", "pp metrics of method p-values against a reference");
  c->add_option("--reference", o->reference, "CSV with reference p-values")->required();
  c->add_option("--ref-column", o->ref_column, "Reference column name");
  c->add_option("--method", o->methods, "label=path CSVs with method p-values, rows aligned")->required();
  c->add_option("--column", o->column, "Method column name");
  c->add_option("--window-lo", o->lo, "Window lower end (open)");
  c->add_option("--window-hi", o->hi, "Window upper end (closed)");
  c->add_option("--out", o->out, "Metrics CSV (default stdout)");
  c->add_option("--svg", o->svg, "pp-plot SVG path");
  c->callback([o] {
    const auto ref = read_csv(o->reference).numbers(o->ref_column);
    std::map<std::string, std::vector<double>> methods;
    for (const auto& m : o->methods) {
      const auto eq = m.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--method expects label=path");
      methods[m.substr(0, eq)] = read_csv(m.substr(eq + 1)).numbers(o->column);
    }
    const PWindow w{o->lo, o->hi};
    CsvTable t;
    t.header = {"method", "n", "mean_ratio", "rmse", "pp_sup", "ks"};
    for (const auto& [label, p] : methods) {
      auto metric = [&](auto fn) {
        try {
          return format_double(fn());
        } catch (const std::invalid_argument&) {
          return std::string("nan");
        }
      };
      t.rows.push_back({label, std::to_string(p.size()), metric([&] { return mean_ratio(ref, p, w); }),
                        metric([&] { return rmse_identity(ref, p, w); }),
                        format_double(pp_sup_distance(ref, p)), format_double(ks_two_sample(ref, p))});
    }
    if (!o->svg.empty()) emit_pp_svg(pp_data(ref, methods), o->svg);
    emit(o->out, to_csv(t));
  });
}

void add_bh(CLI::App& app, GlobalFlags&) {
  struct Opt {
    std::string in, column = "p", out;
    double alpha = 0.05;
  };
  auto o = std::make_shared<Opt>();
  auto* c = app.add_subcommand("bh", "Benjamini-Hochberg adjustment of a p-value column");
  c->add_option("--in", o->in, "CSV")->required();
  c->add_option("--column", o->column, "p-value column");
  c->add_option("--alpha", o->alpha, "FDR level");
  c->add_option("--out", o->out, "Output CSV (default stdout)");
  c->callback([o] {
    CsvTable t = read_csv(o->in);
    const BHResult r = bh_adjust(t.numbers(o->column), o->alpha);
    // Existing p_bh / rejected columns are overwritten in place.
    auto slot = [&t](const std::string& name) {
      const auto it = std::find(t.header.begin(), t.header.end(), name);
      if (it != t.header.end()) return static_cast<std::size_t>(it - t.header.begin());
      t.header.push_back(name);
      for (auto& row : t.rows) row.emplace_back();
      return t.header.size() - 1;
    };
    const std::size_t adj = slot("p_bh"), rej = slot("rejected");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      t.rows[i].resize(t.header.size());
      t.rows[i][adj] = format_double(r.adjusted[i]);
      t.rows[i][rej] = r.rejected[i] ? "1" : "0";
    }
    emit(o->out, to_csv(t));
  });
}

}  // namespace

void register_commands(CLI::App& app, GlobalFlags& g) {
  app.fallthrough();
  app.add_option("--seed", g.seed, "Random seed (64-bit)");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");
  add_rho(app, g);
  add_cov(app, g);
  add_sample(app, g);
  add_pvalue(app, g);
  add_adlm(app, g);
  add_simulate(app, g);
  add_peaks(app, g);
  add_reference(app, g);
  add_lookup(app, g);
  add_tstat(app, g);
  add_analyze(app, g);
  add_validate(app, g);
  add_bh(app, g);
}
