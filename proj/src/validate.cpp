#include "latmax/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "latmax/io.hpp"

namespace latmax {

namespace {

void check_p(std::span<const double> p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("p-value outside [0,1]");
}

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("reference and method p-values differ in length");
  check_p(a);
  check_p(b);
}

std::string xml_escape(const std::string& in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

PPData pp_data(std::span<const double> reference_p, const std::map<std::string, std::vector<double>>& method_p) {
  check_p(reference_p);
  std::vector<std::size_t> order(reference_p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return reference_p[a] < reference_p[b]; });
  PPData out;
  for (const auto& [label, p] : method_p) {
    check_pair(reference_p, p);
    PPCurve c;
    const std::size_t n = p.size();
    for (std::size_t i : order) {
      c.reference.push_back(reference_p[i]);
      c.method.push_back(p[i]);
    }
    c.sorted_method = p;
    std::sort(c.sorted_method.begin(), c.sorted_method.end());
    for (std::size_t i = 0; i < n; ++i) c.rank.push_back(static_cast<double>(i + 1) / static_cast<double>(n));
    out.curves.emplace(label, std::move(c));
  }
  return out;
}

double mean_ratio(std::span<const double> reference_p, std::span<const double> method_p, PWindow window) {
  check_pair(reference_p, method_p);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < reference_p.size(); ++i)
    if (window.contains(reference_p[i])) {
      sum += method_p[i] / reference_p[i];
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no reference p-values inside the window");
  return sum / static_cast<double>(n);
}

double rmse_identity(std::span<const double> reference_p, std::span<const double> method_p, PWindow window) {
  check_pair(reference_p, method_p);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < reference_p.size(); ++i)
    if (window.contains(reference_p[i])) {
      const double e = method_p[i] - reference_p[i];
      sum += e * e;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no reference p-values inside the window");
  return std::sqrt(sum / static_cast<double>(n));
}

double pp_sup_distance(std::span<const double> reference_p, std::span<const double> method_p) {
  check_pair(reference_p, method_p);
  double d = 0.0;
  for (std::size_t i = 0; i < reference_p.size(); ++i) d = std::max(d, std::abs(method_p[i] - reference_p[i]));
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

double ks_uniform(std::vector<double> p) {
  if (p.empty()) throw std::invalid_argument("KS needs a nonempty sample");
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = std::clamp(p[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - x, x - i / n});
  }
  return d;
}

BHResult bh_adjust(std::span<const double> pvalues, double alpha) {
  check_p(pvalues);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  const std::size_t m = pvalues.size();
  BHResult r;
  r.rejected.assign(m, false);
  r.adjusted.assign(m, 1.0);
  if (m == 0) return r;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (pvalues[order[i]] <= static_cast<double>(i + 1) * alpha / static_cast<double>(m)) k = i + 1;
  for (std::size_t i = 0; i < k; ++i) r.rejected[order[i]] = true;
  r.num_rejected = k;
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    running = std::min(running, pvalues[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1));
    r.adjusted[order[i]] = running;
  }
  return r;
}

std::string pp_svg(const PPData& data) {
  constexpr double kSize = 400.0;
  constexpr double kMargin = 50.0;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  static const char* kDashes[] = {"none", "6,3", "2,2", "8,2,2,2", "4,4", "1,3"};
  auto px = [&](double p) { return kMargin + p * kSize; };
  auto py = [&](double p) { return kMargin + (1.0 - p) * kSize; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::ostringstream s;
  const double total = kSize + 2 * kMargin;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(total + 160) << "\" height=\""
    << num(total) << "\">\n";
  s << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(kSize) << "\" height=\""
    << num(kSize) << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << num(kMargin + kSize / 2) << "\" y=\"" << num(total - 10)
    << "\" text-anchor=\"middle\" font-size=\"14\">reference p-value</text>\n";
  s << "<text x=\"15\" y=\"" << num(kMargin + kSize / 2) << "\" transform=\"rotate(-90 15 "
    << num(kMargin + kSize / 2) << ")\" text-anchor=\"middle\" font-size=\"14\">method p-value</text>\n";
  s << "<polyline class=\"identity\" points=\"" << num(px(0)) << "," << num(py(0)) << " " << num(px(1)) << ","
    << num(py(1)) << "\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"3,3\"/>\n";
  std::size_t k = 0;
  for (const auto& [label, c] : data.curves) {
    const char* color = kColors[k % 6];
    const char* dash = kDashes[k % 6];
    s << "<polyline class=\"method\" points=\"";
    for (std::size_t i = 0; i < c.reference.size(); ++i) {
      if (i) s << ' ';
      s << num(px(c.reference[i])) << ',' << num(py(c.method[i]));
    }
    s << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (std::string(dash) != "none") s << " stroke-dasharray=\"" << dash << "\"";
    s << "/>\n";
    const double ly = kMargin + 20.0 * static_cast<double>(k);
    s << "<line x1=\"" << num(total) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(total + 30) << "\" y2=\""
      << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (std::string(dash) != "none") s << " stroke-dasharray=\"" << dash << "\"";
    s << "/>\n<text x=\"" << num(total + 36) << "\" y=\"" << num(ly + 4) << "\" font-size=\"12\">" << xml_escape(label)
      << "</text>\n";
    ++k;
  }
  s << "</svg>\n";
  return s.str();
}

void emit_pp_svg(const PPData& data, const std::string& path) { write_file_atomic(path, pp_svg(data)); }

}  // namespace latmax
