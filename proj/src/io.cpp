#include "latmax/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "latmax/errors.hpp"

namespace latmax {

static_assert(std::endian::native == std::endian::little, "payloads are written in host order");

namespace {

using nlohmann::json;

constexpr int kVersion = 1;

std::string payload_bytes(const std::vector<double>& v) {
  std::string out(v.size() * sizeof(double), '\0');
  if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
  return out;
}

struct Parsed {
  json header;
  std::string payload;
};

Parsed split(const std::string& path, const std::string& magic) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw IoError(path + ": missing header line");
  Parsed p;
  try {
    p.header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw IoError(path + ": malformed header: " + e.what());
  }
  if (!p.header.is_object() || p.header.value("magic", "") != magic)
    throw IoError(path + ": expected a " + magic + " file");
  if (p.header.value("version", 0) != kVersion) throw IoError(path + ": unsupported version");
  if (p.header.contains("dtype") && p.header["dtype"] != "f64le") throw IoError(path + ": dtype must be f64le");
  p.payload = bytes.substr(nl + 1);
  return p;
}

std::vector<double> doubles(const Parsed& p, std::size_t expected, const std::string& path) {
  if (p.payload.size() != expected * sizeof(double))
    throw IoError(path + ": payload has " + std::to_string(p.payload.size()) + " bytes, expected " +
                  std::to_string(expected * sizeof(double)));
  std::vector<double> v(expected);
  if (expected) std::memcpy(v.data(), p.payload.data(), p.payload.size());
  return v;
}

template <class T>
T get(const json& h, const char* key, const std::string& path) {
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(path + ": header field '" + key + "' missing or invalid");
  }
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  if (b < e && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError("not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(std::hash<std::string>{}(path) & 0xffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

std::string file_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  try {
    const json h = json::parse(line);
    return h.value("magic", "");
  } catch (const json::exception&) {
    return "";
  }
}

void write_volume(const std::string& path, const Field& field) {
  const auto& lat = field.lattice();
  json h;
  h["magic"] = "LATMAX-VOL";
  h["version"] = kVersion;
  h["D"] = lat.dim();
  h["sizes"] = lat.sizes();
  h["steps"] = lat.steps();
  h["dtype"] = "f64le";
  h["order"] = "row-major";
  write_file_atomic(path, h.dump() + "\n" + payload_bytes(field.values()));
}

Field read_volume(const std::string& path) {
  const Parsed p = split(path, "LATMAX-VOL");
  const auto sizes = get<std::vector<std::size_t>>(p.header, "sizes", path);
  const auto steps = get<std::vector<double>>(p.header, "steps", path);
  const auto dim = get<std::size_t>(p.header, "D", path);
  if (sizes.size() != dim || steps.size() != dim) throw IoError(path + ": D does not match sizes/steps");
  if (p.header.value("order", "row-major") != "row-major") throw IoError(path + ": order must be row-major");
  try {
    LatticeSpec lat(sizes, steps);
    return Field(lat, doubles(p, lat.num_voxels(), path));
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_samples(const std::string& path, const PeakSampleSet& set) {
  json h;
  h["magic"] = "LATMAX-SAMPLES";
  h["version"] = kVersion;
  h["N"] = set.accepted();
  h["M"] = set.attempted();
  h["seed"] = set.seed();
  h["model"] = set.model().to_string();
  h["fingerprint"] = set.fingerprint();
  h["dtype"] = "f64le";
  write_file_atomic(path, h.dump() + "\n" + payload_bytes(set.heights()));
}

PeakSampleSet read_samples(const std::string& path) {
  const Parsed p = split(path, "LATMAX-SAMPLES");
  const auto n = get<std::size_t>(p.header, "N", path);
  try {
    return PeakSampleSet(doubles(p, n, path), get<std::size_t>(p.header, "M", path),
                         get<std::uint64_t>(p.header, "seed", path),
                         PeakModel::parse(get<std::string>(p.header, "model", path)),
                         get<std::uint64_t>(p.header, "fingerprint", path));
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_lookup(const std::string& path, const LookupTable& t) {
  t.validate();
  json h;
  h["magic"] = "LATMAX-LUT";
  h["version"] = kVersion;
  h["D"] = t.dim;
  h["rows"] = t.rows();
  h["cols"] = t.cols();
  h["seed"] = t.seed;
  h["samples_per_rho"] = t.samples_per_rho;
  h["smoothed"] = t.smoothed;
  h["lambda_rho"] = t.lambda_rho;
  h["lambda_u"] = t.lambda_u;
  h["dtype"] = "f64le";
  h["order"] = "row-major";
  std::vector<double> payload = t.rhos;
  payload.insert(payload.end(), t.u.begin(), t.u.end());
  payload.insert(payload.end(), t.cdf.begin(), t.cdf.end());
  write_file_atomic(path, h.dump() + "\n" + payload_bytes(payload));
}

LookupTable read_lookup(const std::string& path) {
  const Parsed p = split(path, "LATMAX-LUT");
  const auto rows = get<std::size_t>(p.header, "rows", path);
  const auto cols = get<std::size_t>(p.header, "cols", path);
  const auto all = doubles(p, rows + cols + rows * cols, path);
  LookupTable t;
  t.dim = get<std::size_t>(p.header, "D", path);
  t.seed = get<std::uint64_t>(p.header, "seed", path);
  t.samples_per_rho = get<std::size_t>(p.header, "samples_per_rho", path);
  t.smoothed = get<bool>(p.header, "smoothed", path);
  t.lambda_rho = get<double>(p.header, "lambda_rho", path);
  t.lambda_u = get<double>(p.header, "lambda_u", path);
  t.rhos.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(rows));
  t.u.assign(all.begin() + static_cast<std::ptrdiff_t>(rows), all.begin() + static_cast<std::ptrdiff_t>(rows + cols));
  t.cdf.assign(all.begin() + static_cast<std::ptrdiff_t>(rows + cols), all.end());
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
  return t;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw IoError("CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::numbers(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (c >= r.size()) throw IoError("CSV row too short for column '" + name + "'");
    out.push_back(parse_double(r[c]));
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = split_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw IoError(path + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw IoError(path + ": empty CSV");
  return t;
}

std::string to_csv(const CsvTable& t) {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::string out;
  auto row = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += cell(r[i]);
    }
    out += '\n';
  };
  row(t.header);
  for (const auto& r : t.rows) row(r);
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) { write_file_atomic(path, to_csv(table)); }

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> r;
    for (const auto& c : split_line(line)) r.push_back(parse_double(c));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(path + ": empty matrix");
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw IoError(path + ": ragged matrix");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

}  // namespace latmax
