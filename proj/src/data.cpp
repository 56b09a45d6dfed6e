#include "maxcorr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "maxcorr/error.hpp"

namespace maxcorr {

namespace fs = std::filesystem;

std::size_t ModalityTable::missing_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Dataset::feature_dims() const {
  std::vector<std::size_t> d;
  for (const auto& m : modalities) d.push_back(m.features());
  return d;
}

bool Dataset::complete() const {
  return std::all_of(modalities.begin(), modalities.end(),
                     [](const ModalityTable& m) { return m.missing_count() == 0; });
}

void Dataset::validate() const {
  const std::size_t p = patients();
  if (labels.size() != p)
    throw DataError("dataset: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(p) + " patients");
  if (class_names.empty()) throw DataError("dataset: no class names");
  for (std::size_t i = 0; i < p; ++i)
    if (labels[i] >= class_names.size())
      throw DataError("dataset: label " + std::to_string(labels[i]) + " of patient '" +
                      patient_ids[i] + "' outside 0.." + std::to_string(class_names.size() - 1));
  for (const auto& m : modalities) {
    if (m.values.rows() != p || m.values.cols() != m.features() ||
        m.missing.size() != m.values.size())
      throw DataError("dataset: modality '" + m.name + "' table is " + m.values.shape_str() +
                      ", expected " + shape_str(p, m.features()));
  }
}

// ---- CSV -------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvFile read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvFile f;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      f.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != f.header.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(f.header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    f.rows.push_back(std::move(cells));
    f.line_numbers.push_back(lineno);
  }
  if (!have_header || f.rows.empty()) throw DataError(path.string() + ": empty table");
  return f;
}

double parse_number(const std::string& cell, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw DataError(path.string() + ":" + std::to_string(line) + ": malformed numeric cell '" +
                    cell + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  const fs::path labels_path = dir / "labels.csv";
  if (!fs::exists(labels_path)) throw DataError("missing labels file " + labels_path.string());

  Dataset ds;
  const fs::path classes_path = dir / "classes.txt";
  if (fs::exists(classes_path)) {
    std::ifstream in(classes_path);
    std::string line;
    while (std::getline(in, line))
      if (auto t = trim(line); !t.empty()) ds.class_names.push_back(t);
    if (ds.class_names.empty()) throw DataError(classes_path.string() + ": no class names");
  } else {
    for (int c = 0; c < 5; ++c) ds.class_names.push_back("class_" + std::to_string(c));
  }

  CsvFile labels = read_csv(labels_path);
  if (labels.header.size() != 2)
    throw DataError(labels_path.string() + ": expected columns patient_id,label");
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < labels.rows.size(); ++r) {
    const auto& row = labels.rows[r];
    if (row[0].empty())
      throw DataError(labels_path.string() + ":" + std::to_string(labels.line_numbers[r]) +
                      ": empty patient id");
    if (!index.emplace(row[0], ds.patient_ids.size()).second)
      throw DataError(labels_path.string() + ":" + std::to_string(labels.line_numbers[r]) +
                      ": duplicate patient id '" + row[0] + "'");
    const double v = parse_number(row[1], labels_path, labels.line_numbers[r]);
    if (v < 0 || v != std::floor(v) || v >= static_cast<double>(ds.class_names.size()))
      throw DataError(labels_path.string() + ":" + std::to_string(labels.line_numbers[r]) +
                      ": label '" + row[1] + "' outside 0.." +
                      std::to_string(ds.class_names.size() - 1));
    ds.patient_ids.push_back(row[0]);
    ds.labels.push_back(static_cast<std::size_t>(v));
  }

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "labels.csv")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(dir.string() + ": no modality tables");

  const std::size_t p = ds.patients();
  for (const fs::path& path : files) {
    CsvFile f = read_csv(path);
    if (f.header.size() < 2) throw DataError(path.string() + ": no feature columns");
    ModalityTable m;
    m.name = path.stem().string();
    m.feature_names.assign(f.header.begin() + 1, f.header.end());
    const std::size_t d = m.features();
    m.values = Matrix(p, d);
    m.missing.assign(p * d, 1);
    std::vector<bool> seen(p, false);
    for (std::size_t r = 0; r < f.rows.size(); ++r) {
      const auto& row = f.rows[r];
      const std::size_t line = f.line_numbers[r];
      auto it = index.find(row[0]);
      if (it == index.end())
        throw DataError(path.string() + ":" + std::to_string(line) + ": patient id '" + row[0] +
                        "' absent from labels");
      const std::size_t i = it->second;
      if (seen[i])
        throw DataError(path.string() + ":" + std::to_string(line) + ": duplicate patient id '" +
                        row[0] + "'");
      seen[i] = true;
      for (std::size_t j = 0; j < d; ++j) {
        const std::string& cell = row[j + 1];
        if (cell.empty()) continue;
        m.values(i, j) = parse_number(cell, path, line);
        m.missing[i * d + j] = 0;
      }
    }
    ds.modalities.push_back(std::move(m));
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "labels.csv");
    out << "patient_id,label\n";
    for (std::size_t i = 0; i < ds.patients(); ++i)
      out << ds.patient_ids[i] << ',' << ds.labels[i] << '\n';
    if (!out) throw DataError("failed writing " + (dir / "labels.csv").string());
  }
  {
    std::ofstream out(dir / "classes.txt");
    for (const auto& c : ds.class_names) out << c << '\n';
  }
  for (const auto& m : ds.modalities) {
    const fs::path path = dir / (m.name + ".csv");
    std::ofstream out(path);
    out << "patient_id";
    for (const auto& f : m.feature_names) out << ',' << f;
    out << '\n';
    for (std::size_t i = 0; i < ds.patients(); ++i) {
      out << ds.patient_ids[i];
      for (std::size_t j = 0; j < m.features(); ++j) {
        out << ',';
        if (!m.is_missing(i, j)) out << format_double(m.values(i, j));
      }
      out << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
  }
}

Dataset impute_means(const Dataset& ds, std::span<const std::size_t> train_rows) {
  for (std::size_t r : train_rows)
    if (r >= ds.patients())
      throw DataError("impute_means: training row " + std::to_string(r) + " out of range");
  Dataset out = ds;
  for (auto& m : out.modalities) {
    const std::size_t d = m.features();
    for (std::size_t j = 0; j < d; ++j) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r : train_rows)
        if (!m.is_missing(r, j)) {
          sum += m.values(r, j);
          ++n;
        }
      bool any_missing = false;
      for (std::size_t i = 0; i < out.patients() && !any_missing; ++i) any_missing = m.is_missing(i, j);
      if (!any_missing) continue;
      if (n == 0)
        throw DataError("impute_means: feature '" + m.feature_names[j] + "' of modality '" +
                        m.name + "' has no observed value in the training cohort");
      const double mean = sum / static_cast<double>(n);
      for (std::size_t i = 0; i < out.patients(); ++i)
        if (m.is_missing(i, j)) {
          m.values(i, j) = mean;
          m.missing[i * d + j] = 0;
        }
    }
  }
  return out;
}

std::vector<Matrix> gather_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  std::vector<Matrix> out;
  for (const auto& m : ds.modalities) {
    Matrix x(rows.size(), m.features());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t i = rows[r];
      if (i >= ds.patients()) throw DataError("gather_rows: row " + std::to_string(i) + " out of range");
      for (std::size_t j = 0; j < m.features(); ++j) {
        if (m.is_missing(i, j))
          throw DataError("gather_rows: modality '" + m.name + "' has a missing cell for patient '" +
                          ds.patient_ids[i] + "'; impute first");
        x(r, j) = m.values(i, j);
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

Matrix gather_concatenated(const Dataset& ds, std::span<const std::size_t> rows) {
  auto blocks = gather_rows(ds, rows);
  std::size_t width = 0;
  for (const auto& b : blocks) width += b.cols();
  Matrix out(rows.size(), width);
  std::size_t off = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < b.rows(); ++r)
      std::copy(b.row(r).begin(), b.row(r).end(), out.row(r).begin() + off);
    off += b.cols();
  }
  return out;
}

// ---- synthetic -------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (patients == 0) throw ConfigError("synthetic: patients must be positive");
  if (feature_dims.empty()) throw ConfigError("synthetic: need at least one modality");
  if (n_classes == 0) throw ConfigError("synthetic: n_classes must be positive");
  if (latent_dim == 0) throw ConfigError("synthetic: latent_dim must be positive");
  if (latent_dim > *std::min_element(feature_dims.begin(), feature_dims.end()))
    throw ConfigError("synthetic: latent_dim exceeds the smallest modality dimension");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic: noise_sigma must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0))
    throw ConfigError("synthetic: missing_rate must lie in [0, 1)");
  if (!(class_separation > 0.0)) throw ConfigError("synthetic: class_separation must be > 0");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> class_dist(0, spec.n_classes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t q = spec.latent_dim;
  Matrix class_means(spec.n_classes, q);
  for (double& v : class_means.flat()) v = spec.class_separation * normal(rng);
  std::vector<Matrix> mixing;
  const double mix_scale = 1.0 / std::sqrt(static_cast<double>(q));
  for (std::size_t d : spec.feature_dims) {
    Matrix m(q, d);
    for (double& v : m.flat()) v = mix_scale * normal(rng);
    mixing.push_back(std::move(m));
  }

  Dataset ds;
  for (std::size_t c = 0; c < spec.n_classes; ++c)
    ds.class_names.push_back(spec.n_classes == kTbOutcomeNames.size() ? kTbOutcomeNames[c]
                                                                       : "class_" + std::to_string(c));
  const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.patients - 1).size()));
  Matrix latent(spec.patients, q);
  for (std::size_t i = 0; i < spec.patients; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%0*zu", width, i);
    ds.patient_ids.emplace_back(buf);
    const std::size_t c = class_dist(rng);
    ds.labels.push_back(c);
    for (std::size_t j = 0; j < q; ++j)
      latent(i, j) = class_means(c, j) + spec.noise_sigma * normal(rng);
  }

  for (std::size_t k = 0; k < spec.feature_dims.size(); ++k) {
    const std::size_t d = spec.feature_dims[k];
    ModalityTable m;
    char name[32];
    std::snprintf(name, sizeof name, "modality_%02zu", k);
    m.name = name;
    for (std::size_t j = 0; j < d; ++j) m.feature_names.push_back("f" + std::to_string(j));
    m.values = Matrix(spec.patients, d);
    m.missing.assign(spec.patients * d, 0);
    for (std::size_t i = 0; i < spec.patients; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double v = 0.0;
        for (std::size_t p = 0; p < q; ++p) v += latent(i, p) * mixing[k](p, j);
        m.values(i, j) = v + spec.noise_sigma * normal(rng);
      }
    if (spec.missing_rate > 0.0)
      for (std::size_t i = 0; i < spec.patients; ++i)
        for (std::size_t j = 0; j < d; ++j)
          if (unit(rng) < spec.missing_rate) {
            m.values(i, j) = 0.0;
            m.missing[i * d + j] = 1;
          }
    ds.modalities.push_back(std::move(m));
  }
  ds.validate();
  return ds;
}

}  // namespace maxcorr
