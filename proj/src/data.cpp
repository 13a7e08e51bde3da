#include "cil/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t test_count_for(std::size_t n) {
  return std::max<std::size_t>(1, n / 5);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (is_train[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (!is_train[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::indices_of(const std::vector<int>& classes,
                                             bool train) const {
  std::set<int> wanted(classes.begin(), classes.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (static_cast<bool>(is_train[i]) != train) continue;
    if (wanted.empty() || wanted.count(labels[i])) out.push_back(i);
  }
  return out;
}

Tensor Dataset::gather_features(const std::vector<std::size_t>& rows) const {
  const std::size_t p = dim();
  Tensor out = Tensor::zeros({rows.size(), p});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < p; ++j)
      out.at2(i, j) = features.at2(rows[i], j);
  return out;
}

std::vector<int> Dataset::gather_labels(const std::vector<std::size_t>& rows) const {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
  return out;
}

void Dataset::validate() const {
  if (labels.size() != features.rows() || is_train.size() != labels.size()) {
    throw SchemaError("dataset: row count mismatch between fields");
  }
  std::vector<int> train_seen(num_classes, 0), test_seen(num_classes, 0);
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(num_classes)) {
      throw SchemaError("dataset: label " + std::to_string(labels[i]) +
                        " outside 0.." + std::to_string(num_classes - 1));
    }
    (is_train[i] ? train_seen : test_seen)[labels[i]] = 1;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!train_seen[c] || !test_seen[c]) {
      throw SchemaError("dataset: class " + std::to_string(c) +
                        " missing from the " +
                        (train_seen[c] ? "test" : "train") + " split");
    }
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!std::isfinite(features.at(i))) {
      throw SchemaError("dataset: non-finite feature value");
    }
  }
}

Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim,
                   double separation, double noise, std::uint64_t seed) {
  if (classes < 2 || per_class < 4 || dim < 2) {
    throw ContractError("blobs: need classes >= 2, per_class >= 4, dim >= 2");
  }
  if (separation < 0.0 || noise < 0.0) {
    throw ContractError("blobs: separation and noise must be >= 0");
  }
  Rng rng(derive_seed(seed, 0xB10B));

  // class means on a sphere of radius `separation`
  std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      means[c][j] = rng.gaussian(0.0, 1.0);
      norm += means[c][j] * means[c][j];
    }
    norm = std::sqrt(std::max(norm, 1e-30));
    for (std::size_t j = 0; j < dim; ++j)
      means[c][j] = separation * means[c][j] / norm;
  }

  const std::size_t n = classes * per_class;
  Dataset ds;
  ds.features = Tensor::zeros({n, dim});
  ds.labels.resize(n);
  ds.is_train.resize(n);
  ds.num_classes = classes;
  const std::size_t n_test = test_count_for(per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      for (std::size_t j = 0; j < dim; ++j)
        ds.features.at2(row, j) = means[c][j] + noise * rng.gaussian(0.0, 1.0);
      ds.labels[row] = static_cast<int>(c);
      ds.is_train[row] = k < per_class - n_test ? 1 : 0;
    }
  }
  std::ostringstream prov;
  prov << "blobs(classes=" << classes << ",per_class=" << per_class
       << ",dim=" << dim << ",separation=" << format_double(separation)
       << ",noise=" << format_double(noise) << ",seed=" << seed << ")";
  ds.provenance = prov.str();
  ds.validate();
  return ds;
}

Dataset load_delimited(const std::string& path, const DelimitedFormat& format,
                       std::uint64_t split_seed) {
  std::ifstream f(path);
  if (!f) throw ParseError("load: cannot open " + path);

  std::string line;
  if (!std::getline(f, line)) throw ParseError("load: empty file " + path);
  auto header = split_line(line, format.delimiter);
  if (header.empty() || header[0] != "label") {
    throw SchemaError("load: header must start with 'label', got '" +
                      (header.empty() ? "" : header[0]) + "'");
  }
  bool has_split = !header.empty() && header.back() == "split";
  const std::size_t p = header.size() - 1 - (has_split ? 1 : 0);
  if (p == 0) throw SchemaError("load: no feature columns in header");
  for (std::size_t j = 0; j < p; ++j) {
    if (header[1 + j] != "f" + std::to_string(j)) {
      throw SchemaError("load: feature column " + std::to_string(j + 1) +
                        " must be named f" + std::to_string(j) + ", got '" +
                        header[1 + j] + "'");
    }
  }

  std::vector<double> values;
  std::vector<int> raw_labels;
  std::vector<std::uint8_t> split_tags;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_line(line, format.delimiter);
    if (cells.size() != header.size()) {
      throw SchemaError("load: row " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    }
    int label = 0;
    auto lres =
        std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), label);
    if (lres.ec != std::errc() || lres.ptr != cells[0].data() + cells[0].size()) {
      throw ParseError("load: row " + std::to_string(line_no) +
                       ", column 1: '" + cells[0] + "' is not an integer label");
    }
    raw_labels.push_back(label);
    for (std::size_t j = 0; j < p; ++j) {
      const std::string& cell = cells[1 + j];
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ParseError("load: row " + std::to_string(line_no) + ", column " +
                         std::to_string(j + 2) + ": '" + cell +
                         "' is not numeric");
      }
      values.push_back(v);
    }
    if (has_split) {
      const std::string& tag = cells.back();
      if (tag == "train") {
        split_tags.push_back(1);
      } else if (tag == "test") {
        split_tags.push_back(0);
      } else {
        throw ParseError("load: row " + std::to_string(line_no) +
                         ": split must be 'train' or 'test', got '" + tag + "'");
      }
    }
  }
  const std::size_t n = raw_labels.size();
  if (n == 0) throw SchemaError("load: no data rows in " + path);

  // dense relabeling of gapped class ids, recorded in provenance
  std::set<int> distinct(raw_labels.begin(), raw_labels.end());
  std::map<int, int> relabel;
  int next = 0;
  for (int id : distinct) relabel[id] = next++;
  bool gapped = false;
  for (const auto& [from, to] : relabel)
    if (from != to) gapped = true;

  Dataset ds;
  ds.features = Tensor({n, p}, std::move(values));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = relabel[raw_labels[i]];
  ds.num_classes = distinct.size();

  if (has_split) {
    ds.is_train = std::move(split_tags);
  } else {
    // deterministic seeded 80/20 per class
    ds.is_train.assign(n, 1);
    Rng rng(derive_seed(split_seed, 0x5B117));
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < n; ++i)
        if (ds.labels[i] == static_cast<int>(c)) rows.push_back(i);
      rng.shuffle(rows.begin(), rows.end());
      const std::size_t n_test = test_count_for(rows.size());
      for (std::size_t k = 0; k < n_test; ++k) ds.is_train[rows[k]] = 0;
    }
  }

  std::ostringstream prov;
  prov << "delimited(" << path << ")";
  if (gapped) {
    prov << " relabel:";
    for (const auto& [from, to] : relabel) prov << " " << from << "->" << to;
  }
  ds.provenance = prov.str();
  ds.validate();
  return ds;
}

void save_delimited(const Dataset& ds, const std::string& path,
                    const DelimitedFormat& format) {
  std::ofstream f(path);
  if (!f) throw ParseError("save: cannot open " + path + " for writing");
  const char d = format.delimiter;
  f << "label";
  for (std::size_t j = 0; j < ds.dim(); ++j) f << d << "f" << j;
  f << d << "split\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    f << ds.labels[i];
    for (std::size_t j = 0; j < ds.dim(); ++j)
      f << d << format_double(ds.features.at2(i, j));
    f << d << (ds.is_train[i] ? "train" : "test") << "\n";
  }
}

}  // namespace cil
