#include "amp/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace amp {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (inputs.rows() != labels.size()) throw std::invalid_argument("dataset: row/label count mismatch");
  for (std::size_t y : labels)
    if (y >= num_classes) throw std::invalid_argument("dataset: label out of range");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.inputs = RealMat(indices.size(), dim());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = inputs.row(indices[i]);
    std::copy(src.begin(), src.end(), out.inputs.row(i).begin());
    out.labels[i] = labels[indices[i]];
  }
  return out;
}

Dataset gen_spiral(std::size_t n_per_class, std::size_t num_classes, double noise_sd,
                   std::uint64_t seed) {
  if (n_per_class < 1 || num_classes < 2)
    throw std::invalid_argument("gen_spiral: need n_per_class >= 1 and num_classes >= 2");
  Rng rng(seed, "spiral");
  Dataset ds;
  ds.num_classes = num_classes;
  ds.inputs = RealMat(n_per_class * num_classes, 2);
  ds.labels.resize(n_per_class * num_classes);
  const double pi = std::numbers::pi;
  std::size_t row = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      const double t = n_per_class == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n_per_class - 1);
      const double rho = 0.1 + 0.9 * t;
      const double phi = 4.0 * pi * t + 2.0 * pi * static_cast<double>(c) / static_cast<double>(num_classes);
      double px = rho * std::cos(phi);
      double py = rho * std::sin(phi);
      if (noise_sd > 0.0) {
        px += noise_sd * rng.normal();
        py += noise_sd * rng.normal();
      }
      ds.inputs(row, 0) = px;
      ds.inputs(row, 1) = py;
      ds.labels[row] = c;
    }
  }
  return ds;
}

Dataset gen_blobs(std::size_t n_per_class, const RealMat& centers, double sd, std::uint64_t seed) {
  if (n_per_class < 1 || centers.rows() < 1) throw std::invalid_argument("gen_blobs: empty request");
  Rng rng(seed, "blobs");
  Dataset ds;
  ds.num_classes = centers.rows();
  ds.inputs = RealMat(n_per_class * centers.rows(), centers.cols());
  ds.labels.resize(n_per_class * centers.rows());
  std::size_t row = 0;
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t k = 0; k < centers.cols(); ++k) {
        double v = centers(c, k);
        if (sd > 0.0) v += sd * rng.normal();
        ds.inputs(row, k) = v;
      }
      ds.labels[row] = c;
    }
  }
  return ds;
}

SplitDataset split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  ds.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction must be in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  Rng rng(seed, "split");
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    if (members.size() < 2) throw std::invalid_argument("cannot stratify");
    shuffle(members, rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k)
      (k < n_test ? test_idx : train_idx).push_back(members[k]);
  }
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line, const std::string& why) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail_line(path, 1, "missing header");
  const auto header = split_fields(strip_cr(line));
  if (header.empty() || header.back() != "label") fail_line(path, 1, "unknown header: last column must be 'label'");
  if (header.size() < 2) fail_line(path, 1, "expected at least one feature");
  const std::size_t d = header.size() - 1;
  for (std::size_t k = 0; k < d; ++k)
    if (header[k] != "x" + std::to_string(k))
      fail_line(path, 1, "unknown header: expected x" + std::to_string(k) + ", got '" + header[k] + "'");

  RealVec values;
  Labels labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != d + 1)
      fail_line(path, lineno, "expected " + std::to_string(d + 1) + " fields, got " + std::to_string(fields.size()));
    for (std::size_t k = 0; k < d; ++k) {
      const std::string& f = fields[k];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        fail_line(path, lineno, "non-finite or malformed value '" + f + "'");
      values.push_back(v);
    }
    const std::string& lf = fields[d];
    std::size_t y = 0;
    auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), y);
    if (ec != std::errc() || ptr != lf.data() + lf.size() || lf.empty())
      fail_line(path, lineno, "malformed label '" + lf + "'");
    labels.push_back(y);
  }
  if (labels.empty()) fail_line(path, lineno, "no data rows");

  Dataset ds;
  ds.inputs = RealMat(labels.size(), d, std::move(values));
  std::size_t max_label = 0;
  for (std::size_t y : labels) max_label = std::max(max_label, y);
  ds.labels = std::move(labels);
  ds.num_classes = max_label + 1;
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t k = 0; k < ds.dim(); ++k) out << 'x' << k << ',';
  out << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.inputs.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << ds.labels[i] << '\n';
  }
}

void Standardizer::apply(Dataset& ds) const {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.inputs.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = (r[k] - mean[k]) / sd[k];
  }
}

Standardizer fit_standardizer(const Dataset& train) {
  const std::size_t d = train.dim();
  const double n = static_cast<double>(train.size());
  Standardizer s{RealVec(d, 0.0), RealVec(d, 0.0)};
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += train.inputs(i, k);
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double t = train.inputs(i, k) - s.mean[k];
      s.sd[k] += t * t;
    }
  for (double& v : s.sd) {
    v = std::sqrt(v / n);
    if (!(v > 0.0)) v = 1.0;
  }
  return s;
}

}  // namespace amp
