#include "fwgd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace fwgd {

namespace {

constexpr std::uint64_t kSplitStream = 0x5350;  // "SP"

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

[[noreturn]] void csv_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

Dataset Dataset::subset(Split which) const {
  Dataset out;
  out.num_classes = num_classes;
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < size(); ++r)
    if (splits[r] == which) rows.push_back(r);
  out.inputs = Matrix(rows.size(), input_dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto src = inputs.row(rows[k]);
    std::copy(src.begin(), src.end(), out.inputs.row(k).begin());
    out.labels.push_back(labels[rows[k]]);
    out.splits.push_back(which);
  }
  return out;
}

std::size_t Dataset::count(Split which) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), which));
}

void Dataset::validate() const {
  if (inputs.rows() != labels.size() || splits.size() != labels.size())
    throw std::invalid_argument("dataset: inputs, labels and split tags differ in length");
  std::vector<std::size_t> per_class(num_classes, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= num_classes)
      throw std::invalid_argument("dataset: label " + std::to_string(labels[r]) + " at row " +
                                  std::to_string(r) + " out of range");
    if (splits[r] == Split::train) ++per_class[static_cast<std::size_t>(labels[r])];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (per_class[c] == 0)
      throw std::invalid_argument("dataset: class " + std::to_string(c) + " has no training rows");
}

void MultiViewSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("multiview: need at least two classes");
  if (views == 0 || view_dim == 0) throw std::invalid_argument("multiview: views and view_dim must be ≥ 1");
  if (signal_dims() > input_dim)
    throw std::invalid_argument("multiview: classes·views·view_dim = " + std::to_string(signal_dims()) +
                                " exceeds input_dim " + std::to_string(input_dim));
  if (!(noise >= 0.0)) throw std::invalid_argument("multiview: noise must be ≥ 0");
  if (!(strength_low >= 0.0 && strength_high >= strength_low))
    throw std::invalid_argument("multiview: need 0 ≤ strength_low ≤ strength_high");
  if (!(single_view_fraction >= 0.0 && single_view_fraction <= 1.0))
    throw std::invalid_argument("multiview: single_view_fraction must be in [0,1]");
  if (!(weak_factor >= 0.0)) throw std::invalid_argument("multiview: weak_factor must be ≥ 0");
  if (drop_view && *drop_view >= views) throw std::invalid_argument("multiview: drop_view out of range");
}

Dataset gen_multiview(const MultiViewSpec& spec, const SplitSizes& sizes, Rng& rng) {
  spec.validate();
  const std::size_t n = sizes.total();
  Dataset data;
  data.num_classes = spec.classes;
  data.inputs = Matrix(n, spec.input_dim);
  data.labels.resize(n);
  data.splits.resize(n);
  const double amp = 1.0 / std::sqrt(static_cast<double>(spec.view_dim));
  std::vector<double> strength(spec.views);

  for (std::size_t r = 0; r < n; ++r) {
    data.splits[r] = r < sizes.train ? Split::train : r < sizes.train + sizes.val ? Split::val : Split::test;
    const std::size_t local = r < sizes.train ? r : r < sizes.train + sizes.val ? r - sizes.train : r - sizes.train - sizes.val;
    const std::size_t cls = local % spec.classes;
    data.labels[r] = static_cast<int>(cls);

    for (double& s : strength) s = rng.uniform(spec.strength_low, spec.strength_high);
    if (rng.uniform() < spec.single_view_fraction) strength[rng.below(spec.views)] *= spec.weak_factor;

    auto x = data.inputs.row(r);
    for (double& v : x) v = spec.noise * rng.normal();
    for (std::size_t v = 0; v < spec.views; ++v) {
      const std::size_t off = spec.block_offset(cls, v);
      for (std::size_t k = 0; k < spec.view_dim; ++k) x[off + k] += strength[v] * amp;
    }
  }
  if (spec.drop_view) drop_view(spec, *spec.drop_view, data);
  return data;
}

void drop_view(const MultiViewSpec& spec, std::size_t view, Dataset& data) {
  if (view >= spec.views) throw std::invalid_argument("drop_view: view out of range");
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.splits[r] != Split::test) continue;
    auto x = data.inputs.row(r);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const std::size_t off = spec.block_offset(c, view);
      for (std::size_t k = 0; k < spec.view_dim; ++k) x[off + k] = 0.0;
    }
  }
}

Dataset load_csv_dataset(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  if (!(options.val_fraction >= 0.0 && options.test_fraction >= 0.0 &&
        options.val_fraction + options.test_fraction <= 1.0))
    throw std::invalid_argument("csv: split fractions must be ≥ 0 and sum to at most 1");

  std::vector<double> values;
  std::vector<int> labels;
  std::optional<std::size_t> width;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (first_content) {
      first_content = false;
      if (!parse_double(fields.front())) continue;  // header
    }
    if (fields.size() < 2) csv_error(path, line_no, "expected a label and at least one feature");
    if (width && fields.size() - 1 != *width)
      csv_error(path, line_no, "row has " + std::to_string(fields.size() - 1) + " features, expected " +
                                   std::to_string(*width));
    width = fields.size() - 1;
    const auto label = parse_long(fields[0]);
    if (!label) csv_error(path, line_no, "label '" + std::string(fields[0]) + "' is not an integer");
    if (*label < 0) csv_error(path, line_no, "label " + std::to_string(*label) + " is negative");
    if (options.num_classes && static_cast<std::size_t>(*label) >= *options.num_classes)
      csv_error(path, line_no, "label " + std::to_string(*label) + " out of range [0," +
                                   std::to_string(*options.num_classes) + ")");
    labels.push_back(static_cast<int>(*label));
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto v = parse_double(fields[k]);
      if (!v || !std::isfinite(*v))
        csv_error(path, line_no, "field " + std::to_string(k + 1) + " ('" + std::string(fields[k]) +
                                     "') is not a finite number");
      values.push_back(*v);
    }
  }
  if (labels.empty()) throw std::runtime_error(path.string() + ": no data rows");

  Dataset data;
  data.inputs = Matrix(labels.size(), *width, std::move(values));
  data.labels = std::move(labels);
  if (options.num_classes) {
    data.num_classes = *options.num_classes;
  } else {
    data.num_classes = static_cast<std::size_t>(*std::max_element(data.labels.begin(), data.labels.end())) + 1;
  }

  const std::size_t n = data.size();
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * options.val_fraction));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * options.test_fraction));
  if (n_val + n_test > n) throw std::invalid_argument("csv: split fractions leave no rows");
  Rng rng(options.seed, kSplitStream);
  const std::vector<std::size_t> perm = rng.permutation(n);
  data.splits.assign(n, Split::train);
  for (std::size_t k = 0; k < n_val; ++k) data.splits[perm[k]] = Split::val;
  for (std::size_t k = n_val; k < n_val + n_test; ++k) data.splits[perm[k]] = Split::test;
  return data;
}

void write_csv_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << data.labels[r];
    for (double v : data.inputs.row(r)) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace fwgd
