#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fwgd/linalg.hpp"

namespace fwgd {

enum class Split : std::uint8_t { train, val, test };

struct Dataset {
  Matrix inputs;  ///< N×d
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<Split> splits;  ///< one tag per row

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return inputs.cols(); }
  Dataset subset(Split which) const;
  std::size_t count(Split which) const;
  /// Shapes agree, labels in range, every class present in the training rows.
  void validate() const;
};

/// Synthetic data in which each class is carried by several disjoint "views".
///
/// Each (class, view) pair owns a block of `view_dim` input coordinates and a
/// unit signal vector spread evenly over that block. A sample of class c is
/// Σ_v s_v · signal(c, v) + N(0, noise² I). Strengths are drawn from
/// [strength_low, strength_high]; with probability `single_view_fraction` one
/// view (chosen uniformly) is attenuated by `weak_factor`.
struct MultiViewSpec {
  std::size_t classes = 4;
  std::size_t views = 2;
  std::size_t view_dim = 4;
  std::size_t input_dim = 40;  ///< ≥ classes·views·view_dim; the rest is pure noise
  double noise = 0.5;
  double strength_low = 0.5;
  double strength_high = 1.5;
  double single_view_fraction = 0.3;
  double weak_factor = 0.1;
  /// Test-time corruption: zero every coordinate of this view.
  std::optional<std::size_t> drop_view;

  std::size_t signal_dims() const { return classes * views * view_dim; }
  /// First input coordinate of the (class, view) block.
  std::size_t block_offset(std::size_t cls, std::size_t view) const {
    return (cls * views + view) * view_dim;
  }
  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::size_t total() const { return train + val + test; }
};

/// Rows are ordered train, val, test; labels cycle through the classes.
Dataset gen_multiview(const MultiViewSpec& spec, const SplitSizes& sizes, Rng& rng);

/// Zeroes all coordinates of `view` (every class's block) in the test rows.
void drop_view(const MultiViewSpec& spec, std::size_t view, Dataset& data);

struct CsvOptions {
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Labels must lie in [0, num_classes); inferred as max label + 1 if unset.
  std::optional<std::size_t> num_classes;
};

/// Each row: integer label, then the feature values. An optional header row
/// is recognized by a non-numeric first field. Rows are assigned to splits by
/// a seeded shuffle: round(N·val) to val, round(N·test) to test, rest train.
Dataset load_csv_dataset(const std::filesystem::path& path, const CsvOptions& options = {});
/// Writes label,features rows (no header, shortest round-trip formatting).
void write_csv_dataset(const std::filesystem::path& path, const Dataset& data);

}  // namespace fwgd
