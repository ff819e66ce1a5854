#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mhbt/error.hpp"

namespace mhbt {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable set of n fixed-width records, row-major, with optional class labels.
template <typename Scalar = double>
class Dataset {
 public:
  using Matrix = RowMatrix<Scalar>;

  explicit Dataset(Matrix features, std::optional<std::vector<int>> labels = std::nullopt)
      : features_(std::move(features)), labels_(std::move(labels)) {
    detail::require(features_.rows() >= 1, "Dataset: at least one record required");
    detail::require(features_.cols() >= 1, "Dataset: records must have width >= 1");
    if (labels_) {
      detail::require(static_cast<Eigen::Index>(labels_->size()) == features_.rows(),
                      detail::size_mismatch("Dataset labels", features_.rows(),
                                            static_cast<long>(labels_->size())));
      for (int y : *labels_) detail::require(y >= 0, "Dataset: labels must be non-negative");
    }
  }

  Eigen::Index size() const { return features_.rows(); }
  Eigen::Index width() const { return features_.cols(); }

  auto row(Eigen::Index i) const { return features_.row(i); }
  const Matrix& features() const { return features_; }

  bool has_labels() const { return labels_.has_value(); }
  int label(Eigen::Index i) const { return (*labels_)[static_cast<std::size_t>(i)]; }
  const std::vector<int>& labels() const { return *labels_; }

  /// Largest label + 1, or 0 when unlabeled.
  int label_count() const {
    if (!labels_) return 0;
    int k = 0;
    for (int y : *labels_) k = std::max(k, y + 1);
    return k;
  }

  bool operator==(const Dataset& other) const {
    return features_ == other.features_ && labels_ == other.labels_;
  }

 private:
  Matrix features_;
  std::optional<std::vector<int>> labels_;
};

/// CSV with header `x0,...,x{p-1}[,label]`, 17 significant digits.
template <typename Scalar>
void write_csv(std::ostream& out, const Dataset<Scalar>& data) {
  for (Eigen::Index j = 0; j < data.width(); ++j) out << (j ? "," : "") << 'x' << j;
  if (data.has_labels()) out << ",label";
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.width(); ++j) out << (j ? "," : "") << data.row(i)(j);
    if (data.has_labels()) out << ',' << data.label(i);
    out << '\n';
  }
}

template <typename Scalar>
void write_csv(const std::string& path, const Dataset<Scalar>& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_csv(out, data);
  if (!out) throw IoError("write failed: " + path);
}

template <typename Scalar = double>
Dataset<Scalar> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset CSV: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const bool labeled = !header.empty() && header.back() == "label";
  const std::size_t width = header.size() - (labeled ? 1 : 0);
  for (std::size_t j = 0; j < width; ++j) {
    if (header[j] != "x" + std::to_string(j))
      throw IoError("dataset CSV: unexpected header column '" + header[j] + "'");
  }
  if (width == 0) throw IoError("dataset CSV: no feature columns");

  std::vector<Scalar> values;
  std::vector<int> labels;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (col < width) {
          values.push_back(static_cast<Scalar>(std::stod(cell)));
        } else if (labeled && col == width) {
          labels.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw IoError("dataset CSV: bad value '" + cell + "' on data row " + std::to_string(rows));
      }
      ++col;
    }
    if (col != header.size())
      throw IoError("dataset CSV: row " + std::to_string(rows) + " has " + std::to_string(col) +
                    " columns, header has " + std::to_string(header.size()));
    ++rows;
  }
  RowMatrix<Scalar> features(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  std::copy(values.begin(), values.end(), features.data());
  if (labeled) return Dataset<Scalar>(std::move(features), std::move(labels));
  return Dataset<Scalar>(std::move(features));
}

template <typename Scalar = double>
Dataset<Scalar> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  return read_csv<Scalar>(in);
}

}  // namespace mhbt
