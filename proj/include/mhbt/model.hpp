#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "mhbt/batch.hpp"
#include "mhbt/dataset.hpp"
#include "mhbt/error.hpp"
#include "mhbt/numeric.hpp"
#include "mhbt/rng.hpp"

namespace mhbt {

/// x ~ N(theta, variance * I_d); the parameter is the mean.
///
/// With `centered` set, each record's log-likelihood is taken relative to theta = 0,
/// i.e. (theta.x - |theta|^2 / 2) / variance. The posterior and gradients are unchanged
/// but the theta-free per-record term -|x|^2 / (2 variance) no longer varies between
/// mini-batches.
template <typename Scalar = double>
struct GaussianMean {
  Eigen::Index dim = 1;
  Scalar variance = 1;
  bool centered = false;

  Eigen::Index param_dim() const { return dim; }
  Eigen::Index record_width() const { return dim; }

  void validate() const {
    detail::require_config(dim >= 1, "gaussian-mean: dim must be >= 1");
    detail::require_config(variance > 0 && std::isfinite(variance),
                           "gaussian-mean: variance must be positive");
  }

  template <typename Row>
  Scalar log_lik(const Vector<Scalar>& theta, const Eigen::MatrixBase<Row>& x, int) const {
    if (centered) return (theta.dot(x) - Scalar(0.5) * theta.squaredNorm()) / variance;
    return log_isotropic_normal(x.transpose() - theta, variance);
  }

  template <typename Row>
  void accumulate_grad(const Vector<Scalar>& theta, const Eigen::MatrixBase<Row>& x, int,
                       Scalar weight, Vector<Scalar>& out) const {
    out.noalias() += (weight / variance) * (x.transpose() - theta);
  }
};

/// x ~ 0.5 N(theta_1, sigma_x^2) + 0.5 N(theta_1 + theta_2, sigma_x^2), scalar records.
///
/// sigma1_sq and sigma2_sq parameterize the N(0, diag(sigma1^2, sigma2^2)) prior used by
/// the reference posterior only; the sampler path is flat-prior.
template <typename Scalar = double>
struct GaussianMixture2 {
  Scalar sigma_x_sq = 2;
  Scalar sigma1_sq = 10;
  Scalar sigma2_sq = 1;

  Eigen::Index param_dim() const { return 2; }
  Eigen::Index record_width() const { return 1; }

  void validate() const {
    detail::require_config(sigma_x_sq > 0 && sigma1_sq > 0 && sigma2_sq > 0,
                           "gaussian-mixture-2: variances must be positive");
  }

  /// Component log-densities (without the 0.5 weights).
  std::pair<Scalar, Scalar> component_logs(const Vector<Scalar>& theta, Scalar x) const {
    const Scalar norm = Scalar(-0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * sigma_x_sq);
    const Scalar za = x - theta(0);
    const Scalar zb = x - theta(0) - theta(1);
    return {norm - za * za / (2 * sigma_x_sq), norm - zb * zb / (2 * sigma_x_sq)};
  }

  template <typename Row>
  Scalar log_lik(const Vector<Scalar>& theta, const Eigen::MatrixBase<Row>& x, int) const {
    const auto [la, lb] = component_logs(theta, x(0));
    return log_add_exp(la, lb) - std::numbers::ln2_v<Scalar>;
  }

  template <typename Row>
  void accumulate_grad(const Vector<Scalar>& theta, const Eigen::MatrixBase<Row>& x, int,
                       Scalar weight, Vector<Scalar>& out) const {
    const auto [la, lb] = component_logs(theta, x(0));
    // responsibility of the second component, computed without overflow
    const Scalar wb = logistic(lb - la);
    const Scalar wa = Scalar(1) - wb;
    const Scalar ra = (x(0) - theta(0)) / sigma_x_sq;
    const Scalar rb = (x(0) - theta(0) - theta(1)) / sigma_x_sq;
    out(0) += weight * (wa * ra + wb * rb);
    out(1) += weight * (wb * rb);
  }
};

/// Fully connected classifier: sigmoid hidden layers, softmax output, log-likelihood
/// log p(y | x, theta) (negative cross entropy).
///
/// Parameters are packed layer by layer as [W (out x in, row-major), b (out)].
template <typename Scalar = double>
struct SoftmaxMlp {
  std::vector<Eigen::Index> widths{2, 16};  ///< input width followed by hidden widths
  Eigen::Index classes = 3;

  struct Layer {
    Eigen::Index in, out, offset;
  };

  std::vector<Layer> layers() const {
    std::vector<Layer> out;
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < widths.size(); ++l) {
      const Eigen::Index in = widths[l];
      const Eigen::Index o = l + 1 < widths.size() ? widths[l + 1] : classes;
      out.push_back({in, o, offset});
      offset += in * o + o;
    }
    return out;
  }

  Eigen::Index param_dim() const {
    const auto ls = layers();
    return ls.back().offset + ls.back().in * ls.back().out + ls.back().out;
  }
  Eigen::Index record_width() const { return widths.front(); }

  void validate() const {
    detail::require_config(!widths.empty(), "softmax-mlp: at least the input width is required");
    for (auto w : widths) detail::require_config(w >= 1, "softmax-mlp: widths must be >= 1");
    detail::require_config(classes >= 2, "softmax-mlp: need at least 2 classes");
  }

  using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using ConstWeights = Eigen::Map<const RowMatrix<Scalar>>;
  using ConstBias = Eigen::Map<const Vector<Scalar>>;

  static ConstWeights weights(const Vector<Scalar>& theta, const Layer& l) {
    return ConstWeights(theta.data() + l.offset, l.out, l.in);
  }
  static ConstBias bias(const Vector<Scalar>& theta, const Layer& l) {
    return ConstBias(theta.data() + l.offset + l.in * l.out, l.out);
  }

  /// Forward pass over a block of inputs (rows = records). Returns the activations of every
  /// layer (index 0 = inputs) with the final entry holding logits.
  std::vector<ColMatrix> forward(const Vector<Scalar>& theta, const ColMatrix& inputs) const {
    const auto ls = layers();
    std::vector<ColMatrix> acts;
    acts.reserve(ls.size() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < ls.size(); ++l) {
      ColMatrix z = acts.back() * weights(theta, ls[l]).transpose();
      z.rowwise() += bias(theta, ls[l]).transpose();
      if (l + 1 < ls.size()) z = z.unaryExpr([](Scalar v) { return logistic(v); });
      acts.push_back(std::move(z));
    }
    return acts;
  }

  /// Per-record log-likelihoods and, optionally, the weighted gradient sum
  /// sum_r weight * grad log p(y_r | x_r) accumulated into `grad`.
  Vector<Scalar> evaluate(const Vector<Scalar>& theta, const ColMatrix& inputs,
                          const std::vector<int>& labels, Scalar weight,
                          Vector<Scalar>* grad) const {
    const auto ls = layers();
    const auto acts = forward(theta, inputs);
    const ColMatrix& logits = acts.back();
    const Eigen::Index rows = logits.rows();
    Vector<Scalar> ll(rows);
    ColMatrix delta(rows, classes);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int y = labels[static_cast<std::size_t>(r)];
      detail::require(y >= 0 && y < classes, "softmax-mlp: label " + std::to_string(y) +
                                                 " outside [0, " + std::to_string(classes) + ")");
      const Scalar lse = log_sum_exp(logits.row(r));
      ll(r) = logits(r, y) - lse;
      if (grad) {
        delta.row(r) = -(logits.row(r).array() - lse).exp().matrix();
        delta(r, y) += Scalar(1);
      }
    }
    if (grad) {
      for (std::size_t l = ls.size(); l-- > 0;) {
        const ColMatrix& input = acts[l];
        Eigen::Map<RowMatrix<Scalar>> gw(grad->data() + ls[l].offset, ls[l].out, ls[l].in);
        Eigen::Map<Vector<Scalar>> gb(grad->data() + ls[l].offset + ls[l].in * ls[l].out,
                                      ls[l].out);
        gw.noalias() += weight * (delta.transpose() * input);
        gb.noalias() += weight * delta.colwise().sum().transpose();
        if (l > 0) {
          ColMatrix back = delta * weights(theta, ls[l]);
          delta = back.array() * input.array() * (Scalar(1) - input.array());
        }
      }
    }
    return ll;
  }

  template <typename Row>
  Scalar log_lik(const Vector<Scalar>& theta, const Eigen::MatrixBase<Row>& x, int label) const {
    ColMatrix in = x;
    return evaluate(theta, in, {label}, Scalar(1), nullptr)(0);
  }

  template <typename Row>
  void accumulate_grad(const Vector<Scalar>& theta, const Eigen::MatrixBase<Row>& x, int label,
                       Scalar weight, Vector<Scalar>& out) const {
    ColMatrix in = x;
    evaluate(theta, in, {label}, weight, &out);
  }
};

template <typename Scalar = double>
using ModelSpec = std::variant<GaussianMean<Scalar>, GaussianMixture2<Scalar>, SoftmaxMlp<Scalar>>;

template <typename Scalar>
std::string family_name(const ModelSpec<Scalar>& model) {
  switch (model.index()) {
    case 0: return "gaussian-mean";
    case 1: return "gaussian-mixture-2";
    default: return "softmax-mlp";
  }
}

template <typename Scalar>
Eigen::Index param_dim(const ModelSpec<Scalar>& model) {
  return std::visit([](const auto& m) { return m.param_dim(); }, model);
}

template <typename Scalar>
Eigen::Index record_width(const ModelSpec<Scalar>& model) {
  return std::visit([](const auto& m) { return m.record_width(); }, model);
}

template <typename Scalar>
void validate(const ModelSpec<Scalar>& model) {
  std::visit([](const auto& m) { m.validate(); }, model);
}

template <typename Scalar>
bool is_labeled_family(const ModelSpec<Scalar>& model) {
  return std::holds_alternative<SoftmaxMlp<Scalar>>(model);
}

namespace detail {

template <typename Scalar>
void check_theta(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta) {
  require(theta.size() == param_dim(model),
          size_mismatch("theta", static_cast<long>(param_dim(model)), static_cast<long>(theta.size())));
}

template <typename Scalar>
void check_data(const ModelSpec<Scalar>& model, const Dataset<Scalar>& data) {
  require(data.width() == record_width(model),
          size_mismatch("record width", static_cast<long>(record_width(model)),
                        static_cast<long>(data.width())));
  if (is_labeled_family(model)) {
    require(data.has_labels(), "softmax-mlp: dataset has no labels");
    require(data.label_count() <= std::get<SoftmaxMlp<Scalar>>(model).classes,
            "softmax-mlp: label out of range for the configured class count");
  }
}

template <typename Scalar>
void check_batch(const Dataset<Scalar>& data, const BatchIndex& batch) {
  require(!batch.empty(), "batch is empty");
  require(static_cast<Eigen::Index>(batch.view().back()) < data.size(),
          "batch index " + std::to_string(batch.view().back()) + " out of range for n = " +
              std::to_string(data.size()));
}

}  // namespace detail

namespace detail {

/// A single record as a 1 x w row, whichever orientation the caller passed.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> as_row(const Eigen::MatrixBase<Derived>& record) {
  Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> row(record.size());
  for (Eigen::Index j = 0; j < record.size(); ++j) row(j) = record(j);
  return row;
}

}  // namespace detail

/// log p(x | theta) for a single record, given as a row or a column; `label` is ignored
/// by unlabeled families.
template <typename Scalar, typename Row>
Scalar log_lik(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta,
               const Eigen::MatrixBase<Row>& record, int label = -1) {
  detail::check_theta(model, theta);
  detail::require(record.size() == record_width(model),
                  detail::size_mismatch("record width", static_cast<long>(record_width(model)),
                                        static_cast<long>(record.size())));
  const auto row = detail::as_row(record);
  return std::visit([&](const auto& m) { return m.log_lik(theta, row, label); }, model);
}

template <typename Scalar>
Scalar log_lik(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta,
               const Dataset<Scalar>& data, Eigen::Index i) {
  return log_lik(model, theta, data.row(i), data.has_labels() ? data.label(i) : -1);
}

template <typename Scalar, typename Row>
Vector<Scalar> grad_log_lik(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta,
                            const Eigen::MatrixBase<Row>& record, int label = -1) {
  detail::check_theta(model, theta);
  detail::require(record.size() == record_width(model),
                  detail::size_mismatch("record width", static_cast<long>(record_width(model)),
                                        static_cast<long>(record.size())));
  Vector<Scalar> g = Vector<Scalar>::Zero(theta.size());
  const auto row = detail::as_row(record);
  std::visit([&](const auto& m) { m.accumulate_grad(theta, row, label, Scalar(1), g); }, model);
  return g;
}

template <typename Scalar>
Vector<Scalar> grad_log_lik(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta,
                            const Dataset<Scalar>& data, Eigen::Index i) {
  return grad_log_lik(model, theta, data.row(i), data.has_labels() ? data.label(i) : -1);
}

/// Mean log-likelihood over the indexed records, record by record.
template <typename Scalar>
Scalar batch_mean_loglik(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta,
                         const Dataset<Scalar>& data, const BatchIndex& batch) {
  detail::check_theta(model, theta);
  detail::check_data(model, data);
  detail::check_batch(data, batch);
  Scalar sum = 0;
  std::visit(
      [&](const auto& m) {
        for (auto i : batch) sum += m.log_lik(theta, data.row(i), data.has_labels() ? data.label(i) : -1);
      },
      model);
  return sum / static_cast<Scalar>(batch.size());
}

template <typename Scalar>
Vector<Scalar> batch_mean_grad(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta,
                               const Dataset<Scalar>& data, const BatchIndex& batch) {
  detail::check_theta(model, theta);
  detail::check_data(model, data);
  detail::check_batch(data, batch);
  Vector<Scalar> g = Vector<Scalar>::Zero(theta.size());
  const Scalar w = Scalar(1) / static_cast<Scalar>(batch.size());
  std::visit(
      [&](const auto& m) {
        for (auto i : batch)
          m.accumulate_grad(theta, data.row(i), data.has_labels() ? data.label(i) : -1, w, g);
      },
      model);
  return g;
}

/// Mean log-likelihood and (optionally) mean gradient of one batch.
template <typename Scalar>
struct BatchEval {
  Scalar mean_loglik = 0;
  std::optional<Vector<Scalar>> mean_grad;
};

/// Binds a model to a dataset and evaluates batches along each family's fastest route.
///
/// gaussian-mean reduces a batch to its first two moments; the full-data moments are
/// precomputed so m = n evaluations cost O(d). softmax-mlp evaluates the batch as a
/// matrix. gaussian-mixture-2 loops over records.
template <typename Scalar = double>
class Likelihood {
 public:
  Likelihood(ModelSpec<Scalar> model, const Dataset<Scalar>& data)
      : model_(std::move(model)), data_(&data) {
    validate(model_);
    detail::check_data(model_, data);
    if (std::holds_alternative<GaussianMean<Scalar>>(model_)) {
      full_sum_ = data.features().colwise().sum().transpose();
      full_sq_ = data.features().rowwise().squaredNorm().sum();
    }
  }

  const ModelSpec<Scalar>& model() const { return model_; }
  const Dataset<Scalar>& data() const { return *data_; }
  Eigen::Index param_dim() const { return mhbt::param_dim(model_); }
  Eigen::Index size() const { return data_->size(); }

  BatchEval<Scalar> evaluate(const Vector<Scalar>& theta, const BatchIndex& batch,
                             bool with_grad) const {
    detail::check_theta(model_, theta);
    detail::check_batch(*data_, batch);
    return std::visit([&](const auto& m) { return evaluate_impl(m, theta, batch, with_grad); },
                      model_);
  }

 private:
  BatchEval<Scalar> evaluate_impl(const GaussianMean<Scalar>& m, const Vector<Scalar>& theta,
                                  const BatchIndex& batch, bool with_grad) const {
    const auto count = static_cast<Scalar>(batch.size());
    Vector<Scalar> sum;
    Scalar sq = 0;
    if (static_cast<Eigen::Index>(batch.size()) == data_->size()) {
      sum = full_sum_;
      sq = full_sq_;
    } else {
      sum = Vector<Scalar>::Zero(m.dim);
      const Scalar* base = data_->features().data();
      const Eigen::Index d = m.dim;
      for (auto i : batch) {
        const Eigen::Map<const Vector<Scalar>> row(base + static_cast<Eigen::Index>(i) * d, d);
        sum.noalias() += row;
        if (!m.centered) sq += row.squaredNorm();
      }
    }
    const Vector<Scalar> mean = sum / count;
    BatchEval<Scalar> out;
    const Scalar cross = theta.dot(mean) - Scalar(0.5) * theta.squaredNorm();
    if (m.centered) {
      out.mean_loglik = cross / m.variance;
    } else {
      out.mean_loglik =
          (cross - Scalar(0.5) * sq / count) / m.variance -
          Scalar(0.5) * static_cast<Scalar>(m.dim) *
              std::log(Scalar(2) * std::numbers::pi_v<Scalar> * m.variance);
    }
    if (with_grad) out.mean_grad = (mean - theta) / m.variance;
    return out;
  }

  BatchEval<Scalar> evaluate_impl(const GaussianMixture2<Scalar>& m, const Vector<Scalar>& theta,
                                  const BatchIndex& batch, bool with_grad) const {
    BatchEval<Scalar> out;
    const Scalar w = Scalar(1) / static_cast<Scalar>(batch.size());
    if (with_grad) {
      out.mean_grad = Vector<Scalar>::Zero(2);
      for (auto i : batch) m.accumulate_grad(theta, data_->row(i), -1, w, *out.mean_grad);
    }
    // Vectorized log_add_exp in stack-sized blocks; records are scalars, so the column is
    // contiguous and a full batch is read in place.
    constexpr Eigen::Index kBlock = 1024;
    using Block = Eigen::Array<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kBlock, 1>;
    const auto count = static_cast<Eigen::Index>(batch.size());
    const bool full = count == data_->size();
    const Scalar* col = data_->features().data();
    const Scalar inv = Scalar(1) / (2 * m.sigma_x_sq);
    const Scalar norm = Scalar(-0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * m.sigma_x_sq) -
                        std::numbers::ln2_v<Scalar>;
    Scalar sum = 0;
    Block x, za, zb;
    for (Eigen::Index start = 0; start < count; start += kBlock) {
      const Eigen::Index len = std::min(kBlock, count - start);
      if (full) {
        x = Eigen::Map<const Block>(col + start, len);
      } else {
        x.resize(len);
        for (Eigen::Index r = 0; r < len; ++r) x(r) = col[batch[static_cast<std::size_t>(start + r)]];
      }
      za = (x - theta(0)).square();
      zb = (x - theta(0) - theta(1)).square();
      sum += -inv * za.min(zb).sum() + ((-inv * (za - zb).abs()).exp() + Scalar(1)).log().sum();
    }
    out.mean_loglik = norm + sum * w;
    return out;
  }

  BatchEval<Scalar> evaluate_impl(const SoftmaxMlp<Scalar>& m, const Vector<Scalar>& theta,
                                  const BatchIndex& batch, bool with_grad) const {
    typename SoftmaxMlp<Scalar>::ColMatrix inputs(static_cast<Eigen::Index>(batch.size()),
                                                  data_->width());
    std::vector<int> labels(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
      inputs.row(static_cast<Eigen::Index>(r)) = data_->row(batch[r]);
      labels[r] = data_->label(batch[r]);
    }
    const Scalar w = Scalar(1) / static_cast<Scalar>(batch.size());
    BatchEval<Scalar> out;
    if (with_grad) out.mean_grad = Vector<Scalar>::Zero(theta.size());
    const Vector<Scalar> ll = m.evaluate(theta, inputs, labels, w, with_grad ? &*out.mean_grad : nullptr);
    out.mean_loglik = ll.sum() * w;
    return out;
  }

  ModelSpec<Scalar> model_;
  const Dataset<Scalar>* data_;
  Vector<Scalar> full_sum_;
  Scalar full_sq_ = 0;
};

/// n i.i.d. draws from p(. | theta_star); for softmax-mlp, inputs ~ N(0, I) and labels are
/// drawn from the network's class probabilities.
template <typename Scalar>
Dataset<Scalar> generate_data(const ModelSpec<Scalar>& model, const Vector<Scalar>& theta_star,
                              Eigen::Index n, std::uint64_t seed) {
  validate(model);
  detail::check_theta(model, theta_star);
  detail::require(n >= 1, "generate_data: n must be >= 1");
  Rng rng(seed);
  RowMatrix<Scalar> x(n, record_width(model));
  if (const auto* g = std::get_if<GaussianMean<Scalar>>(&model)) {
    const Scalar sd = std::sqrt(g->variance);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < g->dim; ++j)
        x(i, j) = theta_star(j) + sd * static_cast<Scalar>(rng.normal());
    return Dataset<Scalar>(std::move(x));
  }
  if (const auto* mix = std::get_if<GaussianMixture2<Scalar>>(&model)) {
    const Scalar sd = std::sqrt(mix->sigma_x_sq);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar center = rng.coin() ? theta_star(0) + theta_star(1) : theta_star(0);
      x(i, 0) = center + sd * static_cast<Scalar>(rng.normal());
    }
    return Dataset<Scalar>(std::move(x));
  }
  const auto& mlp = std::get<SoftmaxMlp<Scalar>>(model);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<Scalar>(rng.normal());
  typename SoftmaxMlp<Scalar>::ColMatrix inputs = x;
  const auto logits = mlp.forward(theta_star, inputs).back();
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar lse = log_sum_exp(logits.row(i));
    Scalar u = static_cast<Scalar>(rng.uniform());
    int y = 0;
    for (; y + 1 < mlp.classes; ++y) {
      u -= std::exp(logits(i, y) - lse);
      if (u < 0) break;
    }
    labels[static_cast<std::size_t>(i)] = y;
  }
  return Dataset<Scalar>(std::move(x), std::move(labels));
}

}  // namespace mhbt
