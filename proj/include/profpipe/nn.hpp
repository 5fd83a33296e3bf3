#pragma once

// Small differentiable building blocks, templated on scalar type. Gradients
// are written by hand; every backward pass accumulates into Parameter::grad.

#include "profpipe/core.hpp"
#include "profpipe/random.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace profpipe {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
using ParameterRefs = std::vector<Parameter<Scalar>*>;

/// Uniform in +-bound, drawn row-major from `engine`.
template <typename Scalar>
Matrix<Scalar> uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Engine& engine) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(uniform(engine, -bound, bound));
  return m;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

/// Numerically stable softmax: exp(x - max x) / sum.
template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  if (logits.size() == 0) throw ValidationError("softmax of an empty vector");
  if (!logits.allFinite()) throw ValidationError("softmax input contains non-finite values");
  const Scalar m = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

/// Row-wise softmax of a matrix (used by attention).
template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& x) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// log-sum-exp with max subtraction.
template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& logits) {
  const Scalar m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

/// -log softmax(logits)[label].
template <typename Scalar>
Scalar cross_entropy(const Vector<Scalar>& logits, int label) {
  if (logits.size() < 2) throw ValidationError("cross_entropy needs at least two classes");
  if (label < 0 || label >= logits.size()) {
    throw ValidationError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
  }
  if (!logits.allFinite()) throw ValidationError("cross_entropy logits contain non-finite values");
  return log_sum_exp(logits) - logits(label);
}

/// d CE / d logits = softmax(logits) - onehot(label).
template <typename Scalar>
Vector<Scalar> cross_entropy_grad(const Vector<Scalar>& logits, int label) {
  Vector<Scalar> g = softmax(logits);
  g(label) -= Scalar(1);
  return g;
}

/// Lowest index among maximal entries.
template <typename Derived>
int argmax(const Eigen::DenseBase<Derived>& x) {
  int best = 0;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    if (x(i) > x(best)) best = static_cast<int>(i);
  }
  return best;
}

/// Column means of F (T x D): the time-averaged clip representation.
template <typename Derived>
Vector<typename Derived::Scalar> temporal_mean_pool(const Eigen::MatrixBase<Derived>& features) {
  if (features.rows() == 0) throw ValidationError("temporal_mean_pool needs at least one frame");
  return features.colwise().mean().transpose();
}

/// Mean of each consecutive block of `block` rows: (n * block) x D -> n x D.
template <typename Scalar>
Matrix<Scalar> block_mean_rows(const Matrix<Scalar>& x, Eigen::Index block) {
  const Eigen::Index n = x.rows() / block;
  Matrix<Scalar> out(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = x.middleRows(i * block, block).colwise().mean();
  return out;
}

/// Affine head: logits = W f + b, W is K x D.
template <typename Scalar>
class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(std::string name, int classes, int input_dim, Engine& engine)
      : weight_(name + ".weight",
                uniform_matrix<Scalar>(classes, input_dim, 1.0 / std::sqrt(static_cast<double>(input_dim)), engine)),
        bias_(name + ".bias", Matrix<Scalar>::Zero(classes, 1)) {}

  int classes() const { return static_cast<int>(weight_.value.rows()); }
  int input_dim() const { return static_cast<int>(weight_.value.cols()); }

  /// Rows of `pooled` are samples: (n x D) -> (n x K).
  Matrix<Scalar> forward(const Matrix<Scalar>& pooled) const {
    Matrix<Scalar> out = pooled * weight_.value.transpose();
    out.rowwise() += bias_.value.col(0).transpose();
    return out;
  }

  Vector<Scalar> forward(const Vector<Scalar>& pooled) const {
    return weight_.value * pooled + bias_.value.col(0);
  }

  /// Accumulates dW, db; returns d pooled.
  Matrix<Scalar> backward(const Matrix<Scalar>& pooled, const Matrix<Scalar>& d_logits) {
    weight_.grad.noalias() += d_logits.transpose() * pooled;
    bias_.grad.col(0) += d_logits.colwise().sum().transpose();
    return d_logits * weight_.value;
  }

  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }
  const Parameter<Scalar>& weight() const { return weight_; }
  const Parameter<Scalar>& bias() const { return bias_; }

  void collect(ParameterRefs<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

}  // namespace profpipe
