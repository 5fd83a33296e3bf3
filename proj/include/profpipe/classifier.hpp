#pragma once

// Single-stream clip classifier: encoder -> temporal mean pool -> linear head.
// Used for the per-(scenario, view) proficiency cells and the ego-view
// scenario probe.

#include "profpipe/features.hpp"
#include "profpipe/training.hpp"

#include <span>
#include <vector>

namespace profpipe {

/// A preprocessed frame stack with its training label.
struct StackSample {
  FrameMatrix frames;  // T x input_dim, already normalised
  int label = 0;
};

/// uniform sampling of `frames` frames, then resize/crop/normalise.
FrameMatrix prepare_uniform_stack(const FrameStream& stream, int frames, const EncoderConfig& cfg);

template <typename Scalar>
class ClipClassifier {
 public:
  ClipClassifier() = default;
  ClipClassifier(const EncoderConfig& cfg, int classes)
      : encoder_(cfg), head_(make_head(cfg, classes)) {}

  const Encoder<Scalar>& encoder() const { return encoder_; }
  Encoder<Scalar>& encoder() { return encoder_; }
  const LinearHead<Scalar>& head() const { return head_; }
  LinearHead<Scalar>& head() { return head_; }
  int classes() const { return head_.classes(); }
  bool fitted() const { return !encoder_.parameters().empty(); }

  /// Logits for one preprocessed stack.
  Vector<double> logits(const FrameMatrix& frames) const {
    if (!fitted()) throw UnfitModelError("classifier used before training or loading");
    const Matrix<Scalar> x = frames.cast<Scalar>();
    const Matrix<Scalar> f = encoder_.forward(x, x.rows());
    const Vector<Scalar> pooled = temporal_mean_pool(f);
    return head_.forward(pooled).template cast<double>();
  }

  void collect(ParameterRefs<Scalar>& out) {
    encoder_.collect(out);
    head_.collect(out);
  }

  ParameterRefs<Scalar> parameters() {
    ParameterRefs<Scalar> out;
    collect(out);
    return out;
  }

 private:
  static LinearHead<Scalar> make_head(const EncoderConfig& cfg, int classes) {
    Engine engine(derive_seed(cfg.seed, "head"));
    return LinearHead<Scalar>("head", classes, cfg.feature_dim, engine);
  }

  Encoder<Scalar> encoder_;
  LinearHead<Scalar> head_;
};

/// Mean cross-entropy over a batch; with_grad accumulates its gradient.
template <typename Scalar>
LossParts classifier_loss(ClipClassifier<Scalar>& model, std::span<const StackSample* const> batch,
                          bool with_grad) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  std::vector<const FrameMatrix*> stacks;
  stacks.reserve(batch.size());
  for (const auto* s : batch) stacks.push_back(&s->frames);
  const Eigen::Index frames = batch.front()->frames.rows();
  for (const auto* s : batch) {
    if (s->frames.rows() != frames) throw ValidationError("batch mixes stacks of different lengths");
  }

  const Matrix<Scalar> x = stack_frames<Scalar>(stacks);
  typename Encoder<Scalar>::Tape tape;
  const Matrix<Scalar> f = model.encoder().forward(x, frames, with_grad ? &tape : nullptr);
  const Matrix<Scalar> pooled = block_mean_rows(f, frames);
  const Matrix<Scalar> logits = model.head().forward(pooled);

  double total = 0.0;
  Matrix<Scalar> d_logits(n, logits.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector<double> row = logits.row(i).transpose().template cast<double>();
    const int label = batch[static_cast<std::size_t>(i)]->label;
    total += cross_entropy(row, label);
    if (with_grad) {
      d_logits.row(i) = (cross_entropy_grad(row, label) / static_cast<double>(n)).transpose().template cast<Scalar>();
    }
  }
  if (with_grad) {
    const Matrix<Scalar> d_pooled = model.head().backward(pooled, d_logits);
    Matrix<Scalar> d_f(f.rows(), f.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      d_f.middleRows(i * frames, frames) = (d_pooled.row(i) / static_cast<Scalar>(frames)).replicate(frames, 1);
    }
    model.encoder().backward(tape, d_f);
  }
  return LossParts{total / static_cast<double>(n), std::nullopt, std::nullopt};
}

template <typename Scalar>
LossCurves train_classifier(ClipClassifier<Scalar>& model, std::span<const StackSample> train,
                            std::span<const StackSample> val, const TrainConfig& cfg) {
  return train_model<Scalar>(model, train, val, cfg, [](ClipClassifier<Scalar>& m, std::span<const StackSample* const> b,
                                                       bool g) { return classifier_loss(m, b, g); });
}

/// Fraction of samples whose argmax logit equals the label.
template <typename Scalar>
double classifier_accuracy(const ClipClassifier<Scalar>& model, std::span<const StackSample> samples) {
  if (samples.empty()) throw ValidationError("accuracy of an empty sample set");
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (argmax(model.logits(s.frames)) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace profpipe
