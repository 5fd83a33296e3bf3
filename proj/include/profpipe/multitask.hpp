#pragma once

// Joint proficiency + scenario model over all five views.
//
//   L = alpha * CE(W_prof f + b_prof, y_prof) + (1 - alpha) * CE(W_scen f + b_scen, y_scen)
//
// where f is the temporal-mean-pooled encoder output.

#include "profpipe/classifier.hpp"
#include "profpipe/features.hpp"
#include "profpipe/training.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <utility>

namespace profpipe {

enum class ViewFusion {
  MeanOfPooledViews,  // average the five pooled vectors, one forward per clip
  ViewsAsSamples,     // every view is a sample; inference averages logits
};

std::string_view name_of(ViewFusion fusion);
ViewFusion view_fusion_from_name(std::string_view name);

inline constexpr int kMultiTaskFrames = 8;

struct MultiTaskLossParts {
  double total = 0.0;
  double l_prof = 0.0;
  double l_scen = 0.0;
  double alpha = 0.5;
};

/// total = alpha * CE(prof) + (1 - alpha) * CE(scen).
MultiTaskLossParts multitask_loss(const Vector<double>& logits_prof, int y_prof, const Vector<double>& logits_scen,
                                  int y_scen, double alpha = 0.5);

struct MultiTaskLogits {
  Vector<double> proficiency;  // 4
  Vector<double> scenario;     // 6
};

/// Five interpolated, preprocessed view stacks of one clip.
struct MultiTaskSample {
  std::array<FrameMatrix, kNumViews> views;
  int proficiency = 0;
  int scenario = 0;
};

MultiTaskSample prepare_multitask_sample(const MultiViewClip& clip, const EncoderConfig& cfg,
                                         int frames = kMultiTaskFrames);

template <typename Scalar>
class MultiTaskModel {
 public:
  MultiTaskModel() = default;
  MultiTaskModel(const EncoderConfig& cfg, ViewFusion fusion) : encoder_(cfg), fusion_(fusion) {
    Engine engine(derive_seed(cfg.seed, "multitask-heads"));
    prof_ = LinearHead<Scalar>("head_prof", kNumProficiency, cfg.feature_dim, engine);
    scen_ = LinearHead<Scalar>("head_scen", kNumScenarios, cfg.feature_dim, engine);
  }

  Encoder<Scalar>& encoder() { return encoder_; }
  const Encoder<Scalar>& encoder() const { return encoder_; }
  LinearHead<Scalar>& prof_head() { return prof_; }
  const LinearHead<Scalar>& prof_head() const { return prof_; }
  LinearHead<Scalar>& scen_head() { return scen_; }
  const LinearHead<Scalar>& scen_head() const { return scen_; }
  ViewFusion fusion() const { return fusion_; }

  void collect(ParameterRefs<Scalar>& out) {
    encoder_.collect(out);
    prof_.collect(out);
    scen_.collect(out);
  }

  ParameterRefs<Scalar> parameters() {
    ParameterRefs<Scalar> out;
    collect(out);
    return out;
  }

  /// Per-view pooled vectors, kNumViews x D.
  Matrix<Scalar> pooled_views(const MultiTaskSample& sample) const {
    std::vector<const FrameMatrix*> stacks;
    for (const auto& v : sample.views) stacks.push_back(&v);
    const Matrix<Scalar> x = stack_frames<Scalar>(stacks);
    const auto frames = sample.views.front().rows();
    return block_mean_rows(Matrix<Scalar>(encoder_.forward(x, frames)), frames);
  }

  MultiTaskLogits forward(const MultiTaskSample& sample) const {
    const Matrix<Scalar> pooled = pooled_views(sample);
    if (fusion_ == ViewFusion::MeanOfPooledViews) {
      const Vector<Scalar> f = pooled.colwise().mean().transpose();
      return {prof_.forward(f).template cast<double>(), scen_.forward(f).template cast<double>()};
    }
    const Matrix<Scalar> lp = prof_.forward(pooled);
    const Matrix<Scalar> ls = scen_.forward(pooled);
    return {lp.colwise().mean().transpose().template cast<double>(),
            ls.colwise().mean().transpose().template cast<double>()};
  }

 private:
  Encoder<Scalar> encoder_;
  LinearHead<Scalar> prof_;
  LinearHead<Scalar> scen_;
  ViewFusion fusion_ = ViewFusion::MeanOfPooledViews;
};

/// Batch objective with per-sample weights 1/n; under views-as-samples every
/// view counts as its own sample (weights 1/(5n)).
template <typename Scalar>
LossParts multitask_batch_loss(MultiTaskModel<Scalar>& model, std::span<const MultiTaskSample* const> batch,
                               bool with_grad, double alpha) {
  const Eigen::Index frames = batch.front()->views.front().rows();
  const Eigen::Index per_clip = frames * kNumViews;
  std::vector<const FrameMatrix*> stacks;
  for (const auto* s : batch) {
    for (const auto& v : s->views) {
      if (v.rows() != frames) throw ValidationError("batch mixes stacks of different lengths");
      stacks.push_back(&v);
    }
  }
  const Matrix<Scalar> x = stack_frames<Scalar>(stacks);
  typename Encoder<Scalar>::Tape tape;
  const Matrix<Scalar> f = model.encoder().forward(x, frames, with_grad ? &tape : nullptr);

  const bool mean_views = model.fusion() == ViewFusion::MeanOfPooledViews;
  // Rows of `pooled` are the units the heads see: clips or views.
  const Matrix<Scalar> pooled = block_mean_rows(f, mean_views ? per_clip : frames);
  const Eigen::Index units = pooled.rows();
  const Matrix<Scalar> lp = model.prof_head().forward(pooled);
  const Matrix<Scalar> ls = model.scen_head().forward(pooled);

  double sum_prof = 0.0, sum_scen = 0.0;
  Matrix<Scalar> d_lp(units, lp.cols()), d_ls(units, ls.cols());
  for (Eigen::Index u = 0; u < units; ++u) {
    const auto* s = batch[static_cast<std::size_t>(mean_views ? u : u / kNumViews)];
    const Vector<double> rp = lp.row(u).transpose().template cast<double>();
    const Vector<double> rs = ls.row(u).transpose().template cast<double>();
    sum_prof += cross_entropy(rp, s->proficiency);
    sum_scen += cross_entropy(rs, s->scenario);
    if (with_grad) {
      const double w = 1.0 / static_cast<double>(units);
      d_lp.row(u) = (alpha * w * cross_entropy_grad(rp, s->proficiency)).transpose().template cast<Scalar>();
      d_ls.row(u) = ((1.0 - alpha) * w * cross_entropy_grad(rs, s->scenario)).transpose().template cast<Scalar>();
    }
  }
  if (with_grad) {
    const Matrix<Scalar> d_pooled =
        model.prof_head().backward(pooled, d_lp) + model.scen_head().backward(pooled, d_ls);
    const Eigen::Index block = mean_views ? per_clip : frames;
    Matrix<Scalar> d_f(f.rows(), f.cols());
    for (Eigen::Index u = 0; u < units; ++u) {
      d_f.middleRows(u * block, block) = (d_pooled.row(u) / static_cast<Scalar>(block)).replicate(block, 1);
    }
    model.encoder().backward(tape, d_f);
  }
  const double l_prof = sum_prof / static_cast<double>(units);
  const double l_scen = sum_scen / static_cast<double>(units);
  return LossParts{alpha * l_prof + (1.0 - alpha) * l_scen, l_prof, l_scen};
}

template <typename Scalar>
LossCurves train_multitask(MultiTaskModel<Scalar>& model, std::span<const MultiTaskSample> train,
                           std::span<const MultiTaskSample> val, const TrainConfig& cfg) {
  const double alpha = cfg.alpha;
  return train_model<Scalar>(model, train, val, cfg,
                             [alpha](MultiTaskModel<Scalar>& m, std::span<const MultiTaskSample* const> b, bool g) {
                               return multitask_batch_loss(m, b, g, alpha);
                             });
}

/// Five views sampled (interpolated), preprocessed, encoded, pooled, fused.
template <typename Scalar>
MultiTaskLogits multitask_forward(const MultiTaskModel<Scalar>& model, const MultiViewClip& clip) {
  return model.forward(prepare_multitask_sample(clip, model.encoder().config()));
}

/// Argmax of each head, lowest class id on ties.
template <typename Scalar>
std::pair<Proficiency, Scenario> predict_multitask(const MultiTaskModel<Scalar>& model, const MultiViewClip& clip) {
  const auto logits = multitask_forward(model, clip);
  return {proficiency_from_id(argmax(logits.proficiency)), scenario_from_id(argmax(logits.scenario))};
}

void save_multitask(const std::filesystem::path& path, MultiTaskModel<Real>& model, const TrainConfig& train);
MultiTaskModel<Real> load_multitask(const std::filesystem::path& path, TrainConfig* train = nullptr);

}  // namespace profpipe
