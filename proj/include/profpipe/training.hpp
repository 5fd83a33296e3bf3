#pragma once

#include "profpipe/nn.hpp"
#include "profpipe/random.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace profpipe {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-2;
  int epochs = 20;
  int batch_size = 8;
  double alpha = 0.5;  // multi-task weighting only
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
void merge_json(const nlohmann::json& j, TrainConfig& cfg);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
template <typename Scalar>
class AdamW {
 public:
  AdamW(ParameterRefs<Scalar> params, double lr, double weight_decay, AdamWHyper hyper = {})
      : params_(std::move(params)), lr_(lr), wd_(weight_decay), hyper_(hyper) {
    for (const auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  /// Throws DivergenceError naming the first parameter with a non-finite gradient.
  void step() {
    for (const auto* p : params_) {
      if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
        throw ValidationError("gradient shape mismatch for '" + p->name + "'");
      }
      if (!p->grad.allFinite()) {
        throw DivergenceError("non-finite gradient in '" + p->name + "' at step " +
                              std::to_string(steps_ + 1));
      }
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<Scalar>(hyper_.beta1);
    const auto b2 = static_cast<Scalar>(hyper_.beta2);
    const auto lr = static_cast<Scalar>(lr_);
    const auto wd = static_cast<Scalar>(wd_);
    const auto eps = static_cast<Scalar>(hyper_.eps);
    const auto inv_bc1 = static_cast<Scalar>(1.0 / bc1);
    const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      const auto m_hat = m_[i].array() * inv_bc1;
      const auto v_hat = v_[i].array() * inv_bc2;
      p.value.array() -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * p.value.array());
    }
  }

  std::int64_t steps() const { return steps_; }
  const std::vector<Matrix<Scalar>>& first_moments() const { return m_; }
  const std::vector<Matrix<Scalar>>& second_moments() const { return v_; }

 private:
  ParameterRefs<Scalar> params_;
  std::vector<Matrix<Scalar>> m_, v_;
  double lr_;
  double wd_;
  AdamWHyper hyper_;
  std::int64_t steps_ = 0;
};

/// Mean loss over a batch. Sub-losses are set by multi-task objectives only.
struct LossParts {
  double total = 0.0;
  std::optional<double> prof;
  std::optional<double> scen;
};

struct EpochRecord {
  int epoch = 0;
  double train_total = 0.0;
  std::optional<double> train_prof, train_scen;
  std::optional<double> val_total, val_prof, val_scen;

  bool operator==(const EpochRecord&) const = default;
};

struct LossCurves {
  std::vector<EpochRecord> epochs;

  bool empty() const { return epochs.empty(); }
  std::size_t size() const { return epochs.size(); }
  bool operator==(const LossCurves&) const = default;
};

/// Exact column header of the loss-curve CSV.
inline constexpr std::string_view kLossCurveHeader =
    "epoch,train_total,train_prof,train_scen,val_total,val_prof,val_scen";

std::string loss_curves_to_csv(const LossCurves& curves);
LossCurves loss_curves_from_csv(std::string_view text);

/// Thrown when a loss turns non-finite; carries the epochs completed so far.
class TrainingDiverged : public DivergenceError {
 public:
  TrainingDiverged(const std::string& what, LossCurves curves)
      : DivergenceError(what), curves_(std::move(curves)) {}
  const LossCurves& curves() const { return curves_; }

 private:
  LossCurves curves_;
};

/// Shuffle order for one epoch, a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Number of optimizer steps train_model performs.
inline std::int64_t planned_steps(std::size_t n, const TrainConfig& cfg) {
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  return static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>((n + b - 1) / b);
}

/// Signature of the objective: mean loss over `batch`; accumulates parameter
/// gradients of that mean when `with_grad` is set.
template <typename Model, typename Sample>
using LossFn = std::function<LossParts(Model&, std::span<const Sample* const>, bool with_grad)>;

namespace detail {

struct Accum {
  double total = 0.0, prof = 0.0, scen = 0.0;
  std::size_t n = 0;
  bool has_sub = false;

  void add(const LossParts& l, std::size_t count) {
    total += l.total * static_cast<double>(count);
    if (l.prof && l.scen) {
      has_sub = true;
      prof += *l.prof * static_cast<double>(count);
      scen += *l.scen * static_cast<double>(count);
    }
    n += count;
  }
};

inline bool finite_parts(const LossParts& l) {
  return std::isfinite(l.total) && (!l.prof || std::isfinite(*l.prof)) &&
         (!l.scen || std::isfinite(*l.scen));
}

}  // namespace detail

/// Mean loss over `samples` without touching gradients.
template <typename Model, typename Sample, typename Fn>
LossParts evaluate_loss(Model& model, std::span<const Sample> samples, Fn&& loss_fn, int batch_size) {
  detail::Accum acc;
  std::vector<const Sample*> batch;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    batch.clear();
    const auto end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    acc.add(loss_fn(model, std::span<const Sample* const>(batch), false), batch.size());
  }
  LossParts out;
  if (acc.n == 0) return out;
  out.total = acc.total / static_cast<double>(acc.n);
  if (acc.has_sub) {
    out.prof = acc.prof / static_cast<double>(acc.n);
    out.scen = acc.scen / static_cast<double>(acc.n);
  }
  return out;
}

/// AdamW loop: epochs x ceil(n / B) steps over a (seed, epoch)-shuffled
/// order; train loss is the sample-weighted mean over the epoch's batches,
/// validation loss is evaluated once per epoch on the full val set.
template <typename Scalar, typename Model, typename Sample, typename Fn>
LossCurves train_model(Model& model, std::span<const Sample> train, std::span<const Sample> val,
                       const TrainConfig& cfg, Fn&& loss_fn) {
  cfg.validate();
  if (train.empty()) throw ValidationError("training set is empty");

  ParameterRefs<Scalar> params;
  model.collect(params);
  AdamW<Scalar> optimizer(params, cfg.learning_rate, cfg.weight_decay);

  LossCurves curves;
  std::vector<const Sample*> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), cfg.seed, epoch);
    detail::Accum acc;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
      optimizer.zero_grad();
      const LossParts loss = loss_fn(model, std::span<const Sample* const>(batch), true);
      if (!detail::finite_parts(loss)) {
        throw TrainingDiverged("non-finite training loss in epoch " + std::to_string(epoch), curves);
      }
      try {
        optimizer.step();
      } catch (const DivergenceError& e) {
        throw TrainingDiverged(e.what(), curves);
      }
      acc.add(loss, batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_total = acc.total / static_cast<double>(acc.n);
    if (acc.has_sub) {
      rec.train_prof = acc.prof / static_cast<double>(acc.n);
      rec.train_scen = acc.scen / static_cast<double>(acc.n);
    }
    if (!val.empty()) {
      const LossParts v = evaluate_loss(model, val, loss_fn, cfg.batch_size);
      if (!detail::finite_parts(v)) {
        throw TrainingDiverged("non-finite validation loss in epoch " + std::to_string(epoch), curves);
      }
      rec.val_total = v.total;
      rec.val_prof = v.prof;
      rec.val_scen = v.scen;
    }
    spdlog::debug("epoch {:>3}  train {:.6f}  val {}", epoch, rec.train_total,
                  rec.val_total ? std::to_string(*rec.val_total) : std::string("-"));
    curves.epochs.push_back(rec);
  }
  return curves;
}

}  // namespace profpipe
