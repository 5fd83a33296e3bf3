#pragma once

// Stage 1: scenario recognition stand-in.

#include "profpipe/classifier.hpp"
#include "profpipe/dataset.hpp"

#include <filesystem>
#include <optional>

namespace profpipe {

enum class RecognizerMode { Oracle, NoisyOracle, TrainedProbe };

std::string_view name_of(RecognizerMode mode);
/// Accepts "oracle", "noisy"/"noisy-oracle", "probe"/"trained-probe".
RecognizerMode recognizer_mode_from_name(std::string_view name);

using ConfusionMatrix = Eigen::Matrix<double, kNumScenarios, kNumScenarios>;

/// `diagonal` on the diagonal, the rest of each row spread evenly.
ConfusionMatrix uniform_confusion(double diagonal);

/// Rows must be non-negative and sum to 1 within 1e-9.
void validate_confusion(const ConfusionMatrix& confusion);

/// Parses a JSON 6x6 array of arrays.
ConfusionMatrix confusion_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConfusionMatrix& confusion);

struct RecognizerConfig {
  RecognizerMode mode = RecognizerMode::Oracle;
  ConfusionMatrix confusion = uniform_confusion(0.8);
  std::uint64_t seed = 0;
};

class ScenarioRecognizer {
 public:
  explicit ScenarioRecognizer(RecognizerConfig cfg = {});

  const RecognizerConfig& config() const { return cfg_; }
  bool probe_fitted() const { return probe_.has_value(); }

  /// Oracle: ground truth. Noisy: a draw from the confusion row of the true
  /// scenario seeded by (seed, sample_id). Probe: argmax of the ego-view probe.
  Scenario recognize(const MultiViewClip& clip) const;

  /// Trains the 6-way probe on the ego view of `train`.
  LossCurves fit_probe(const DatasetManifest& train, const ClipLoader& loader, const EncoderConfig& encoder,
                       const TrainConfig& train_cfg, int frames = 16);

  void save_probe(const std::filesystem::path& path) const;
  void load_probe(const std::filesystem::path& path);

 private:
  RecognizerConfig cfg_;
  std::optional<ClipClassifier<Real>> probe_;
  int probe_frames_ = 16;
};

}  // namespace profpipe
