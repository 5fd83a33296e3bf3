#pragma once

// Stage 2 readout: per-view softmax probabilities fused by one of three
// strategies, plus the audit record of a two-stage prediction.

#include "profpipe/classifier_bank.hpp"
#include "profpipe/multitask.hpp"
#include "profpipe/recognizer.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace profpipe {

enum class Strategy { EgoOnly, ExoAverage, Combined };

inline constexpr std::array<Strategy, 3> kAllStrategies = {Strategy::EgoOnly, Strategy::ExoAverage,
                                                          Strategy::Combined};

/// Column names: "ego", "exo", "combined".
std::string_view name_of(Strategy s);
/// Also accepts "ego-only" and "exo-average".
Strategy strategy_from_name(std::string_view name);

using ProbVector = Eigen::Matrix<double, kNumProficiency, 1>;
using ViewProbabilities = std::map<View, ProbVector>;

inline constexpr double kSimplexTolerance = 1e-9;

/// Entries >= 0 and sum within kSimplexTolerance of 1.
bool is_simplex(const Eigen::Ref<const Eigen::VectorXd>& p, double tol = kSimplexTolerance);

/// ego-only: p_ego; exo-average: mean of the four exo vectors;
/// combined: mean of all five.
ProbVector aggregate(const ViewProbabilities& probs, Strategy strategy);

struct Readout {
  std::string name;
  Eigen::VectorXd probabilities;
  int label = 0;

  bool operator==(const Readout&) const = default;
};

struct PredictionRecord {
  std::string sample_id;
  std::string method;  // "two-stage" or "multitask"
  Scenario scenario = Scenario::Dance;  // ground truth
  Proficiency proficiency = Proficiency::Novice;
  Scenario predicted_scenario = Scenario::Dance;
  ViewProbabilities view_probabilities;  // two-stage only
  std::vector<Readout> readouts;

  const Readout* readout(std::string_view name) const;
  const Readout& at(std::string_view name) const;
};

inline constexpr std::string_view kTwoStageMethod = "two-stage";
inline constexpr std::string_view kMultiTaskMethod = "multitask";

/// (1) recognise scenario, (2) route each view to its (s, v) cell,
/// (3) softmax, (4) aggregate; every strategy is read out from one pass and
/// the requested one is returned.
std::pair<Proficiency, PredictionRecord> predict_two_stage(const ClassifierBank& bank,
                                                           const ScenarioRecognizer& recognizer,
                                                           const MultiViewClip& clip,
                                                           Strategy strategy = Strategy::Combined);

/// Record with one readout named "multitask".
PredictionRecord predict_multitask_record(const MultiTaskModel<Real>& model, const MultiViewClip& clip);

std::vector<PredictionRecord> predict_manifest(const ClassifierBank& bank, const ScenarioRecognizer& recognizer,
                                               const DatasetManifest& manifest, const ClipLoader& loader);
std::vector<PredictionRecord> predict_manifest(const MultiTaskModel<Real>& model, const DatasetManifest& manifest,
                                               const ClipLoader& loader);

nlohmann::json to_json(const PredictionRecord& record);
PredictionRecord record_from_json(const nlohmann::json& j);

std::string records_to_jsonl(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> records_from_jsonl(std::string_view text);

}  // namespace profpipe
