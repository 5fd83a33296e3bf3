#pragma once

// Bank of per-(scenario, view) proficiency classifiers: 6 x 5 = 30 cells,
// each an independent encoder + 4-way linear head.

#include "profpipe/classifier.hpp"
#include "profpipe/dataset.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <utility>

namespace profpipe {

inline constexpr int kBankFrames = 16;
inline constexpr int kBankCells = kNumScenarios * kNumViews;

struct BankConfig {
  EncoderConfig encoder;
  TrainConfig train;
  int frames = kBankFrames;
};

nlohmann::json to_json(const BankConfig& cfg);
void merge_json(const nlohmann::json& j, BankConfig& cfg);

struct ViewClassifier {
  Scenario scenario = Scenario::Dance;
  View view = View::Ego;
  int frames = kBankFrames;
  ClipClassifier<Real> model;
};

/// Seeds of cell (s, v): functions of the configured seeds and the key only.
EncoderConfig cell_encoder_config(const BankConfig& cfg, Scenario s, View v);
TrainConfig cell_train_config(const BankConfig& cfg, Scenario s, View v);

class ClassifierBank {
 public:
  void insert(ViewClassifier classifier);
  bool contains(Scenario s, View v) const;
  std::size_t size() const;
  /// All 30 keys present.
  bool complete() const { return size() == static_cast<std::size_t>(kBankCells); }

  const ViewClassifier& cell(Scenario s, View v) const;
  ViewClassifier& cell(Scenario s, View v);

  /// Routes to cell (s, v): uniform sampling, preprocess, encode, pool, head.
  Vector<double> classify_view(Scenario s, View v, const FrameStream& stream) const;

 private:
  std::array<std::array<std::optional<ViewClassifier>, kNumViews>, kNumScenarios> cells_;
};

/// Preprocessed stacks of view v for clips of scenario s, labelled by proficiency.
std::vector<StackSample> prepare_cell_samples(const std::vector<MultiViewClip>& clips, View v, int frames,
                                              const EncoderConfig& cfg);

struct CellResult {
  ViewClassifier classifier;
  LossCurves curves;
};

/// Trains cell (s, v) on the given samples only.
CellResult train_cell(Scenario s, View v, std::span<const StackSample> train, std::span<const StackSample> val,
                      const BankConfig& cfg);

struct BankTrainingResult {
  ClassifierBank bank;
  std::map<std::pair<Scenario, View>, LossCurves> curves;
};

/// Every (s, v) cell is trained on view v of the clips whose ground-truth
/// scenario is s. Throws ValidationError naming the first empty cell.
/// `val` may be empty; it only feeds the per-cell validation curves.
BankTrainingResult train_classifier_bank(const DatasetManifest& train, const DatasetManifest& val,
                                         const ClipLoader& loader, const BankConfig& cfg);

/// Replaces cell (s, v) with one trained on `train` (entries of other
/// scenarios are ignored). Other cells are untouched.
LossCurves retrain_cell(ClassifierBank& bank, Scenario s, View v, const DatasetManifest& train,
                        const ClipLoader& loader, const BankConfig& cfg);

/// Baseline without scenario conditioning: one classifier per view trained on
/// all scenarios, installed in every scenario's slot of that view.
BankTrainingResult train_pooled_bank(const DatasetManifest& train, const DatasetManifest& val,
                                     const ClipLoader& loader, const BankConfig& cfg);

std::string cell_file_name(Scenario s, View v);
inline constexpr std::string_view kBankIndexFile = "index.json";

void save_view_classifier(const std::filesystem::path& path, const ViewClassifier& cell, const BankConfig& cfg);
ViewClassifier load_view_classifier(const std::filesystem::path& path);

/// Directory of 30 `s{scenario_id}_v{view_tag}.ckpt` files plus index.json.
void save_bank(const std::filesystem::path& dir, const ClassifierBank& bank, const BankConfig& cfg);
/// Throws IoError naming the index path when it is missing.
ClassifierBank load_bank(const std::filesystem::path& dir);

}  // namespace profpipe
