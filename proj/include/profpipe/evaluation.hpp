#pragma once

// Top-1 metrics, per-scenario tables, method comparison and loss-curve output.

#include "profpipe/fusion.hpp"
#include "profpipe/training.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace profpipe {

/// Fraction of exact matches. Throws on empty or mismatched inputs.
double top1_accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Row order of the report tables.
inline constexpr std::array<Scenario, kNumScenarios> kReportOrder = {
    Scenario::Basketball, Scenario::Cooking, Scenario::Dance, Scenario::Music, Scenario::RockClimbing, Scenario::Soccer};

struct Tally {
  std::size_t n = 0;
  std::size_t correct = 0;

  /// nullopt when n == 0.
  std::optional<double> accuracy() const;
};

/// Accuracies of one readout, grouped by ground-truth scenario.
struct ReadoutReport {
  std::string name;
  std::array<Tally, kNumScenarios> per_scenario{};  // indexed by scenario id
  Tally overall;

  std::optional<double> accuracy(Scenario s) const { return per_scenario[index_of(s)].accuracy(); }
};

struct EvalReport {
  std::vector<ReadoutReport> columns;
  std::vector<std::string> sample_ids;  // sorted

  const ReadoutReport& column(std::string_view name) const;
};

/// One column for `readout`, grouped by ground-truth scenario.
ReadoutReport per_scenario_report(const std::vector<PredictionRecord>& records, std::string_view readout);

/// Columns in the given order; every record must carry every readout.
EvalReport evaluate_records(const std::vector<PredictionRecord>& records, const std::vector<std::string>& readouts);

/// `scenario,<col>...` then the six scenarios in kReportOrder and `Overall`;
/// percentages with one decimal, "n/a" for empty groups.
std::string report_to_csv(const EvalReport& report);

/// One-decimal percentage of an accuracy in [0, 1].
std::string format_percent(std::optional<double> accuracy);
/// Signed one-decimal point difference; "0.0" when it rounds to zero.
std::string format_delta(double points);

/// Markdown table of the Method 1 column against every Method 2 column with
/// deltas in points. The best Method 2 strategy of each row is bolded.
/// Throws ValidationError listing sample_ids present in only one report.
std::string compare_methods(const EvalReport& m1, const EvalReport& m2);

struct LossCurveFiles {
  std::filesystem::path csv;
  std::optional<std::filesystem::path> png;
};

/// Writes `<stem>.csv` and, when built with libpng, `<stem>.png`.
LossCurveFiles emit_loss_curves(const LossCurves& curves, const std::filesystem::path& stem);

/// Two panels (train, validation); total solid, proficiency dashed, scenario
/// dotted. Throws IoError if PNG support is unavailable or the path is unwritable.
void render_loss_plot(const LossCurves& curves, const std::filesystem::path& png_path);
bool loss_plot_supported();

/// Epoch-wise mean of several same-length curves (used for the bank).
LossCurves mean_curves(const std::vector<const LossCurves*>& curves);

}  // namespace profpipe
