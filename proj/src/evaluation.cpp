#include "profpipe/evaluation.hpp"

#include "profpipe/container.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace profpipe {

namespace fs = std::filesystem;

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("top1_accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw ValidationError("top1_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::optional<double> Tally::accuracy() const {
  if (n == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(n);
}

const ReadoutReport& EvalReport::column(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw ValidationError("report has no column '" + std::string(name) + "'");
}

ReadoutReport per_scenario_report(const std::vector<PredictionRecord>& records, std::string_view readout) {
  ReadoutReport r;
  r.name = readout;
  for (const auto& rec : records) {
    const bool hit = rec.at(readout).label == index_of(rec.proficiency);
    auto& t = r.per_scenario[index_of(rec.scenario)];
    ++t.n;
    t.correct += hit ? 1 : 0;
    ++r.overall.n;
    r.overall.correct += hit ? 1 : 0;
  }
  return r;
}

EvalReport evaluate_records(const std::vector<PredictionRecord>& records, const std::vector<std::string>& readouts) {
  if (records.empty()) throw ValidationError("no prediction records to evaluate");
  EvalReport report;
  for (const auto& name : readouts) report.columns.push_back(per_scenario_report(records, name));
  for (const auto& rec : records) report.sample_ids.push_back(rec.sample_id);
  std::sort(report.sample_ids.begin(), report.sample_ids.end());
  const auto dup = std::adjacent_find(report.sample_ids.begin(), report.sample_ids.end());
  if (dup != report.sample_ids.end()) throw ValidationError("duplicate sample_id '" + *dup + "' in records");
  return report;
}

std::string format_percent(std::optional<double> accuracy) {
  if (!accuracy) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *accuracy);
  return buf;
}

std::string format_delta(double points) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", points);
  std::string s = buf;
  if (s == "+0.0" || s == "-0.0") return "0.0";
  return s;
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "scenario";
  for (const auto& c : report.columns) out += "," + c.name;
  out += '\n';
  for (const auto s : kReportOrder) {
    out += display_name(s);
    for (const auto& c : report.columns) out += "," + format_percent(c.accuracy(s));
    out += '\n';
  }
  out += "Overall";
  for (const auto& c : report.columns) out += "," + format_percent(c.overall.accuracy());
  out += '\n';
  return out;
}

namespace {

void check_same_samples(const EvalReport& a, const EvalReport& b) {
  std::vector<std::string> only_a, only_b;
  std::set_difference(a.sample_ids.begin(), a.sample_ids.end(), b.sample_ids.begin(), b.sample_ids.end(),
                      std::back_inserter(only_a));
  std::set_difference(b.sample_ids.begin(), b.sample_ids.end(), a.sample_ids.begin(), a.sample_ids.end(),
                      std::back_inserter(only_b));
  if (only_a.empty() && only_b.empty()) return;
  std::string msg = "reports cover different evaluation sets;";
  if (!only_a.empty()) {
    msg += " only in Method 1:";
    for (const auto& id : only_a) msg += " " + id;
    msg += ";";
  }
  if (!only_b.empty()) {
    msg += " only in Method 2:";
    for (const auto& id : only_b) msg += " " + id;
  }
  throw ValidationError(msg);
}

// One table row: label plus the tallies of every column.
std::string comparison_row(std::string_view label, const std::optional<double>& m1,
                           const std::vector<std::optional<double>>& m2) {
  std::optional<double> best;
  for (const auto& a : m2) {
    if (a && (!best || *a > *best)) best = a;
  }
  std::string row = "| " + std::string(label) + " | " + format_percent(m1) + " |";
  for (const auto& a : m2) {
    const auto cell = format_percent(a);
    // Bold on the rendered value so ties in the table are bolded together.
    const bool is_best = a && best && format_percent(a) == format_percent(best);
    row += " " + (is_best ? "**" + cell + "**" : cell) + " |";
  }
  for (const auto& a : m2) {
    row += " " + ((a && m1) ? format_delta(100.0 * (*a - *m1)) : std::string("n/a")) + " |";
  }
  return row + "\n";
}

}  // namespace

std::string compare_methods(const EvalReport& m1, const EvalReport& m2) {
  if (m1.columns.empty() || m2.columns.empty()) throw ValidationError("compare_methods: empty report");
  check_same_samples(m1, m2);
  const auto& base = m1.columns.front();

  std::string out = "| Scenario | Method 1 |";
  for (const auto& c : m2.columns) out += " Method 2 " + c.name + " |";
  for (const auto& c : m2.columns) out += " Δ " + c.name + " |";
  out += "\n|---|---:|";
  for (std::size_t i = 0; i < 2 * m2.columns.size(); ++i) out += "---:|";
  out += "\n";

  for (const auto s : kReportOrder) {
    std::vector<std::optional<double>> m2_acc;
    for (const auto& c : m2.columns) m2_acc.push_back(c.accuracy(s));
    out += comparison_row(display_name(s), base.accuracy(s), m2_acc);
  }
  std::vector<std::optional<double>> m2_overall;
  for (const auto& c : m2.columns) m2_overall.push_back(c.overall.accuracy());
  out += comparison_row("Overall", base.overall.accuracy(), m2_overall);
  out += "\nDeltas are Method 2 minus Method 1 in percentage points over " + std::to_string(m1.sample_ids.size()) +
         " samples.\n";
  return out;
}

LossCurves mean_curves(const std::vector<const LossCurves*>& curves) {
  if (curves.empty()) throw ValidationError("mean_curves: no curves");
  const std::size_t epochs = curves.front()->size();
  LossCurves out;
  for (std::size_t e = 0; e < epochs; ++e) {
    EpochRecord rec;
    rec.epoch = static_cast<int>(e + 1);
    double val = 0.0;
    bool has_val = true;
    for (const auto* c : curves) {
      if (c->size() != epochs) throw ValidationError("mean_curves: curves differ in length");
      const auto& r = c->epochs[e];
      rec.train_total += r.train_total;
      if (r.val_total) {
        val += *r.val_total;
      } else {
        has_val = false;
      }
    }
    const auto k = static_cast<double>(curves.size());
    rec.train_total /= k;
    if (has_val) rec.val_total = val / k;
    out.epochs.push_back(rec);
  }
  return out;
}

LossCurveFiles emit_loss_curves(const LossCurves& curves, const fs::path& stem) {
  if (curves.empty()) throw ValidationError("emit_loss_curves: no epochs recorded");
  LossCurveFiles files;
  files.csv = fs::path(stem).replace_extension(".csv");
  write_text_file(files.csv, loss_curves_to_csv(curves));
  if (loss_plot_supported()) {
    files.png = fs::path(stem).replace_extension(".png");
    render_loss_plot(curves, *files.png);
  }
  return files;
}

}  // namespace profpipe
