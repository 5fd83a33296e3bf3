#include "profpipe/fusion.hpp"

#include <sstream>

namespace profpipe {

using nlohmann::json;

std::string_view name_of(Strategy s) {
  switch (s) {
    case Strategy::EgoOnly:
      return "ego";
    case Strategy::ExoAverage:
      return "exo";
    case Strategy::Combined:
      return "combined";
  }
  return "combined";
}

Strategy strategy_from_name(std::string_view name) {
  if (name == "ego" || name == "ego-only") return Strategy::EgoOnly;
  if (name == "exo" || name == "exo-average") return Strategy::ExoAverage;
  if (name == "combined") return Strategy::Combined;
  throw ValidationError("unknown aggregation strategy '" + std::string(name) + "'");
}

bool is_simplex(const Eigen::Ref<const Eigen::VectorXd>& p, double tol) {
  return p.size() > 0 && p.allFinite() && (p.array() >= 0.0).all() && std::abs(p.sum() - 1.0) <= tol;
}

ProbVector aggregate(const ViewProbabilities& probs, Strategy strategy) {
  for (const auto v : kAllViews) {
    const auto it = probs.find(v);
    if (it == probs.end()) throw ValidationError("missing probabilities for view " + std::string(name_of(v)));
    if (!is_simplex(it->second)) {
      throw ValidationError("malformed simplex vector for view " + std::string(name_of(v)));
    }
  }
  const ProbVector& ego = probs.at(View::Ego);
  ProbVector exo_sum = ProbVector::Zero();
  for (const auto v : kExoViews) exo_sum += probs.at(v);

  switch (strategy) {
    case Strategy::EgoOnly:
      return ego;
    case Strategy::ExoAverage:
      return exo_sum / static_cast<double>(kNumExoViews);
    case Strategy::Combined:
      return (ego + exo_sum) / static_cast<double>(kNumViews);
  }
  return ego;
}

const Readout* PredictionRecord::readout(std::string_view name) const {
  for (const auto& r : readouts) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const Readout& PredictionRecord::at(std::string_view name) const {
  const auto* r = readout(name);
  if (r == nullptr) throw ValidationError("record '" + sample_id + "' has no readout '" + std::string(name) + "'");
  return *r;
}

std::pair<Proficiency, PredictionRecord> predict_two_stage(const ClassifierBank& bank,
                                                           const ScenarioRecognizer& recognizer,
                                                           const MultiViewClip& clip, Strategy strategy) {
  PredictionRecord record;
  record.sample_id = clip.sample_id;
  record.method = kTwoStageMethod;
  record.scenario = clip.scenario;
  record.proficiency = clip.proficiency;

  const Scenario s = recognizer.recognize(clip);
  record.predicted_scenario = s;
  for (const auto v : kAllViews) {
    record.view_probabilities[v] = softmax<double>(bank.classify_view(s, v, clip.stream(v)));
  }
  for (const auto st : kAllStrategies) {
    const ProbVector p = aggregate(record.view_probabilities, st);
    record.readouts.push_back({std::string(name_of(st)), p, argmax(p)});
  }
  const auto& chosen = record.at(name_of(strategy));
  return {proficiency_from_id(chosen.label), std::move(record)};
}

PredictionRecord predict_multitask_record(const MultiTaskModel<Real>& model, const MultiViewClip& clip) {
  const auto logits = multitask_forward(model, clip);
  PredictionRecord record;
  record.sample_id = clip.sample_id;
  record.method = kMultiTaskMethod;
  record.scenario = clip.scenario;
  record.proficiency = clip.proficiency;
  record.predicted_scenario = scenario_from_id(argmax(logits.scenario));
  const Eigen::VectorXd p = softmax<double>(logits.proficiency);
  record.readouts.push_back({std::string(kMultiTaskMethod), p, argmax(logits.proficiency)});
  return record;
}

std::vector<PredictionRecord> predict_manifest(const ClassifierBank& bank, const ScenarioRecognizer& recognizer,
                                               const DatasetManifest& manifest, const ClipLoader& loader) {
  std::vector<PredictionRecord> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries) out.push_back(predict_two_stage(bank, recognizer, loader(e)).second);
  return out;
}

std::vector<PredictionRecord> predict_manifest(const MultiTaskModel<Real>& model, const DatasetManifest& manifest,
                                               const ClipLoader& loader) {
  std::vector<PredictionRecord> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries) out.push_back(predict_multitask_record(model, loader(e)));
  return out;
}

namespace {

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

}  // namespace

json to_json(const PredictionRecord& r) {
  json views = json::object();
  for (const auto& [v, p] : r.view_probabilities) views[std::string(name_of(v))] = vector_json(p);
  json fused = json::object();
  json labels = json::object();
  for (const auto& ro : r.readouts) {
    fused[ro.name] = vector_json(ro.probabilities);
    labels[ro.name] = ro.label;
  }
  return {{"sample_id", r.sample_id},
          {"method", r.method},
          {"scenario", index_of(r.scenario)},
          {"proficiency", index_of(r.proficiency)},
          {"predicted_scenario", index_of(r.predicted_scenario)},
          {"view_probs", views},
          {"fused", fused},
          {"label", labels}};
}

PredictionRecord record_from_json(const json& j) {
  PredictionRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.method = j.value("method", std::string(kTwoStageMethod));
    r.scenario = scenario_from_id(j.at("scenario").get<int>());
    r.proficiency = proficiency_from_id(j.at("proficiency").get<int>());
    r.predicted_scenario = scenario_from_id(j.at("predicted_scenario").get<int>());
    if (j.contains("view_probs")) {
      for (const auto& [view, p] : j.at("view_probs").items()) {
        const Eigen::VectorXd v = vector_from(p);
        if (v.size() != kNumProficiency || !is_simplex(v)) {
          throw ValidationError("record '" + r.sample_id + "': view '" + view + "' is not a 4-simplex vector");
        }
        r.view_probabilities[view_from_name(view)] = v;
      }
    }
    const auto& labels = j.at("label");
    for (const auto& [name, p] : j.at("fused").items()) {
      Readout ro{name, vector_from(p), labels.at(name).get<int>()};
      if (!is_simplex(ro.probabilities)) {
        throw ValidationError("record '" + r.sample_id + "': fused '" + name + "' is not a simplex vector");
      }
      if (ro.label < 0 || ro.label >= ro.probabilities.size()) {
        throw ValidationError("record '" + r.sample_id + "': label out of range for '" + name + "'");
      }
      r.readouts.push_back(std::move(ro));
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed prediction record: " + std::string(e.what()));
  }
  return r;
}

std::string records_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> records_from_jsonl(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError("prediction line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace profpipe
