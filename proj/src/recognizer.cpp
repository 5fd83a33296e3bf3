#include "profpipe/recognizer.hpp"

#include "profpipe/checkpoint.hpp"

namespace profpipe {

using nlohmann::json;

std::string_view name_of(RecognizerMode mode) {
  switch (mode) {
    case RecognizerMode::Oracle:
      return "oracle";
    case RecognizerMode::NoisyOracle:
      return "noisy-oracle";
    case RecognizerMode::TrainedProbe:
      return "trained-probe";
  }
  return "oracle";
}

RecognizerMode recognizer_mode_from_name(std::string_view name) {
  if (name == "oracle") return RecognizerMode::Oracle;
  if (name == "noisy" || name == "noisy-oracle") return RecognizerMode::NoisyOracle;
  if (name == "probe" || name == "trained-probe") return RecognizerMode::TrainedProbe;
  throw ValidationError("unknown recognizer mode '" + std::string(name) + "'");
}

ConfusionMatrix uniform_confusion(double diagonal) {
  if (!(diagonal >= 0.0 && diagonal <= 1.0)) throw ValidationError("confusion diagonal must lie in [0, 1]");
  ConfusionMatrix m = ConfusionMatrix::Constant((1.0 - diagonal) / (kNumScenarios - 1));
  m.diagonal().setConstant(diagonal);
  return m;
}

void validate_confusion(const ConfusionMatrix& confusion) {
  for (int r = 0; r < kNumScenarios; ++r) {
    if ((confusion.row(r).array() < 0.0).any() || !confusion.row(r).allFinite()) {
      throw ValidationError("confusion row " + std::to_string(r) + " has negative or non-finite entries");
    }
    if (std::abs(confusion.row(r).sum() - 1.0) > 1e-9) {
      throw ValidationError("confusion row " + std::to_string(r) + " sums to " +
                            std::to_string(confusion.row(r).sum()) + ", not 1");
    }
  }
}

ConfusionMatrix confusion_from_json(const json& j) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(kNumScenarios)) {
    throw ValidationError("confusion matrix must be a 6x6 JSON array");
  }
  ConfusionMatrix m;
  for (int r = 0; r < kNumScenarios; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(kNumScenarios)) {
      throw ValidationError("confusion matrix must be a 6x6 JSON array");
    }
    for (int c = 0; c < kNumScenarios; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) throw ValidationError("confusion entries must be numbers");
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  validate_confusion(m);
  return m;
}

json to_json(const ConfusionMatrix& confusion) {
  json rows = json::array();
  for (int r = 0; r < kNumScenarios; ++r) {
    json row = json::array();
    for (int c = 0; c < kNumScenarios; ++c) row.push_back(confusion(r, c));
    rows.push_back(row);
  }
  return rows;
}

ScenarioRecognizer::ScenarioRecognizer(RecognizerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.mode == RecognizerMode::NoisyOracle) validate_confusion(cfg_.confusion);
}

Scenario ScenarioRecognizer::recognize(const MultiViewClip& clip) const {
  switch (cfg_.mode) {
    case RecognizerMode::Oracle:
      return clip.scenario;
    case RecognizerMode::NoisyOracle: {
      Engine engine(derive_seed(derive_seed(cfg_.seed, "recognizer"), clip.sample_id));
      const double u = uniform01(engine);
      const auto row = cfg_.confusion.row(index_of(clip.scenario));
      double cumulative = 0.0;
      for (int c = 0; c < kNumScenarios; ++c) {
        cumulative += row(c);
        if (u < cumulative) return scenario_from_id(c);
      }
      // Rounding slack: fall back to the last class with mass.
      for (int c = kNumScenarios - 1; c >= 0; --c) {
        if (row(c) > 0.0) return scenario_from_id(c);
      }
      return clip.scenario;
    }
    case RecognizerMode::TrainedProbe: {
      if (!probe_) throw UnfitModelError("trained-probe recognizer used before fit_probe/load_probe");
      const auto frames = prepare_uniform_stack(clip.stream(View::Ego), probe_frames_, probe_->encoder().config());
      return scenario_from_id(argmax(probe_->logits(frames)));
    }
  }
  return clip.scenario;
}

LossCurves ScenarioRecognizer::fit_probe(const DatasetManifest& train, const ClipLoader& loader,
                                         const EncoderConfig& encoder, const TrainConfig& train_cfg, int frames) {
  std::vector<StackSample> samples;
  for (const auto& e : train.entries) {
    samples.push_back({prepare_uniform_stack(loader(e).stream(View::Ego), frames, encoder), index_of(e.scenario)});
  }
  EncoderConfig enc = encoder;
  enc.seed = derive_seed(encoder.seed, "scenario-probe");
  ClipClassifier<Real> probe(enc, kNumScenarios);
  auto curves = train_classifier<Real>(probe, samples, {}, train_cfg);
  probe_ = std::move(probe);
  probe_frames_ = frames;
  return curves;
}

void ScenarioRecognizer::save_probe(const std::filesystem::path& path) const {
  if (!probe_) throw UnfitModelError("no trained probe to save");
  Container c;
  c.meta = {{"kind", "scenario-probe"}, {"frames", probe_frames_}, {"encoder", to_json(probe_->encoder().config())}};
  auto copy = *probe_;
  store_parameters(copy.parameters(), c);
  write_container(path, c);
}

void ScenarioRecognizer::load_probe(const std::filesystem::path& path) {
  const Container c = read_container(path);
  try {
    if (c.meta.at("kind").get<std::string>() != "scenario-probe") {
      throw CorruptContainerError(path.string() + " is not a scenario-probe checkpoint");
    }
    EncoderConfig enc;
    merge_json(c.meta.at("encoder"), enc);
    ClipClassifier<Real> probe(enc, kNumScenarios);
    restore_parameters(c, probe.parameters());
    probe_ = std::move(probe);
    probe_frames_ = c.meta.at("frames").get<int>();
  } catch (const json::exception& e) {
    throw CorruptContainerError("corrupt scenario-probe checkpoint: " + std::string(e.what()));
  }
}

}  // namespace profpipe
