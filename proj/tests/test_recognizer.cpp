#include "profpipe/recognizer.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace profpipe;
using test::TempDir;

namespace {

MultiViewClip labelled(Scenario s, int i) {
  MultiViewClip c;
  c.scenario = s;
  c.sample_id = std::string(name_of(s)) + "-" + std::to_string(i);
  return c;
}

}  // namespace

TEST_CASE("oracle returns the ground truth") {
  ScenarioRecognizer oracle;
  for (const auto s : kAllScenarios) CHECK(oracle.recognize(labelled(s, 0)) == s);
  CHECK(oracle.recognize(labelled(Scenario::Music, 3)) == Scenario::Music);
}

TEST_CASE("noisy oracle with identity confusion equals the oracle") {
  ScenarioRecognizer noisy({RecognizerMode::NoisyOracle, uniform_confusion(1.0), 3});
  for (const auto s : kAllScenarios) {
    for (int i = 0; i < 50; ++i) CHECK(noisy.recognize(labelled(s, i)) == s);
  }
}

TEST_CASE("noisy oracle follows its confusion rows") {
  const auto confusion = uniform_confusion(0.8);
  CHECK(confusion(0, 1) == doctest::Approx(0.04));
  ScenarioRecognizer noisy({RecognizerMode::NoisyOracle, confusion, 11});
  const int n = 1000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const auto s = kAllScenarios[static_cast<std::size_t>(i % kNumScenarios)];
    hits += noisy.recognize(labelled(s, i)) == s ? 1 : 0;
  }
  CHECK(std::abs(hits / static_cast<double>(n) - 0.8) <= 0.04);

  // Per-row distribution for one true class against a skewed row.
  ConfusionMatrix skew = uniform_confusion(1.0);
  skew.row(2) << 0.1, 0.2, 0.3, 0.4, 0.0, 0.0;
  ScenarioRecognizer row({RecognizerMode::NoisyOracle, skew, 12});
  std::array<int, kNumScenarios> counts{};
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(index_of(row.recognize(labelled(Scenario::Basketball, i))))];
  for (int c = 0; c < kNumScenarios; ++c) {
    const double p = skew(2, c);
    const double tol = 3.0 * std::sqrt(std::max(p * (1 - p), 1e-12) / n) + 1e-12;
    CHECK(std::abs(counts[static_cast<std::size_t>(c)] / static_cast<double>(n) - p) <= tol);
  }
}

TEST_CASE("noisy oracle is deterministic per (seed, sample_id)") {
  ScenarioRecognizer a({RecognizerMode::NoisyOracle, uniform_confusion(0.5), 1});
  ScenarioRecognizer b({RecognizerMode::NoisyOracle, uniform_confusion(0.5), 1});
  ScenarioRecognizer c({RecognizerMode::NoisyOracle, uniform_confusion(0.5), 2});
  int differ = 0;
  for (int i = 0; i < 200; ++i) {
    const auto clip = labelled(Scenario::Soccer, i);
    CHECK(a.recognize(clip) == b.recognize(clip));
    CHECK(a.recognize(clip) == a.recognize(clip));
    differ += a.recognize(clip) != c.recognize(clip) ? 1 : 0;
  }
  CHECK(differ > 0);
}

TEST_CASE("confusion validation and JSON") {
  auto bad = uniform_confusion(0.8);
  bad(1, 1) = 0.9;
  CHECK_THROWS_AS(validate_confusion(bad), ValidationError);
  CHECK_THROWS_AS(ScenarioRecognizer({RecognizerMode::NoisyOracle, bad, 0}), ValidationError);
  auto negative = uniform_confusion(1.0);
  negative(0, 0) = 1.1;
  negative(0, 1) = -0.1;
  CHECK_THROWS_AS(validate_confusion(negative), ValidationError);
  CHECK_THROWS_AS(uniform_confusion(1.2), ValidationError);

  const auto m = uniform_confusion(0.7);
  CHECK(confusion_from_json(to_json(m)) == m);
  CHECK_THROWS_AS(confusion_from_json(nlohmann::json::array({1, 2})), ValidationError);

  CHECK(recognizer_mode_from_name("noisy") == RecognizerMode::NoisyOracle);
  CHECK(recognizer_mode_from_name("probe") == RecognizerMode::TrainedProbe);
  CHECK_THROWS_AS(recognizer_mode_from_name("vlm"), ValidationError);
}

TEST_CASE("trained probe: unfit error, fit, save and load") {
  ScenarioRecognizer probe({RecognizerMode::TrainedProbe, uniform_confusion(0.8), 0});
  const auto spec = test::tiny_spec(8, 4);
  const auto clip = generate_clip(spec, Scenario::Dance, Proficiency::Novice, 0);
  CHECK_THROWS_AS(probe.recognize(clip), UnfitModelError);
  CHECK_THROWS_AS(probe.save_probe("/tmp/never.ckpt"), UnfitModelError);

  const auto plan = plan_dataset(spec);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-2;
  const auto enc = test::tiny_encoder();
  probe.fit_probe(plan, synthetic_loader(spec), enc, cfg, 4);
  CHECK(probe.probe_fitted());

  // The scenario bias is strong, so the probe recognises the training clips.
  const auto loader = synthetic_loader(spec);
  int hits = 0;
  for (const auto& e : plan.entries) hits += probe.recognize(loader(e)) == e.scenario ? 1 : 0;
  MESSAGE("probe training accuracy " << hits << "/" << plan.size());
  CHECK(hits >= static_cast<int>(0.9 * plan.size()));

  TempDir dir("probe");
  probe.save_probe(dir / "probe.ckpt");
  ScenarioRecognizer loaded({RecognizerMode::TrainedProbe, uniform_confusion(0.8), 0});
  loaded.load_probe(dir / "probe.ckpt");
  for (const auto& e : plan.entries) CHECK(loaded.recognize(loader(e)) == probe.recognize(loader(e)));
}
