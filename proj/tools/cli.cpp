#include "cli.hpp"

#include "profpipe/classifier_bank.hpp"
#include "profpipe/container.hpp"
#include "profpipe/dataset.hpp"
#include "profpipe/evaluation.hpp"
#include "profpipe/fusion.hpp"
#include "profpipe/multitask.hpp"
#include "profpipe/recognizer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace profpipe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kManifestFile = "manifest.jsonl";
constexpr std::string_view kPredictionsFile = "predictions.jsonl";
constexpr std::string_view kReportFile = "report.csv";
constexpr std::string_view kProbeFile = "probe.ckpt";
constexpr std::string_view kM1File = "m1.ckpt";

fs::path output_root() {
  const char* env = std::getenv("PROFPIPE_OUT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("out");
}

// Fully resolved settings of one invocation.
struct RunConfig {
  std::string command;
  fs::path out;
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  double val_fraction = 0.25;
  EncoderConfig encoder;
  TrainConfig train;
  int bank_frames = kBankFrames;
  bool pooled = false;
  bool train_probe = false;
  ViewFusion view_fusion = ViewFusion::MeanOfPooledViews;
  RecognizerConfig recognizer;
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  Split eval_split = Split::Val;
  fs::path data, bank, model, probe, m1, m2, curves;
};

json run_config_json(const RunConfig& c) {
  json strategies = json::array();
  for (const auto s : c.strategies) strategies.push_back(name_of(s));
  return {{"command", c.command},
          {"out", c.out.string()},
          {"seed", c.seed},
          {"dataset", to_json(c.dataset)},
          {"val_fraction", c.val_fraction},
          {"encoder", to_json(c.encoder)},
          {"train", to_json(c.train)},
          {"bank", {{"frames", c.bank_frames}, {"pooled", c.pooled}, {"train_probe", c.train_probe}}},
          {"multitask", {{"view_fusion", name_of(c.view_fusion)}, {"frames", kMultiTaskFrames}}},
          {"recognizer",
           {{"mode", name_of(c.recognizer.mode)},
            {"confusion", to_json(c.recognizer.confusion)},
            {"seed", c.recognizer.seed}}},
          {"strategies", strategies},
          {"split", name_of(c.eval_split)},
          {"paths",
           {{"data", c.data.string()},
            {"bank", c.bank.string()},
            {"model", c.model.string()},
            {"probe", c.probe.string()},
            {"m1", c.m1.string()},
            {"m2", c.m2.string()},
            {"curves", c.curves.string()}}}};
}

std::vector<Strategy> parse_strategies(const std::string& name) {
  if (name == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
  return {strategy_from_name(name)};
}

// Applies the merged JSON (config file patched with flags) over the defaults.
RunConfig resolve(const std::string& command, const json& j) {
  RunConfig c;
  c.command = command;
  const auto section = [&](const char* key) { return j.contains(key) ? j.at(key) : json::object(); };
  try {
    merge_json(section("dataset"), c.dataset);
    merge_json(section("encoder"), c.encoder);
    merge_json(section("train"), c.train);
    c.val_fraction = j.value("val_fraction", c.val_fraction);

    const json bank = section("bank");
    c.bank_frames = bank.value("frames", c.bank_frames);
    c.pooled = bank.value("pooled", c.pooled);
    c.train_probe = bank.value("train_probe", c.train_probe);

    const json mt = section("multitask");
    if (mt.contains("view_fusion")) c.view_fusion = view_fusion_from_name(mt.at("view_fusion").get<std::string>());

    const json rec = section("recognizer");
    if (rec.contains("mode")) c.recognizer.mode = recognizer_mode_from_name(rec.at("mode").get<std::string>());
    if (rec.contains("diagonal")) c.recognizer.confusion = uniform_confusion(rec.at("diagonal").get<double>());
    if (rec.contains("confusion")) c.recognizer.confusion = confusion_from_json(rec.at("confusion"));
    if (rec.contains("confusion_file")) {
      const fs::path p = rec.at("confusion_file").get<std::string>();
      json m;
      try {
        m = json::parse(read_text_file(p));
      } catch (const json::exception& e) {
        throw ValidationError("confusion file " + p.string() + " is not valid JSON: " + e.what());
      }
      c.recognizer.confusion = confusion_from_json(m);
    }
    validate_confusion(c.recognizer.confusion);
    if (j.contains("strategy")) c.strategies = parse_strategies(j.at("strategy").get<std::string>());
    if (j.contains("split")) c.eval_split = split_from_name(j.at("split").get<std::string>());

    // A top-level seed reaches every stochastic component.
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("seed") || !section("dataset").contains("seed")) c.dataset.seed = c.seed;
    if (j.contains("seed") || !section("encoder").contains("seed")) c.encoder.seed = c.seed;
    if (j.contains("seed") || !section("train").contains("seed")) c.train.seed = c.seed;
    if (j.contains("seed") || !rec.contains("seed")) c.recognizer.seed = c.seed;
    if (rec.contains("seed") && !j.contains("seed")) c.recognizer.seed = rec.at("seed").get<std::uint64_t>();

    const json paths = section("paths");
    const fs::path root = output_root();
    const auto path_or = [&](const char* key, const fs::path& fallback) {
      return paths.contains(key) ? fs::path(paths.at(key).get<std::string>()) : fallback;
    };
    static const std::map<std::string, std::string> default_dirs = {
        {"gen-data", "data"}, {"train-m1", "m1"}, {"train-m2", "m2"},
        {"eval", "eval"},     {"compare", "compare"}, {"loss-plot", "plot"}};
    c.out = j.contains("out") ? fs::path(j.at("out").get<std::string>()) : root / default_dirs.at(command);
    c.data = path_or("data", root / "data");
    c.bank = path_or("bank", root / "m2");
    c.model = path_or("model", fs::path());
    c.probe = path_or("probe", c.bank / kProbeFile);
    c.m1 = path_or("m1", root / "eval-m1" / kPredictionsFile);
    c.m2 = path_or("m2", root / "eval" / kPredictionsFile);
    c.curves = path_or("curves", root / "m1" / "loss_curves.csv");
  } catch (const json::exception& e) {
    throw ValidationError("bad configuration: " + std::string(e.what()));
  }
  c.dataset.validate();
  c.train.validate();
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) throw ValidationError("val_fraction must lie in (0, 1)");
  if (c.bank_frames < 1) throw ValidationError("bank frames must be >= 1");
  return c;
}

void setup_logging(const fs::path& out, const std::string& level) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  console->set_pattern("%^[%l]%$ %v");
  std::shared_ptr<spdlog::sinks::basic_file_sink_mt> file;
  try {
    file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((out / "profpipe.log").string(), true);
  } catch (const spdlog::spdlog_ex& e) {
    throw IoError(e.what());
  }
  // No timestamps: reruns with the same config leave identical bytes.
  file->set_pattern("[%l] %v");
  auto logger = std::make_shared<spdlog::logger>("profpipe", spdlog::sinks_init_list{console, file});
  logger->set_level(spdlog::level::from_str(level));
  logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

DatasetManifest load_data(const RunConfig& c) {
  const fs::path manifest = c.data / kManifestFile;
  if (!fs::exists(manifest)) throw IoError("missing dataset manifest " + manifest.string());
  return read_manifest(manifest);
}

void write_curve_dir(const fs::path& dir, const BankTrainingResult& result) {
  for (const auto& [key, curves] : result.curves) {
    write_text_file(dir / "curves" / (cell_file_name(key.first, key.second) + ".csv"), loss_curves_to_csv(curves));
  }
}

int cmd_gen_data(const RunConfig& c) {
  auto manifest = generate_dataset(c.dataset, c.out);
  const auto split = split_dataset(manifest, c.val_fraction, c.seed);
  DatasetManifest tagged{c.out, split.train.entries};
  tagged.entries.insert(tagged.entries.end(), split.val.entries.begin(), split.val.entries.end());
  // Keep generation order in the file.
  std::map<std::string, Split> tag;
  for (const auto& e : tagged.entries) tag[e.sample_id] = e.split;
  for (auto& e : manifest.entries) e.split = tag.at(e.sample_id);
  write_manifest(c.out / kManifestFile, manifest);
  spdlog::info("wrote {} clips ({} train, {} val) to {}", manifest.size(), split.train.size(), split.val.size(),
               c.out.string());
  return kExitOk;
}

int cmd_train_m2(const RunConfig& c) {
  const auto manifest = load_data(c);
  const auto train = manifest.filter(Split::Train);
  const auto val = manifest.filter(Split::Val);
  const auto loader = disk_loader(manifest.root);
  BankConfig cfg{c.encoder, c.train, c.bank_frames};
  spdlog::info("training {} bank on {} train / {} val clips", c.pooled ? "pooled" : "30-cell", train.size(),
               val.size());
  const auto result =
      c.pooled ? train_pooled_bank(train, val, loader, cfg) : train_classifier_bank(train, val, loader, cfg);
  save_bank(c.out, result.bank, cfg);
  write_curve_dir(c.out, result);
  std::vector<const LossCurves*> all;
  for (const auto& [key, curves] : result.curves) all.push_back(&curves);
  const auto files = emit_loss_curves(mean_curves(all), c.out / "loss_curves");
  spdlog::info("saved bank to {} (mean curves in {})", c.out.string(), files.csv.string());

  if (c.train_probe) {
    ScenarioRecognizer rec({RecognizerMode::TrainedProbe, c.recognizer.confusion, c.recognizer.seed});
    rec.fit_probe(train, loader, c.encoder, c.train, c.bank_frames);
    rec.save_probe(c.out / kProbeFile);
    spdlog::info("saved scenario probe to {}", (c.out / kProbeFile).string());
  }
  return kExitOk;
}

int cmd_train_m1(const RunConfig& c) {
  const auto manifest = load_data(c);
  const auto loader = disk_loader(manifest.root);
  std::vector<MultiTaskSample> train, val;
  for (const auto& e : manifest.entries) {
    auto sample = prepare_multitask_sample(loader(e), c.encoder);
    (e.split == Split::Train ? train : val).push_back(std::move(sample));
  }
  spdlog::info("training multi-task model (alpha {}, {}) on {} train / {} val clips", c.train.alpha,
               name_of(c.view_fusion), train.size(), val.size());
  MultiTaskModel<Real> model(c.encoder, c.view_fusion);
  const auto curves = train_multitask<Real>(model, train, val, c.train);
  save_multitask(c.out / kM1File, model, c.train);
  const auto files = emit_loss_curves(curves, c.out / "loss_curves");
  spdlog::info("saved {} and {}", (c.out / kM1File).string(), files.csv.string());
  return kExitOk;
}

int cmd_eval(const RunConfig& c) {
  const auto manifest = load_data(c);
  const auto eval_set = manifest.filter(c.eval_split);
  if (eval_set.empty()) throw ValidationError("no " + std::string(name_of(c.eval_split)) + " entries in manifest");
  const auto loader = disk_loader(manifest.root);

  std::vector<PredictionRecord> records;
  std::vector<std::string> columns;
  if (!c.model.empty()) {
    if (!fs::exists(c.model)) throw ValidationError("missing multi-task checkpoint " + c.model.string());
    const auto model = load_multitask(c.model);
    records = predict_manifest(model, eval_set, loader);
    columns = {std::string(kMultiTaskMethod)};
  } else {
    const fs::path index = c.bank / kBankIndexFile;
    if (!fs::exists(index)) throw ValidationError("missing bank checkpoint index " + index.string());
    const auto bank = load_bank(c.bank);
    ScenarioRecognizer recognizer(c.recognizer);
    if (c.recognizer.mode == RecognizerMode::TrainedProbe) {
      if (!fs::exists(c.probe)) throw ValidationError("missing scenario probe checkpoint " + c.probe.string());
      recognizer.load_probe(c.probe);
    }
    records = predict_manifest(bank, recognizer, eval_set, loader);
    for (const auto s : c.strategies) columns.emplace_back(name_of(s));
  }
  write_text_file(c.out / kPredictionsFile, records_to_jsonl(records));
  const auto csv = report_to_csv(evaluate_records(records, columns));
  write_text_file(c.out / kReportFile, csv);
  spdlog::info("evaluated {} clips; report written to {}", records.size(), (c.out / kReportFile).string());
  std::cout << csv;
  return kExitOk;
}

std::vector<PredictionRecord> read_records(const fs::path& p) {
  if (!fs::exists(p)) throw ValidationError("missing prediction file " + p.string());
  return records_from_jsonl(read_text_file(p));
}

std::vector<std::string> readout_names(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw ValidationError("prediction file has no records");
  std::vector<std::string> names;
  for (const auto& r : records.front().readouts) names.push_back(r.name);
  return names;
}

int cmd_compare(const RunConfig& c) {
  const auto m1 = read_records(c.m1);
  const auto m2 = read_records(c.m2);
  auto m1_names = readout_names(m1);
  auto m2_names = readout_names(m2);
  std::vector<std::string> wanted;
  for (const auto s : c.strategies) {
    if (std::find(m2_names.begin(), m2_names.end(), name_of(s)) != m2_names.end()) wanted.emplace_back(name_of(s));
  }
  if (wanted.empty()) wanted = m2_names;
  const auto doc = compare_methods(evaluate_records(m1, {m1_names.front()}), evaluate_records(m2, wanted));
  write_text_file(c.out / "comparison.md", doc);
  std::cout << doc;
  return kExitOk;
}

int cmd_loss_plot(const RunConfig& c) {
  if (!fs::exists(c.curves)) throw ValidationError("missing loss-curve file " + c.curves.string());
  const auto curves = loss_curves_from_csv(read_text_file(c.curves));
  const auto files = emit_loss_curves(curves, c.out / "loss_curves");
  if (files.png) {
    spdlog::info("wrote {}", files.png->string());
  } else {
    spdlog::warn("built without libpng; wrote only {}", files.csv.string());
  }
  return kExitOk;
}

// Flag values land in a JSON patch laid over the config file.
struct Patch {
  json j = json::object();

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, std::vector<std::string> key, const std::string& help) {
    return app->add_option_function<T>(
        flag,
        [this, key](const T& v) {
          json* node = &j;
          for (const auto& k : key) node = &(*node)[k];
          *node = v;
        },
        help);
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Desk-scale proficiency estimation: data generation, training, evaluation.", "profpipe"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::string log_level = "info";
  Patch patch;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)");
    patch.add<std::string>(sub, "--out", {"out"}, "Output directory");
    patch.add<std::uint64_t>(sub, "--seed", {"seed"}, "Seed for every stochastic component (default 0)");
    sub->add_option("--log-level", log_level, "trace, debug, info, warn, error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));
  };
  const auto training_flags = [&](CLI::App* sub) {
    patch.add<std::string>(sub, "--data", {"paths", "data"}, "Dataset directory holding manifest.jsonl");
    patch.add<std::string>(sub, "--arch", {"encoder", "architecture"}, "frame-mlp or tiny-temporal-transformer");
    patch.add<int>(sub, "--feature-dim", {"encoder", "feature_dim"}, "Encoder output width D");
    patch.add<int>(sub, "--hidden-dim", {"encoder", "hidden_dim"}, "Frame-MLP hidden width");
    patch.add<int>(sub, "--crop-size", {"encoder", "crop_size"}, "Centre crop side");
    patch.add<int>(sub, "--epochs", {"train", "epochs"}, "Training epochs");
    patch.add<double>(sub, "--lr", {"train", "learning_rate"}, "AdamW learning rate");
    patch.add<double>(sub, "--weight-decay", {"train", "weight_decay"}, "AdamW weight decay");
    patch.add<int>(sub, "--batch-size", {"train", "batch_size"}, "Batch size");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multi-view dataset");
  common(gen);
  patch.add<int>(gen, "--clips-per-scenario", {"dataset", "clips_per_scenario"}, "Clips per scenario (divisible by 4)");
  patch.add<int>(gen, "--frames-per-stream", {"dataset", "frames_per_stream"}, "Frames per view stream");
  patch.add<int>(gen, "--height", {"dataset", "height"}, "Frame height");
  patch.add<int>(gen, "--width", {"dataset", "width"}, "Frame width");
  patch.add<double>(gen, "--signal-strength", {"dataset", "signal_strength"}, "Proficiency pattern amplitude");
  patch.add<double>(gen, "--scenario-strength", {"dataset", "scenario_strength"}, "Scenario bias amplitude");
  patch.add<double>(gen, "--clutter", {"dataset", "clutter"}, "Class-independent pattern amplitude");
  patch.add<double>(gen, "--noise-std", {"dataset", "noise_std"}, "Gaussian pixel noise std");
  patch.add<std::string>(gen, "--pattern-mode", {"dataset", "pattern_mode"}, "shared or scenario-permuted");
  patch.add<double>(gen, "--val-fraction", {"val_fraction"}, "Validation share (default 0.25)");

  auto* m2 = app.add_subcommand("train-m2", "Train the 30-cell classifier bank");
  common(m2);
  training_flags(m2);
  patch.add<int>(m2, "--frames", {"bank", "frames"}, "Frames sampled per view (default 16)");
  m2->add_flag_callback("--pooled", [&] { patch.j["bank"]["pooled"] = true; },
                        "Baseline: one classifier per view shared by all scenarios");
  m2->add_flag_callback("--train-probe", [&] { patch.j["bank"]["train_probe"] = true; },
                        "Also train the ego-view scenario probe");

  auto* m1 = app.add_subcommand("train-m1", "Train the multi-task model");
  common(m1);
  training_flags(m1);
  patch.add<double>(m1, "--alpha", {"train", "alpha"}, "Proficiency loss weight in [0, 1]");
  patch.add<std::string>(m1, "--view-fusion", {"multitask", "view_fusion"},
                         "mean-of-pooled-views or views-as-samples");

  auto* ev = app.add_subcommand("eval", "Predict and write report.csv");
  common(ev);
  patch.add<std::string>(ev, "--data", {"paths", "data"}, "Dataset directory holding manifest.jsonl");
  patch.add<std::string>(ev, "--bank", {"paths", "bank"}, "Bank directory (Method 2)");
  patch.add<std::string>(ev, "--model", {"paths", "model"}, "Multi-task checkpoint (evaluates Method 1)");
  patch.add<std::string>(ev, "--probe", {"paths", "probe"}, "Scenario probe checkpoint");
  patch.add<std::string>(ev, "--strategy", {"strategy"}, "ego, exo, combined or all")
      ->check(CLI::IsMember({"ego", "exo", "combined", "all", "ego-only", "exo-average"}));
  patch.add<std::string>(ev, "--recognizer", {"recognizer", "mode"}, "oracle, noisy or probe")
      ->check(CLI::IsMember({"oracle", "noisy", "probe", "noisy-oracle", "trained-probe"}));
  patch.add<std::string>(ev, "--confusion", {"recognizer", "confusion_file"}, "6x6 JSON confusion matrix");
  patch.add<double>(ev, "--confusion-diagonal", {"recognizer", "diagonal"}, "Uniform confusion with this diagonal");
  patch.add<std::string>(ev, "--split", {"split"}, "train or val (default val)");

  auto* cmp = app.add_subcommand("compare", "Compare Method 1 and Method 2 predictions");
  common(cmp);
  patch.add<std::string>(cmp, "--m1", {"paths", "m1"}, "Method 1 predictions.jsonl");
  patch.add<std::string>(cmp, "--m2", {"paths", "m2"}, "Method 2 predictions.jsonl");
  patch.add<std::string>(cmp, "--strategy", {"strategy"}, "Method 2 columns: ego, exo, combined or all");

  auto* plot = app.add_subcommand("loss-plot", "Render loss_curves.csv as a PNG");
  common(plot);
  patch.add<std::string>(plot, "--curves", {"paths", "curves"}, "loss_curves.csv to plot");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json merged = json::object();
    if (!config_path.empty()) {
      try {
        merged = json::parse(read_text_file(config_path));
      } catch (const json::exception& e) {
        throw ValidationError("config " + config_path + " is not valid JSON: " + e.what());
      } catch (const IoError& e) {
        throw ValidationError(e.what());
      }
      if (!merged.is_object()) throw ValidationError("config " + config_path + " must hold a JSON object");
    }
    merged.merge_patch(patch.j);
    const RunConfig cfg = resolve(command, merged);
    setup_logging(cfg.out, log_level);
    write_text_file(cfg.out / "run_config.json", run_config_json(cfg).dump(2) + "\n");

    if (command == "gen-data") return cmd_gen_data(cfg);
    if (command == "train-m2") return cmd_train_m2(cfg);
    if (command == "train-m1") return cmd_train_m1(cfg);
    if (command == "eval") return cmd_eval(cfg);
    if (command == "compare") return cmd_compare(cfg);
    return cmd_loss_plot(cfg);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const UnfitModelError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}

}  // namespace profpipe::cli
