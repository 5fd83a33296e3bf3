#include "profpipe/classifier_bank.hpp"

#include "profpipe/checkpoint.hpp"

#include <spdlog/spdlog.h>

namespace profpipe {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const BankConfig& cfg) {
  return {{"encoder", to_json(cfg.encoder)}, {"train", to_json(cfg.train)}, {"frames", cfg.frames}};
}

void merge_json(const json& j, BankConfig& cfg) {
  if (j.contains("encoder")) merge_json(j.at("encoder"), cfg.encoder);
  if (j.contains("train")) merge_json(j.at("train"), cfg.train);
  cfg.frames = j.value("frames", cfg.frames);
}

EncoderConfig cell_encoder_config(const BankConfig& cfg, Scenario s, View v) {
  EncoderConfig e = cfg.encoder;
  e.seed = derive_seed(cfg.encoder.seed, static_cast<std::uint64_t>(index_of(s)),
                       static_cast<std::uint64_t>(index_of(v)) + 1);
  return e;
}

TrainConfig cell_train_config(const BankConfig& cfg, Scenario s, View v) {
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.train.seed, static_cast<std::uint64_t>(index_of(s)),
                       static_cast<std::uint64_t>(index_of(v)) + 1);
  return t;
}

void ClassifierBank::insert(ViewClassifier classifier) {
  if (classifier.model.classes() != kNumProficiency) {
    throw ValidationError("bank cells must have exactly 4 outputs");
  }
  auto& slot = cells_[index_of(classifier.scenario)][index_of(classifier.view)];
  slot = std::move(classifier);
}

bool ClassifierBank::contains(Scenario s, View v) const { return cells_[index_of(s)][index_of(v)].has_value(); }

std::size_t ClassifierBank::size() const {
  std::size_t n = 0;
  for (const auto& row : cells_)
    for (const auto& c : row) n += c.has_value() ? 1 : 0;
  return n;
}

const ViewClassifier& ClassifierBank::cell(Scenario s, View v) const {
  const auto& slot = cells_[index_of(s)][index_of(v)];
  if (!slot) {
    throw UnfitModelError("bank has no classifier for (" + std::string(name_of(s)) + ", " +
                          std::string(name_of(v)) + ")");
  }
  return *slot;
}

ViewClassifier& ClassifierBank::cell(Scenario s, View v) {
  return const_cast<ViewClassifier&>(std::as_const(*this).cell(s, v));
}

Vector<double> ClassifierBank::classify_view(Scenario s, View v, const FrameStream& stream) const {
  const auto& c = cell(s, v);
  return c.model.logits(prepare_uniform_stack(stream, c.frames, c.model.encoder().config()));
}

std::vector<StackSample> prepare_cell_samples(const std::vector<MultiViewClip>& clips, View v, int frames,
                                              const EncoderConfig& cfg) {
  std::vector<StackSample> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) {
    out.push_back({prepare_uniform_stack(clip.stream(v), frames, cfg), index_of(clip.proficiency)});
  }
  return out;
}

CellResult train_cell(Scenario s, View v, std::span<const StackSample> train, std::span<const StackSample> val,
                      const BankConfig& cfg) {
  if (train.empty()) {
    throw ValidationError("no training clips for cell (" + std::string(name_of(s)) + ", " +
                          std::string(name_of(v)) + ")");
  }
  std::array<int, kNumProficiency> counts{};
  for (const auto& sample : train) ++counts[static_cast<std::size_t>(sample.label)];
  for (const auto p : kAllProficiency) {
    if (counts[index_of(p)] == 0) {
      spdlog::warn("cell ({}, {}) has no {} training clips; training anyway", name_of(s), name_of(v), name_of(p));
    }
  }
  CellResult result;
  result.classifier.scenario = s;
  result.classifier.view = v;
  result.classifier.frames = cfg.frames;
  result.classifier.model = ClipClassifier<Real>(cell_encoder_config(cfg, s, v), kNumProficiency);
  result.curves = train_classifier<Real>(result.classifier.model, train, val, cell_train_config(cfg, s, v));
  return result;
}

namespace {

std::vector<MultiViewClip> load_scenario(const DatasetManifest& m, Scenario s, const ClipLoader& loader) {
  std::vector<MultiViewClip> clips;
  for (const auto& e : m.entries) {
    if (e.scenario == s) clips.push_back(loader(e));
  }
  return clips;
}

void check_bank_config(const BankConfig& cfg) {
  cfg.train.validate();
  if (cfg.frames < 1) throw ValidationError("frames must be >= 1");
}

}  // namespace

BankTrainingResult train_classifier_bank(const DatasetManifest& train, const DatasetManifest& val,
                                         const ClipLoader& loader, const BankConfig& cfg) {
  check_bank_config(cfg);
  for (const auto s : kAllScenarios) {
    const bool any = std::any_of(train.entries.begin(), train.entries.end(),
                                 [s](const ManifestEntry& e) { return e.scenario == s; });
    if (!any) {
      throw ValidationError("empty cell (" + std::string(name_of(s)) + ", " + std::string(name_of(View::Ego)) +
                            "): no training clips for scenario " + std::string(name_of(s)));
    }
  }

  BankTrainingResult result;
  for (const auto s : kAllScenarios) {
    const auto train_clips = load_scenario(train, s, loader);
    const auto val_clips = load_scenario(val, s, loader);
    for (const auto v : kAllViews) {
      const auto tr = prepare_cell_samples(train_clips, v, cfg.frames, cfg.encoder);
      const auto va = prepare_cell_samples(val_clips, v, cfg.frames, cfg.encoder);
      auto cell = train_cell(s, v, tr, va, cfg);
      spdlog::info("trained cell ({}, {}) on {} clips, final train loss {:.4f}", name_of(s), name_of(v), tr.size(),
                   cell.curves.epochs.back().train_total);
      result.curves.emplace(std::pair{s, v}, std::move(cell.curves));
      result.bank.insert(std::move(cell.classifier));
    }
  }
  return result;
}

LossCurves retrain_cell(ClassifierBank& bank, Scenario s, View v, const DatasetManifest& train,
                        const ClipLoader& loader, const BankConfig& cfg) {
  check_bank_config(cfg);
  const auto clips = load_scenario(train, s, loader);
  const auto samples = prepare_cell_samples(clips, v, cfg.frames, cfg.encoder);
  auto cell = train_cell(s, v, samples, {}, cfg);
  bank.insert(std::move(cell.classifier));
  return cell.curves;
}

BankTrainingResult train_pooled_bank(const DatasetManifest& train, const DatasetManifest& val,
                                     const ClipLoader& loader, const BankConfig& cfg) {
  check_bank_config(cfg);
  if (train.empty()) throw ValidationError("training manifest is empty");
  std::array<std::vector<StackSample>, kNumViews> tr, va;
  for (const auto& e : train.entries) {
    const auto clip = loader(e);
    for (const auto v : kAllViews) {
      tr[index_of(v)].push_back({prepare_uniform_stack(clip.stream(v), cfg.frames, cfg.encoder), index_of(e.proficiency)});
    }
  }
  for (const auto& e : val.entries) {
    const auto clip = loader(e);
    for (const auto v : kAllViews) {
      va[index_of(v)].push_back({prepare_uniform_stack(clip.stream(v), cfg.frames, cfg.encoder), index_of(e.proficiency)});
    }
  }

  BankTrainingResult result;
  for (const auto v : kAllViews) {
    // The pooled classifier of view v is keyed as the Dance cell for seeding.
    auto cell = train_cell(Scenario::Dance, v, tr[index_of(v)], va[index_of(v)], cfg);
    spdlog::info("trained pooled classifier for view {} on {} clips", name_of(v), tr[index_of(v)].size());
    for (const auto s : kAllScenarios) {
      ViewClassifier copy = cell.classifier;
      copy.scenario = s;
      result.bank.insert(std::move(copy));
      result.curves.emplace(std::pair{s, v}, cell.curves);
    }
  }
  return result;
}

std::string cell_file_name(Scenario s, View v) {
  return "s" + std::to_string(index_of(s)) + "_v" + std::string(name_of(v)) + ".ckpt";
}

void save_view_classifier(const fs::path& path, const ViewClassifier& cell, const BankConfig& cfg) {
  Container c;
  c.meta = {{"kind", "view-classifier"},
            {"scenario", index_of(cell.scenario)},
            {"view", name_of(cell.view)},
            {"frames", cell.frames},
            {"classes", cell.model.classes()},
            {"encoder", to_json(cell.model.encoder().config())},
            {"train", to_json(cell_train_config(cfg, cell.scenario, cell.view))}};
  auto model = cell.model;
  store_parameters(model.parameters(), c);
  write_container(path, c);
}

ViewClassifier load_view_classifier(const fs::path& path) {
  const Container c = read_container(path);
  try {
    if (c.meta.at("kind").get<std::string>() != "view-classifier") {
      throw CorruptContainerError(path.string() + " is not a view-classifier checkpoint");
    }
    EncoderConfig enc;
    merge_json(c.meta.at("encoder"), enc);
    ViewClassifier cell;
    cell.scenario = scenario_from_id(c.meta.at("scenario").get<int>());
    cell.view = view_from_name(c.meta.at("view").get<std::string>());
    cell.frames = c.meta.at("frames").get<int>();
    cell.model = ClipClassifier<Real>(enc, c.meta.at("classes").get<int>());
    restore_parameters(c, cell.model.parameters());
    return cell;
  } catch (const json::exception& e) {
    throw CorruptContainerError("corrupt view-classifier checkpoint " + path.string() + ": " + e.what());
  }
}

void save_bank(const fs::path& dir, const ClassifierBank& bank, const BankConfig& cfg) {
  if (!bank.complete()) {
    throw ValidationError("refusing to save an incomplete bank (" + std::to_string(bank.size()) + " of 30 cells)");
  }
  json cells = json::array();
  for (const auto s : kAllScenarios) {
    for (const auto v : kAllViews) {
      const auto file = cell_file_name(s, v);
      save_view_classifier(dir / file, bank.cell(s, v), cfg);
      cells.push_back({{"scenario", index_of(s)}, {"view", name_of(v)}, {"file", file}});
    }
  }
  const json index = {{"kind", "classifier-bank"}, {"cells", cells}, {"config", to_json(cfg)}};
  write_text_file(dir / kBankIndexFile, index.dump(2) + "\n");
}

ClassifierBank load_bank(const fs::path& dir) {
  const auto index_path = dir / kBankIndexFile;
  if (!fs::exists(index_path)) throw IoError("missing bank checkpoint index " + index_path.string());
  json index;
  try {
    index = json::parse(read_text_file(index_path));
  } catch (const json::exception& e) {
    throw CorruptContainerError("corrupt bank index " + index_path.string() + ": " + e.what());
  }
  ClassifierBank bank;
  try {
    for (const auto& entry : index.at("cells")) {
      auto cell = load_view_classifier(dir / entry.at("file").get<std::string>());
      if (index_of(cell.scenario) != entry.at("scenario").get<int>() ||
          name_of(cell.view) != entry.at("view").get<std::string>()) {
        throw CorruptContainerError("bank index does not match checkpoint " + entry.at("file").get<std::string>());
      }
      if (bank.contains(cell.scenario, cell.view)) {
        throw CorruptContainerError("bank index lists cell (" + std::string(name_of(cell.scenario)) + ", " +
                                    std::string(name_of(cell.view)) + ") twice");
      }
      bank.insert(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw CorruptContainerError("corrupt bank index " + index_path.string() + ": " + e.what());
  }
  if (!bank.complete()) {
    throw CorruptContainerError("bank at " + dir.string() + " has " + std::to_string(bank.size()) + " of 30 cells");
  }
  return bank;
}

}  // namespace profpipe
