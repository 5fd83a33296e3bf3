#include "profpipe/dataset.hpp"

#include "profpipe/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace profpipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kPatternCount = 4;
constexpr double kBaseLevel = 0.5;
constexpr double kColourGain = 0.12;
constexpr double kTextureGain = 0.04;
constexpr double kPatternGain = 0.08;
constexpr double kPatternCycles = 3.0;

// Per-scenario colour offsets (RGB).
constexpr std::array<std::array<double, 3>, kNumScenarios> kScenarioColour = {{
    {1.0, 0.0, 0.0},
    {0.0, 1.0, 0.0},
    {0.0, 0.0, 1.0},
    {-1.0, 0.0, 0.0},
    {0.0, -1.0, 0.0},
    {0.0, 0.0, -1.0},
}};

// Box-Muller keeping both outputs.
class NormalSampler {
 public:
  explicit NormalSampler(Engine& engine) : engine_(engine) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(engine_);
    while (u1 <= 0.0) u1 = uniform01(engine_);
    const double u2 = uniform01(engine_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  Engine& engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Zero-mean grating; orientation indexes the pattern family.
std::vector<double> grating(int height, int width, double angle, double cycles) {
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  const double scale = 2.0 * std::numbers::pi * cycles / std::max(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y) * width + x] = std::cos(scale * (x * ca + y * sa));
    }
  }
  return out;
}

int planted_pattern(const DatasetSpec& spec, Scenario s, Proficiency p) {
  const int k = index_of(p);
  if (spec.pattern_mode == PatternMode::ScenarioPermuted) return (k + index_of(s)) % kPatternCount;
  return k;
}

std::string_view pattern_mode_name(PatternMode mode) {
  return mode == PatternMode::Shared ? "shared" : "scenario-permuted";
}

PatternMode pattern_mode_from_name(std::string_view name) {
  if (name == "shared") return PatternMode::Shared;
  if (name == "scenario-permuted") return PatternMode::ScenarioPermuted;
  throw ValidationError("unknown pattern_mode '" + std::string(name) + "'");
}

}  // namespace

DatasetSpec::DatasetSpec() {
  for (auto& row : view_visibility) row.fill(1.0);
}

void DatasetSpec::validate() const {
  if (clips_per_scenario <= 0) throw ValidationError("clips_per_scenario must be positive");
  if (clips_per_scenario % kNumProficiency != 0) {
    throw ValidationError("clips_per_scenario (" + std::to_string(clips_per_scenario) +
                          ") must be divisible by 4 for balanced proficiency classes");
  }
  if (frames_per_stream < 1) throw ValidationError("frames_per_stream must be >= 1");
  if (height < 1 || width < 1) throw ValidationError("frame size must be positive");
  if (!(signal_strength >= 0.0)) throw ValidationError("signal_strength must be >= 0");
  if (!(scenario_strength >= 0.0)) throw ValidationError("scenario_strength must be >= 0");
  if (!(clutter >= 0.0)) throw ValidationError("clutter must be >= 0");
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
  for (const auto s : kAllScenarios) {
    for (const auto v : kAllViews) {
      const double vis = visibility(s, v);
      if (!(vis >= 0.0 && vis <= 1.0)) {
        throw ValidationError("view_visibility[" + std::string(name_of(s)) + "][" +
                              std::string(name_of(v)) + "] must lie in [0, 1]");
      }
    }
  }
}

json to_json(const DatasetSpec& spec) {
  json vis = json::object();
  for (const auto s : kAllScenarios) {
    json row = json::object();
    for (const auto v : kAllViews) row[std::string(name_of(v))] = spec.visibility(s, v);
    vis[std::string(name_of(s))] = row;
  }
  return {{"clips_per_scenario", spec.clips_per_scenario},
          {"frames_per_stream", spec.frames_per_stream},
          {"height", spec.height},
          {"width", spec.width},
          {"signal_strength", spec.signal_strength},
          {"scenario_strength", spec.scenario_strength},
          {"clutter", spec.clutter},
          {"noise_std", spec.noise_std},
          {"pattern_mode", pattern_mode_name(spec.pattern_mode)},
          {"view_visibility", vis},
          {"seed", spec.seed}};
}

void merge_json(const json& j, DatasetSpec& spec) {
  try {
    spec.clips_per_scenario = j.value("clips_per_scenario", spec.clips_per_scenario);
    spec.frames_per_stream = j.value("frames_per_stream", spec.frames_per_stream);
    spec.height = j.value("height", spec.height);
    spec.width = j.value("width", spec.width);
    spec.signal_strength = j.value("signal_strength", spec.signal_strength);
    spec.scenario_strength = j.value("scenario_strength", spec.scenario_strength);
    spec.clutter = j.value("clutter", spec.clutter);
    spec.noise_std = j.value("noise_std", spec.noise_std);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("pattern_mode")) {
      spec.pattern_mode = pattern_mode_from_name(j.at("pattern_mode").get<std::string>());
    }
    if (j.contains("view_visibility")) {
      for (const auto& [scenario, row] : j.at("view_visibility").items()) {
        const auto s = scenario_from_name(scenario);
        for (const auto& [view, value] : row.items()) {
          spec.set_visibility(s, view_from_name(view), value.get<double>());
        }
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid dataset config: ") + e.what());
  }
}

std::string_view name_of(Split split) { return split == Split::Train ? "train" : "val"; }

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  throw ValidationError("unknown split tag '" + std::string(name) + "'");
}

DatasetManifest DatasetManifest::filter(Split split) const {
  DatasetManifest out{root, {}};
  for (const auto& e : entries) {
    if (e.split == split) out.entries.push_back(e);
  }
  return out;
}

std::string manifest_to_jsonl(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    const json line = {{"sample_id", e.sample_id},
                       {"scenario", index_of(e.scenario)},
                       {"proficiency", index_of(e.proficiency)},
                       {"path", e.path},
                       {"split", name_of(e.split)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest manifest_from_jsonl(std::string_view text, fs::path root) {
  DatasetManifest manifest{std::move(root), {}};
  std::istringstream lines{std::string(text)};
  std::string line;
  int line_no = 0;
  std::map<std::string, int, std::less<>> seen;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ManifestEntry e;
      e.sample_id = j.at("sample_id").get<std::string>();
      e.scenario = scenario_from_id(j.at("scenario").get<int>());
      e.proficiency = proficiency_from_id(j.at("proficiency").get<int>());
      e.path = j.at("path").get<std::string>();
      e.split = split_from_name(j.value("split", std::string("train")));
      if (!seen.emplace(e.sample_id, line_no).second) {
        throw ValidationError("duplicate sample_id '" + e.sample_id + "'");
      }
      manifest.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  write_text_file(path, manifest_to_jsonl(manifest));
}

DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing manifest " + path.string());
  return manifest_from_jsonl(read_text_file(path), path.parent_path());
}

std::string make_sample_id(Scenario s, Proficiency p, int index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-%s-%03d", std::string(name_of(s)).c_str(),
                std::string(name_of(p)).c_str(), index);
  return buf;
}

MultiViewClip generate_clip(const DatasetSpec& spec, Scenario s, Proficiency p, int index) {
  const int H = spec.height;
  const int W = spec.width;
  const int T = spec.frames_per_stream;
  const std::size_t pixels = static_cast<std::size_t>(H) * W;

  MultiViewClip clip;
  clip.sample_id = make_sample_id(s, p, index);
  clip.scenario = s;
  clip.proficiency = p;

  Engine engine(derive_seed(spec.seed, clip.sample_id));
  NormalSampler gauss(engine);

  std::array<std::vector<double>, kPatternCount> patterns;
  for (int j = 0; j < kPatternCount; ++j) {
    patterns[j] = grating(H, W, j * std::numbers::pi / kPatternCount, kPatternCycles);
  }
  const auto texture = grating(H, W, index_of(s) * std::numbers::pi / kNumScenarios, 1.0);
  const auto& colour = kScenarioColour[index_of(s)];
  const int target = planted_pattern(spec, s, p);
  // Higher proficiency plants a steadier (less modulated) pattern.
  const double depth = 0.4 - 0.1 * index_of(p);
  const double period = std::max(2.0, T / 2.0);

  std::vector<double> still(pixels * 3);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < 3; ++c) {
      still[i * 3 + c] = kBaseLevel + spec.scenario_strength *
                                          (kColourGain * colour[c] + kTextureGain * texture[i]);
    }
  }

  std::vector<double> planted(pixels);
  for (const auto v : kAllViews) {
    std::array<double, kPatternCount> amplitude{};
    for (int j = 0; j < kPatternCount; ++j) {
      amplitude[j] = spec.clutter * uniform01(engine);
    }
    amplitude[target] += spec.signal_strength * spec.visibility(s, v);
    const double phase = uniform(engine, 0.0, 2.0 * std::numbers::pi);

    FrameStream& stream = clip.stream(v);
    stream.height = H;
    stream.width = W;
    stream.frames.resize(T, static_cast<Eigen::Index>(pixels * 3));
    for (int t = 0; t < T; ++t) {
      const double modulation = 1.0 + depth * std::sin(2.0 * std::numbers::pi * t / period + phase);
      std::fill(planted.begin(), planted.end(), 0.0);
      for (int j = 0; j < kPatternCount; ++j) {
        const double a = kPatternGain * amplitude[j] * modulation;
        if (a == 0.0) continue;
        for (std::size_t i = 0; i < pixels; ++i) planted[i] += a * patterns[j][i];
      }
      float* row = stream.frames.row(t).data();
      for (std::size_t i = 0; i < pixels; ++i) {
        for (int c = 0; c < 3; ++c) {
          double value = still[i * 3 + c] + planted[i];
          if (spec.noise_std > 0.0) value += spec.noise_std * gauss();
          row[i * 3 + c] = static_cast<float>(std::clamp(value, 0.0, 1.0));
        }
      }
    }
  }
  return clip;
}

DatasetManifest plan_dataset(const DatasetSpec& spec) {
  spec.validate();
  DatasetManifest manifest;
  const int per_class = spec.clips_per_scenario / kNumProficiency;
  for (const auto s : kAllScenarios) {
    for (const auto p : kAllProficiency) {
      for (int i = 0; i < per_class; ++i) {
        ManifestEntry e;
        e.sample_id = make_sample_id(s, p, i);
        e.scenario = s;
        e.proficiency = p;
        e.path = "clips/" + e.sample_id + ".clip";
        e.split = Split::Train;
        manifest.entries.push_back(std::move(e));
      }
    }
  }
  return manifest;
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
  DatasetManifest manifest = plan_dataset(spec);
  manifest.root = out_dir;
  std::error_code ec;
  fs::create_directories(out_dir / "clips", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "clips").string() + ": " + ec.message());

  const int per_class = spec.clips_per_scenario / kNumProficiency;
  for (const auto& e : manifest.entries) {
    const int index = std::stoi(e.sample_id.substr(e.sample_id.rfind('-') + 1));
    save_clip(manifest.resolve(e), generate_clip(spec, e.scenario, e.proficiency, index));
  }
  spdlog::info("generated {} clips ({} per class per scenario) in {}", manifest.size(), per_class,
               out_dir.string());
  return manifest;
}

SplitResult split_dataset(const DatasetManifest& manifest, double val_fraction, std::uint64_t seed) {
  if (manifest.empty()) throw ValidationError("cannot split an empty manifest");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ValidationError("val_fraction must lie in (0, 1), got " + std::to_string(val_fraction));
  }

  // Strata in first-appearance order.
  std::vector<std::pair<int, int>> keys;
  std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const std::pair key{index_of(e.scenario), index_of(e.proficiency)};
    auto [it, inserted] = strata.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(i);
  }
  for (const auto& key : keys) {
    if (strata[key].size() < 2) {
      throw ValidationError("stratum (" + std::string(name_of(scenario_from_id(key.first))) + ", " +
                            std::string(name_of(proficiency_from_id(key.second))) + ") has " +
                            std::to_string(strata[key].size()) + " clip(s); too small to split");
    }
  }

  const auto n = manifest.entries.size();
  const auto total_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));

  // Largest remainder; ties broken by a seeded shuffle of the strata.
  std::vector<std::size_t> quota(keys.size());
  std::vector<double> remainder(keys.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto size = strata[keys[k]].size();
    const double exact = val_fraction * static_cast<double>(size);
    quota[k] = std::min(static_cast<std::size_t>(std::floor(exact)), size - 1);
    remainder[k] = exact - std::floor(exact);
    assigned += quota[k];
  }
  Engine tie_engine(derive_seed(seed, "split-remainder"));
  auto order = permutation(keys.size(), tie_engine);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t r = 0; assigned < total_val && r < order.size(); ++r) {
    const auto k = order[r];
    if (quota[k] + 1 < strata[keys[k]].size()) {
      ++quota[k];
      ++assigned;
    }
  }

  std::vector<bool> is_val(n, false);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& members = strata[keys[k]];
    Engine engine(derive_seed(seed, static_cast<std::uint64_t>(keys[k].first),
                              static_cast<std::uint64_t>(keys[k].second) + 1));
    const auto perm = permutation(members.size(), engine);
    for (std::size_t i = 0; i < quota[k]; ++i) is_val[members[perm[i]]] = true;
  }

  SplitResult result{{manifest.root, {}}, {manifest.root, {}}};
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry e = manifest.entries[i];
    e.split = is_val[i] ? Split::Val : Split::Train;
    (is_val[i] ? result.val : result.train).entries.push_back(std::move(e));
  }
  return result;
}

Container clip_to_container(const MultiViewClip& clip) {
  Container c;
  json views = json::array();
  for (const auto v : kAllViews) views.push_back(name_of(v));
  c.meta = {{"kind", "clip"},
            {"sample_id", clip.sample_id},
            {"scenario", index_of(clip.scenario)},
            {"proficiency", index_of(clip.proficiency)},
            {"views", views}};
  for (const auto v : kAllViews) {
    const auto& s = clip.stream(v);
    std::vector<float> values(s.frames.data(), s.frames.data() + s.frames.size());
    c.arrays.push_back(NamedArray{std::string(name_of(v)),
                                  {s.frame_count(), s.height, s.width, 3},
                                  std::move(values)});
  }
  return c;
}

MultiViewClip clip_from_container(const Container& c) {
  if (c.arrays.size() != static_cast<std::size_t>(kNumViews)) {
    throw CorruptContainerError("view count " + std::to_string(c.arrays.size()) + " ≠ " +
                                std::to_string(kNumViews));
  }
  MultiViewClip clip;
  try {
    clip.sample_id = c.meta.at("sample_id").get<std::string>();
    clip.scenario = scenario_from_id(c.meta.at("scenario").get<int>());
    clip.proficiency = proficiency_from_id(c.meta.at("proficiency").get<int>());
  } catch (const json::exception& e) {
    throw CorruptContainerError(std::string("corrupt header: ") + e.what());
  } catch (const ValidationError& e) {
    throw CorruptContainerError(std::string("corrupt header: ") + e.what());
  }
  int frames = -1;
  for (const auto v : kAllViews) {
    const auto& a = c.at(name_of(v));
    if (a.shape.size() != 4 || a.shape[3] != 3) {
      throw CorruptContainerError("view '" + a.name + "' must have shape [T, H, W, 3]");
    }
    const auto* values = std::get_if<std::vector<float>>(&a.data);
    if (values == nullptr) throw CorruptContainerError("view '" + a.name + "' must be float32");
    if (frames >= 0 && a.shape[0] != frames) {
      throw CorruptContainerError("views disagree on frame count");
    }
    frames = static_cast<int>(a.shape[0]);
    FrameStream& s = clip.stream(v);
    s.height = static_cast<int>(a.shape[1]);
    s.width = static_cast<int>(a.shape[2]);
    s.frames = Eigen::Map<const FrameMatrix>(values->data(), frames,
                                             static_cast<Eigen::Index>(a.shape[1] * a.shape[2] * 3));
  }
  return clip;
}

void save_clip(const fs::path& path, const MultiViewClip& clip) {
  write_container(path, clip_to_container(clip));
}

MultiViewClip load_clip(const fs::path& path) { return clip_from_container(read_container(path)); }

MultiViewClip load_clip(const DatasetManifest& manifest, const ManifestEntry& entry) {
  auto clip = load_clip(manifest.resolve(entry));
  if (clip.sample_id != entry.sample_id || clip.scenario != entry.scenario ||
      clip.proficiency != entry.proficiency) {
    throw CorruptContainerError("container " + entry.path + " does not match manifest entry '" +
                                entry.sample_id + "'");
  }
  return clip;
}

ClipLoader disk_loader(fs::path root) {
  return [root = std::move(root)](const ManifestEntry& entry) {
    const DatasetManifest m{root, {}};
    return load_clip(m, entry);
  };
}

ClipLoader synthetic_loader(DatasetSpec spec) {
  spec.validate();
  return [spec = std::move(spec)](const ManifestEntry& entry) {
    const auto& id = entry.sample_id;
    const auto dash = id.rfind('-');
    int index = -1;
    if (dash != std::string::npos) {
      std::from_chars(id.data() + dash + 1, id.data() + id.size(), index);
    }
    if (index < 0 || make_sample_id(entry.scenario, entry.proficiency, index) != id) {
      throw ValidationError("sample id '" + id + "' was not produced by plan_dataset");
    }
    return generate_clip(spec, entry.scenario, entry.proficiency, index);
  };
}

}  // namespace profpipe
