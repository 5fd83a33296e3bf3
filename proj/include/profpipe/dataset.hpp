#pragma once

#include "profpipe/container.hpp"
#include "profpipe/core.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace profpipe {

/// T_src frames of one camera, each H x W x 3 with values in [0, 1].
struct FrameStream {
  int height = 0;
  int width = 0;
  FrameMatrix frames;  // T_src x (H * W * 3)

  int frame_count() const { return static_cast<int>(frames.rows()); }
  float at(int t, int y, int x, int c) const { return frames(t, (y * width + x) * 3 + c); }
  bool operator==(const FrameStream&) const = default;
};

struct MultiViewClip {
  std::string sample_id;
  Scenario scenario = Scenario::Dance;
  Proficiency proficiency = Proficiency::Novice;
  std::array<FrameStream, kNumViews> streams;

  const FrameStream& stream(View v) const { return streams[index_of(v)]; }
  FrameStream& stream(View v) { return streams[index_of(v)]; }
  bool operator==(const MultiViewClip&) const = default;
};

/// How a proficiency class maps onto the planted pattern family.
enum class PatternMode {
  Shared,            // class k plants pattern k in every scenario
  ScenarioPermuted,  // class k plants pattern (k + scenario) mod 4
};

struct DatasetSpec {
  int clips_per_scenario = 40;
  int frames_per_stream = 32;
  int height = 64;
  int width = 64;
  /// Amplitude of the planted proficiency pattern.
  double signal_strength = 1.0;
  /// Amplitude of the per-scenario colour/texture bias.
  double scenario_strength = 1.0;
  /// Upper bound of the random amplitude given to every pattern of the family
  /// independently of the class; the class signal has to stand out above it.
  double clutter = 0.5;
  double noise_std = 0.1;
  PatternMode pattern_mode = PatternMode::Shared;
  /// visibility[scenario][view] in [0, 1], scales the proficiency signal.
  std::array<std::array<double, kNumViews>, kNumScenarios> view_visibility{};
  std::uint64_t seed = 0;

  DatasetSpec();

  double visibility(Scenario s, View v) const { return view_visibility[index_of(s)][index_of(v)]; }
  void set_visibility(Scenario s, View v, double value) {
    view_visibility[index_of(s)][index_of(v)] = value;
  }

  /// Throws ValidationError describing the first violated invariant.
  void validate() const;
};

nlohmann::json to_json(const DatasetSpec& spec);
/// Keys absent from `j` keep the values already in `spec`.
void merge_json(const nlohmann::json& j, DatasetSpec& spec);

enum class Split { Train, Val };

std::string_view name_of(Split split);
Split split_from_name(std::string_view name);

struct ManifestEntry {
  std::string sample_id;
  Scenario scenario = Scenario::Dance;
  Proficiency proficiency = Proficiency::Novice;
  std::string path;  // relative to the manifest root
  Split split = Split::Train;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  /// Entries tagged with `split`, in manifest order.
  DatasetManifest filter(Split split) const;
  std::filesystem::path resolve(const ManifestEntry& entry) const { return root / entry.path; }
};

/// JSON Lines, one object per entry with keys sample_id, scenario,
/// proficiency, path, split.
std::string manifest_to_jsonl(const DatasetManifest& manifest);
DatasetManifest manifest_from_jsonl(std::string_view text, std::filesystem::path root);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// The manifest root is the directory holding the file.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Sample id of the i-th clip of a (scenario, proficiency) cell.
std::string make_sample_id(Scenario s, Proficiency p, int index);

/// Deterministic in (spec, sample id); independent of every other clip.
MultiViewClip generate_clip(const DatasetSpec& spec, Scenario s, Proficiency p, int index);

/// Entries for the full balanced grid, in generation order, without touching disk.
DatasetManifest plan_dataset(const DatasetSpec& spec);

/// Generates all clips into `out_dir/clips/` and returns their manifest
/// (root = out_dir, every entry tagged train). Throws IoError/ValidationError.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

struct SplitResult {
  DatasetManifest train;
  DatasetManifest val;
};

/// Stratified by (scenario, proficiency). The total validation count is
/// round(val_fraction * n), distributed over strata by largest remainder, so
/// every stratum's share is within one clip of val_fraction.
SplitResult split_dataset(const DatasetManifest& manifest, double val_fraction, std::uint64_t seed);

Container clip_to_container(const MultiViewClip& clip);
MultiViewClip clip_from_container(const Container& container);

void save_clip(const std::filesystem::path& path, const MultiViewClip& clip);
MultiViewClip load_clip(const std::filesystem::path& path);
MultiViewClip load_clip(const DatasetManifest& manifest, const ManifestEntry& entry);

/// Produces the clip behind a manifest entry.
using ClipLoader = std::function<MultiViewClip(const ManifestEntry&)>;

ClipLoader disk_loader(std::filesystem::path root);
/// Regenerates clips in memory; the entry's sample id must come from plan_dataset.
ClipLoader synthetic_loader(DatasetSpec spec);

}  // namespace profpipe
