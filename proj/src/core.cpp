#include "profpipe/core.hpp"

#include <string>

namespace profpipe {

namespace {

constexpr std::array<std::string_view, kNumScenarios> kScenarioNames = {
    "Dance", "RockClimbing", "Basketball", "Music", "Cooking", "Soccer"};
constexpr std::array<std::string_view, kNumScenarios> kScenarioDisplay = {
    "Dance", "Rock Climbing", "Basketball", "Music", "Cooking", "Soccer"};
constexpr std::array<std::string_view, kNumProficiency> kProficiencyNames = {
    "Novice", "EarlyExpert", "IntermediateExpert", "LateExpert"};
constexpr std::array<std::string_view, kNumViews> kViewNames = {"ego", "exo1", "exo2", "exo3",
                                                                "exo4"};

template <std::size_t N>
int find_name(const std::array<std::string_view, N>& names, std::string_view name) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void check_id(int id, int count, const char* what) {
  if (id < 0 || id >= count) {
    throw ValidationError(std::string(what) + " id " + std::to_string(id) + " out of range [0, " +
                          std::to_string(count) + ")");
  }
}

}  // namespace

std::string_view name_of(Scenario s) { return kScenarioNames[index_of(s)]; }
std::string_view name_of(Proficiency p) { return kProficiencyNames[index_of(p)]; }
std::string_view name_of(View v) { return kViewNames[index_of(v)]; }
std::string_view display_name(Scenario s) { return kScenarioDisplay[index_of(s)]; }

Scenario scenario_from_id(int id) {
  check_id(id, kNumScenarios, "scenario");
  return static_cast<Scenario>(id);
}

Proficiency proficiency_from_id(int id) {
  check_id(id, kNumProficiency, "proficiency");
  return static_cast<Proficiency>(id);
}

View view_from_id(int id) {
  check_id(id, kNumViews, "view");
  return static_cast<View>(id);
}

Scenario scenario_from_name(std::string_view name) {
  int id = find_name(kScenarioNames, name);
  if (id < 0) id = find_name(kScenarioDisplay, name);
  if (id < 0) throw ValidationError("unknown scenario '" + std::string(name) + "'");
  return static_cast<Scenario>(id);
}

Proficiency proficiency_from_name(std::string_view name) {
  const int id = find_name(kProficiencyNames, name);
  if (id < 0) throw ValidationError("unknown proficiency '" + std::string(name) + "'");
  return static_cast<Proficiency>(id);
}

View view_from_name(std::string_view name) {
  const int id = find_name(kViewNames, name);
  if (id < 0) throw ValidationError("unknown view '" + std::string(name) + "'");
  return static_cast<View>(id);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(seed) ^ h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0x9e3779b97f4a7c15ULL));
}

}  // namespace profpipe
