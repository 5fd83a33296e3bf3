#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace profpipe {

// Scalar used by the training/inference pipeline. Gradient and oracle checks
// instantiate the templated math with double instead.
using Real = float;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// One frame per row, pixels flattened as (y, x, channel).
using FrameMatrix = RowMatrix<float>;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: configs, flags, out-of-range labels, malformed splits.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A container file exists but cannot be decoded.
class CorruptContainerError : public Error {
 public:
  using Error::Error;
};

/// A model was used before it was trained or loaded.
class UnfitModelError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Label spaces

inline constexpr int kNumScenarios = 6;
inline constexpr int kNumProficiency = 4;
inline constexpr int kNumViews = 5;
inline constexpr int kNumExoViews = 4;

enum class Scenario : int { Dance = 0, RockClimbing, Basketball, Music, Cooking, Soccer };

// Ordinal: Novice < EarlyExpert < IntermediateExpert < LateExpert.
enum class Proficiency : int { Novice = 0, EarlyExpert, IntermediateExpert, LateExpert };

enum class View : int { Ego = 0, Exo1, Exo2, Exo3, Exo4 };

inline constexpr std::array<Scenario, kNumScenarios> kAllScenarios = {
    Scenario::Dance, Scenario::RockClimbing, Scenario::Basketball,
    Scenario::Music, Scenario::Cooking,      Scenario::Soccer};

inline constexpr std::array<Proficiency, kNumProficiency> kAllProficiency = {
    Proficiency::Novice, Proficiency::EarlyExpert, Proficiency::IntermediateExpert,
    Proficiency::LateExpert};

inline constexpr std::array<View, kNumViews> kAllViews = {View::Ego, View::Exo1, View::Exo2,
                                                          View::Exo3, View::Exo4};

inline constexpr std::array<View, kNumExoViews> kExoViews = {View::Exo1, View::Exo2, View::Exo3,
                                                             View::Exo4};

constexpr int index_of(Scenario s) { return static_cast<int>(s); }
constexpr int index_of(Proficiency p) { return static_cast<int>(p); }
constexpr int index_of(View v) { return static_cast<int>(v); }

std::string_view name_of(Scenario s);
std::string_view name_of(Proficiency p);
std::string_view name_of(View v);

/// Human-readable scenario name used in report tables ("Rock Climbing").
std::string_view display_name(Scenario s);

Scenario scenario_from_id(int id);
Proficiency proficiency_from_id(int id);
View view_from_id(int id);

Scenario scenario_from_name(std::string_view name);
Proficiency proficiency_from_name(std::string_view name);
View view_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Deterministic randomness
//
// The engine is std::mt19937_64 (fully specified by the standard); the
// distributions below are hand-written so that streams do not depend on the
// standard library implementation.

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derive a child seed from a parent seed and a tag (FNV-1a over the tag).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace profpipe
