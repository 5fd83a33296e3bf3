#pragma once

#include "profpipe/dataset.hpp"
#include "profpipe/features.hpp"
#include "profpipe/nn.hpp"
#include "profpipe/random.hpp"

#include <filesystem>
#include <string>

#include <unistd.h>

namespace profpipe::test {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("profpipe-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small geometry so unit tests stay fast.
inline DatasetSpec tiny_spec(int clips_per_scenario = 8, std::uint64_t seed = 0) {
  DatasetSpec spec;
  spec.clips_per_scenario = clips_per_scenario;
  spec.frames_per_stream = 8;
  spec.height = 16;
  spec.width = 16;
  spec.seed = seed;
  return spec;
}

inline EncoderConfig tiny_encoder(EncoderArch arch = EncoderArch::FrameMlp, std::uint64_t seed = 0) {
  EncoderConfig cfg;
  cfg.architecture = arch;
  cfg.feature_dim = 8;
  cfg.hidden_dim = 6;
  cfg.crop_size = 12;
  cfg.seed = seed;
  return cfg;
}

inline Eigen::VectorXd random_simplex(int k, Engine& engine) {
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v(i) = -std::log(1.0 - uniform01(engine));
  return v / v.sum();
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Engine& engine, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * (2.0 * uniform01(engine) - 1.0);
  return m;
}

}  // namespace profpipe::test

namespace profpipe::test {

// Worst relative error between stored analytic gradients and central
// differences of `loss` (forward only) over every parameter entry.
template <typename LossFn>
double gradient_error(const ParameterRefs<double>& params, LossFn&& loss, double step = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data()[i];
      p->value.data()[i] = saved + step;
      const double up = loss();
      p->value.data()[i] = saved - step;
      const double down = loss();
      p->value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace profpipe::test
