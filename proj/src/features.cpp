#include "profpipe/features.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace profpipe {

using nlohmann::json;

FrameStack sample_frames_interpolated(const FrameStream& stream, int frames, View view) {
  const int source = stream.frame_count();
  if (source < 1) throw ValidationError("cannot sample from an empty stream");
  if (frames < 1) throw ValidationError("frame count must be >= 1");

  FrameStack out{stream.height, stream.width, view, FrameMatrix(frames, stream.frames.cols())};
  for (int i = 0; i < frames; ++i) {
    const double pos = frames == 1 ? (source - 1) / 2.0
                                   : static_cast<double>(i) * (source - 1) / (frames - 1);
    const int lo = std::min(static_cast<int>(std::floor(pos)), source - 1);
    const double w = pos - lo;
    if (w == 0.0) {
      out.frames.row(i) = stream.frames.row(lo);
      continue;
    }
    const int hi = std::min(lo + 1, source - 1);
    const float* a = stream.frames.row(lo).data();
    const float* b = stream.frames.row(hi).data();
    float* dst = out.frames.row(i).data();
    for (Eigen::Index p = 0; p < stream.frames.cols(); ++p) {
      dst[p] = static_cast<float>((1.0 - w) * static_cast<double>(a[p]) + w * static_cast<double>(b[p]));
    }
  }
  return out;
}

std::vector<int> uniform_indices(int source_frames, int frames) {
  if (frames < 1) throw ValidationError("frame count must be >= 1");
  if (source_frames < frames) {
    throw ValidationError("uniform sampling needs T_src >= T (T_src = " + std::to_string(source_frames) +
                          ", T = " + std::to_string(frames) + ")");
  }
  std::vector<int> idx(static_cast<std::size_t>(frames));
  for (int i = 0; i < frames; ++i) {
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>((static_cast<std::int64_t>(i) * source_frames) / frames);
  }
  return idx;
}

FrameStack sample_frames_uniform(const FrameStream& stream, int frames, View view) {
  const auto idx = uniform_indices(stream.frame_count(), frames);
  FrameStack out{stream.height, stream.width, view, FrameMatrix(frames, stream.frames.cols())};
  for (int i = 0; i < frames; ++i) out.frames.row(i) = stream.frames.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

ResizePlan plan_resize(int height, int width, int crop_size) {
  if (height < 1 || width < 1) throw ValidationError("frame sides must be >= 1");
  if (crop_size < 1) throw ValidationError("crop_size must be >= 1");
  ResizePlan plan;
  if (height <= width) {
    plan.resized_height = crop_size;
    plan.resized_width =
        static_cast<int>(std::lround(static_cast<double>(width) * crop_size / height));
  } else {
    plan.resized_width = crop_size;
    plan.resized_height =
        static_cast<int>(std::lround(static_cast<double>(height) * crop_size / width));
  }
  // Rounding can only shrink the longer side to crop_size, never below it.
  assert(plan.resized_height >= crop_size && plan.resized_width >= crop_size);
  plan.crop_top = (plan.resized_height - crop_size) / 2;
  plan.crop_left = (plan.resized_width - crop_size) / 2;
  return plan;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double w;
};

// Half-pixel-centre source taps for one output axis.
std::vector<Tap> bilinear_taps(int in, int out, int offset, int count) {
  std::vector<Tap> taps(static_cast<std::size_t>(count));
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < count; ++i) {
    double src = (i + offset + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    taps[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return taps;
}

}  // namespace

FrameStack resize_and_crop(const FrameStack& stack, int crop_size) {
  const auto plan = plan_resize(stack.height, stack.width, crop_size);
  FrameStack out{crop_size, crop_size, stack.source_view,
                 FrameMatrix(stack.frame_count(), static_cast<Eigen::Index>(crop_size) * crop_size * 3)};
  const bool identity = plan.resized_height == stack.height && plan.resized_width == stack.width;
  const auto ys = bilinear_taps(stack.height, plan.resized_height, plan.crop_top, crop_size);
  const auto xs = bilinear_taps(stack.width, plan.resized_width, plan.crop_left, crop_size);

  for (int t = 0; t < stack.frame_count(); ++t) {
    const float* src = stack.frames.row(t).data();
    float* dst = out.frames.row(t).data();
    for (int y = 0; y < crop_size; ++y) {
      const auto& ty = ys[static_cast<std::size_t>(y)];
      for (int x = 0; x < crop_size; ++x) {
        const auto& tx = xs[static_cast<std::size_t>(x)];
        for (int c = 0; c < 3; ++c) {
          float value;
          if (identity) {
            value = src[(static_cast<std::size_t>(y + plan.crop_top) * stack.width + x + plan.crop_left) * 3 + c];
          } else {
            auto px = [&](int yy, int xx) {
              return static_cast<double>(src[(static_cast<std::size_t>(yy) * stack.width + xx) * 3 + c]);
            };
            const double top = (1.0 - tx.w) * px(ty.lo, tx.lo) + tx.w * px(ty.lo, tx.hi);
            const double bottom = (1.0 - tx.w) * px(ty.hi, tx.lo) + tx.w * px(ty.hi, tx.hi);
            value = static_cast<float>((1.0 - ty.w) * top + ty.w * bottom);
          }
          dst[(static_cast<std::size_t>(y) * crop_size + x) * 3 + c] = value;
        }
      }
    }
  }
  return out;
}

FrameStack normalize(const FrameStack& stack, const NormStats& stats) {
  for (const double s : stats.std) {
    if (!(s > 0.0)) throw ValidationError("normalisation std must be positive");
  }
  FrameStack out = stack;
  const Eigen::Index pixels = stack.frames.cols() / 3;
  for (Eigen::Index t = 0; t < out.frames.rows(); ++t) {
    float* row = out.frames.row(t).data();
    for (Eigen::Index p = 0; p < pixels; ++p) {
      for (int c = 0; c < 3; ++c) {
        float& v = row[p * 3 + c];
        v = static_cast<float>((static_cast<double>(v) - stats.mean[static_cast<std::size_t>(c)]) /
                               stats.std[static_cast<std::size_t>(c)]);
      }
    }
  }
  return out;
}

FrameStack preprocess_frames(const FrameStack& stack, int crop_size, const NormStats& stats) {
  return normalize(resize_and_crop(stack, crop_size), stats);
}

void EncoderConfig::validate(int max_classes, int frame_size) const {
  if (feature_dim < max_classes) {
    throw ValidationError("feature_dim (" + std::to_string(feature_dim) +
                          ") must be >= the widest head (" + std::to_string(max_classes) + ")");
  }
  if (hidden_dim < 1) throw ValidationError("hidden_dim must be >= 1");
  if (crop_size < 1 || crop_size > frame_size) {
    throw ValidationError("crop_size (" + std::to_string(crop_size) +
                          ") must lie in [1, generated frame side " + std::to_string(frame_size) + "]");
  }
  if (architecture == EncoderArch::TinyTemporalTransformer && (heads < 1 || feature_dim % heads != 0)) {
    throw ValidationError("feature_dim must be divisible by heads");
  }
  for (const double s : stats.std) {
    if (!(s > 0.0)) throw ValidationError("normalisation std must be positive");
  }
}

std::string_view name_of(EncoderArch arch) {
  return arch == EncoderArch::FrameMlp ? "frame-mlp" : "tiny-temporal-transformer";
}

EncoderArch encoder_arch_from_name(std::string_view name) {
  if (name == "frame-mlp") return EncoderArch::FrameMlp;
  if (name == "tiny-temporal-transformer") return EncoderArch::TinyTemporalTransformer;
  throw ValidationError("unknown encoder architecture '" + std::string(name) + "'");
}

json to_json(const EncoderConfig& cfg) {
  return {{"feature_dim", cfg.feature_dim},
          {"hidden_dim", cfg.hidden_dim},
          {"architecture", name_of(cfg.architecture)},
          {"heads", cfg.heads},
          {"mean", cfg.stats.mean},
          {"std", cfg.stats.std},
          {"crop_size", cfg.crop_size},
          {"seed", cfg.seed}};
}

void merge_json(const json& j, EncoderConfig& cfg) {
  try {
    cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    if (j.contains("architecture")) {
      cfg.architecture = encoder_arch_from_name(j.at("architecture").get<std::string>());
    }
    cfg.heads = j.value("heads", cfg.heads);
    if (j.contains("mean")) cfg.stats.mean = j.at("mean").get<std::array<double, 3>>();
    if (j.contains("std")) cfg.stats.std = j.at("std").get<std::array<double, 3>>();
    cfg.crop_size = j.value("crop_size", cfg.crop_size);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid encoder config: ") + e.what());
  }
}

}  // namespace profpipe
