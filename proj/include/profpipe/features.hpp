#pragma once

// Shared front end of both methods: frame sampling, resize/crop/normalise,
// the trainable stand-in encoder, and temporal mean pooling (see nn.hpp).

#include "profpipe/dataset.hpp"
#include "profpipe/nn.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace profpipe {

struct FrameStack {
  int height = 0;
  int width = 0;
  View source_view = View::Ego;
  FrameMatrix frames;  // T x (height * width * 3)

  int frame_count() const { return static_cast<int>(frames.rows()); }
  float at(int t, int y, int x, int c) const { return frames(t, (y * width + x) * 3 + c); }
};

struct NormStats {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};
};

/// Frame i is the linear blend of the two source frames around position
/// i * (T_src - 1) / (T - 1); for T = 1 the position is (T_src - 1) / 2.
/// Integral positions copy the source frame exactly.
FrameStack sample_frames_interpolated(const FrameStream& stream, int frames, View view = View::Ego);

/// floor(i * T_src / T) for i in [0, T).
std::vector<int> uniform_indices(int source_frames, int frames);

/// Selects uniform_indices(T_src, T) without blending. Requires T_src >= T.
FrameStack sample_frames_uniform(const FrameStream& stream, int frames, View view = View::Ego);

struct ResizePlan {
  int resized_height = 0;
  int resized_width = 0;
  int crop_top = 0;
  int crop_left = 0;
};

/// Shorter side to `crop_size` keeping aspect ratio, then a centred crop.
ResizePlan plan_resize(int height, int width, int crop_size);

/// Bilinear (half-pixel centres) shorter-side resize and centre crop, no normalisation.
FrameStack resize_and_crop(const FrameStack& stack, int crop_size);

/// Per-channel (x - mean) / std.
FrameStack normalize(const FrameStack& stack, const NormStats& stats);

FrameStack preprocess_frames(const FrameStack& stack, int crop_size, const NormStats& stats);

enum class EncoderArch { FrameMlp, TinyTemporalTransformer };

struct EncoderConfig {
  int feature_dim = 64;
  int hidden_dim = 32;  // frame-mlp hidden width
  EncoderArch architecture = EncoderArch::FrameMlp;
  int heads = 2;  // tiny-temporal-transformer only
  NormStats stats;
  int crop_size = 56;
  std::uint64_t seed = 0;

  int input_dim() const { return crop_size * crop_size * 3; }
  /// `max_classes` is the widest head the encoder will feed; `frame_size` the
  /// smaller generated side.
  void validate(int max_classes, int frame_size) const;
};

nlohmann::json to_json(const EncoderConfig& cfg);
void merge_json(const nlohmann::json& j, EncoderConfig& cfg);
std::string_view name_of(EncoderArch arch);
EncoderArch encoder_arch_from_name(std::string_view name);

/// Fixed sinusoidal position code, T x D.
template <typename Scalar>
Matrix<Scalar> positional_code(Eigen::Index frames, Eigen::Index dim) {
  Matrix<Scalar> pe(frames, dim);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (d / 2)) / static_cast<double>(dim));
      pe(t, d) = static_cast<Scalar>(d % 2 == 0 ? std::sin(t * rate) : std::cos(t * rate));
    }
  }
  return pe;
}

/// Maps preprocessed frames (one per row) to per-frame features F.
///
/// frame-mlp: F = relu(X W1' + b1) W2' + b2, applied to each frame alone.
///
/// tiny-temporal-transformer, per clip of T rows:
///   E = X We' + be + P                 (P: sinusoidal positions)
///   Y = E + concat_h(softmax(Q_h K_h' / sqrt(d_h)) V_h) Wo'
///   F = Y + relu(Y W3' + b3) W4' + b4
template <typename Scalar>
class Encoder {
 public:
  using Mat = Matrix<Scalar>;

  struct Tape {
    Eigen::Index frames_per_clip = 0;
    Mat input;
    // frame-mlp
    Mat pre_hidden, hidden;
    // transformer
    Mat embed, q, k, v, mixed, y, pre_ffn, ffn;
    std::vector<Mat> attention;  // (clip, head) row-major: clip * heads + h
  };

  Encoder() = default;

  explicit Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
    Engine engine(cfg.seed);
    const int in = cfg.input_dim();
    const int d = cfg.feature_dim;
    auto bound = [](int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
    if (cfg.architecture == EncoderArch::FrameMlp) {
      const int h = cfg.hidden_dim;
      params_.emplace_back("encoder.w1", uniform_matrix<Scalar>(h, in, bound(in), engine));
      params_.emplace_back("encoder.b1", Mat::Zero(h, 1));
      params_.emplace_back("encoder.w2", uniform_matrix<Scalar>(d, h, bound(h), engine));
      params_.emplace_back("encoder.b2", Mat::Zero(d, 1));
    } else {
      if (cfg.heads < 1 || d % cfg.heads != 0) {
        throw ValidationError("feature_dim must be divisible by the number of heads");
      }
      params_.emplace_back("encoder.we", uniform_matrix<Scalar>(d, in, bound(in), engine));
      params_.emplace_back("encoder.be", Mat::Zero(d, 1));
      params_.emplace_back("encoder.wq", uniform_matrix<Scalar>(d, d, bound(d), engine));
      params_.emplace_back("encoder.wk", uniform_matrix<Scalar>(d, d, bound(d), engine));
      params_.emplace_back("encoder.wv", uniform_matrix<Scalar>(d, d, bound(d), engine));
      params_.emplace_back("encoder.wo", uniform_matrix<Scalar>(d, d, bound(d), engine));
      params_.emplace_back("encoder.w3", uniform_matrix<Scalar>(d, d, bound(d), engine));
      params_.emplace_back("encoder.b3", Mat::Zero(d, 1));
      params_.emplace_back("encoder.w4", uniform_matrix<Scalar>(d, d, bound(d), engine));
      params_.emplace_back("encoder.b4", Mat::Zero(d, 1));
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  int feature_dim() const { return cfg_.feature_dim; }

  /// `input` stacks whole clips of `frames_per_clip` rows each.
  Mat forward(const Mat& input, Eigen::Index frames_per_clip, Tape* tape = nullptr) const {
    check_input(input, frames_per_clip);
    if (cfg_.architecture == EncoderArch::FrameMlp) return forward_mlp(input, frames_per_clip, tape);
    return forward_transformer(input, frames_per_clip, tape);
  }

  /// Accumulates parameter gradients for d loss / d F.
  void backward(const Tape& tape, const Mat& d_features) {
    if (cfg_.architecture == EncoderArch::FrameMlp) {
      backward_mlp(tape, d_features);
    } else {
      backward_transformer(tape, d_features);
    }
  }

  std::vector<Parameter<Scalar>>& parameters() { return params_; }
  const std::vector<Parameter<Scalar>>& parameters() const { return params_; }

  void collect(ParameterRefs<Scalar>& out) {
    for (auto& p : params_) out.push_back(&p);
  }

 private:
  const Mat& w(std::size_t i) const { return params_[i].value; }
  Mat& g(std::size_t i) { return params_[i].grad; }

  void check_input(const Mat& input, Eigen::Index frames_per_clip) const {
    if (params_.empty()) throw UnfitModelError("encoder has no parameters");
    if (input.cols() != cfg_.input_dim()) {
      throw ValidationError("encoder expects " + std::to_string(cfg_.input_dim()) +
                            " values per frame, got " + std::to_string(input.cols()));
    }
    if (frames_per_clip < 1 || input.rows() % frames_per_clip != 0) {
      throw ValidationError("encoder input rows are not a whole number of clips");
    }
  }

  static Mat affine(const Mat& x, const Mat& weight, const Mat& bias) {
    Mat out = x * weight.transpose();
    out.rowwise() += bias.col(0).transpose();
    return out;
  }

  Mat forward_mlp(const Mat& input, Eigen::Index frames_per_clip, Tape* tape) const {
    Mat pre = affine(input, w(0), w(1));
    Mat hidden = pre.cwiseMax(Scalar(0));
    Mat out = affine(hidden, w(2), w(3));
    if (tape != nullptr) {
      tape->frames_per_clip = frames_per_clip;
      tape->input = input;
      tape->pre_hidden = std::move(pre);
      tape->hidden = std::move(hidden);
    }
    return out;
  }

  void backward_mlp(const Tape& tape, const Mat& d_out) {
    g(2).noalias() += d_out.transpose() * tape.hidden;
    g(3).col(0) += d_out.colwise().sum().transpose();
    Mat d_pre = (d_out * w(2)).cwiseProduct(
        (tape.pre_hidden.array() > Scalar(0)).template cast<Scalar>().matrix());
    g(0).noalias() += d_pre.transpose() * tape.input;
    g(1).col(0) += d_pre.colwise().sum().transpose();
  }

  // Parameter slots: 0 we, 1 be, 2 wq, 3 wk, 4 wv, 5 wo, 6 w3, 7 b3, 8 w4, 9 b4.
  Mat forward_transformer(const Mat& input, Eigen::Index frames_per_clip, Tape* tape) const {
    const Eigen::Index d = cfg_.feature_dim;
    const Eigen::Index heads = cfg_.heads;
    const Eigen::Index dh = d / heads;
    const Eigen::Index clips = input.rows() / frames_per_clip;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    Mat embed = affine(input, w(0), w(1));
    const Mat pos = positional_code<Scalar>(frames_per_clip, d);
    for (Eigen::Index c = 0; c < clips; ++c) embed.middleRows(c * frames_per_clip, frames_per_clip) += pos;

    Mat q = embed * w(2).transpose();
    Mat k = embed * w(3).transpose();
    Mat v = embed * w(4).transpose();
    Mat mixed(input.rows(), d);
    std::vector<Mat> attention;
    if (tape != nullptr) attention.reserve(static_cast<std::size_t>(clips * heads));
    for (Eigen::Index c = 0; c < clips; ++c) {
      const Eigen::Index r0 = c * frames_per_clip;
      for (Eigen::Index h = 0; h < heads; ++h) {
        const Mat scores = scale * q.block(r0, h * dh, frames_per_clip, dh) *
                           k.block(r0, h * dh, frames_per_clip, dh).transpose();
        Mat a = softmax_rows(scores);
        mixed.block(r0, h * dh, frames_per_clip, dh) = a * v.block(r0, h * dh, frames_per_clip, dh);
        if (tape != nullptr) attention.push_back(std::move(a));
      }
    }
    Mat y = embed + mixed * w(5).transpose();
    Mat pre_ffn = affine(y, w(6), w(7));
    Mat ffn = pre_ffn.cwiseMax(Scalar(0));
    Mat out = y + affine(ffn, w(8), w(9));

    if (tape != nullptr) {
      tape->frames_per_clip = frames_per_clip;
      tape->input = input;
      tape->embed = std::move(embed);
      tape->q = std::move(q);
      tape->k = std::move(k);
      tape->v = std::move(v);
      tape->mixed = std::move(mixed);
      tape->y = std::move(y);
      tape->pre_ffn = std::move(pre_ffn);
      tape->ffn = std::move(ffn);
      tape->attention = std::move(attention);
    }
    return out;
  }

  void backward_transformer(const Tape& tape, const Mat& d_out) {
    const Eigen::Index d = cfg_.feature_dim;
    const Eigen::Index heads = cfg_.heads;
    const Eigen::Index dh = d / heads;
    const Eigen::Index frames = tape.frames_per_clip;
    const Eigen::Index clips = tape.input.rows() / frames;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    // Feed-forward block with residual.
    g(8).noalias() += d_out.transpose() * tape.ffn;
    g(9).col(0) += d_out.colwise().sum().transpose();
    const Mat d_pre = (d_out * w(8)).cwiseProduct(
        (tape.pre_ffn.array() > Scalar(0)).template cast<Scalar>().matrix());
    g(6).noalias() += d_pre.transpose() * tape.y;
    g(7).col(0) += d_pre.colwise().sum().transpose();
    const Mat d_y = d_out + d_pre * w(6);

    // Attention block with residual.
    g(5).noalias() += d_y.transpose() * tape.mixed;
    const Mat d_mixed = d_y * w(5);
    Mat d_q(tape.q.rows(), d), d_k(tape.k.rows(), d), d_v(tape.v.rows(), d);
    for (Eigen::Index c = 0; c < clips; ++c) {
      const Eigen::Index r0 = c * frames;
      for (Eigen::Index h = 0; h < heads; ++h) {
        const Mat& a = tape.attention[static_cast<std::size_t>(c * heads + h)];
        const auto d_o = d_mixed.block(r0, h * dh, frames, dh);
        const auto vh = tape.v.block(r0, h * dh, frames, dh);
        const auto qh = tape.q.block(r0, h * dh, frames, dh);
        const auto kh = tape.k.block(r0, h * dh, frames, dh);
        const Mat d_a = d_o * vh.transpose();
        d_v.block(r0, h * dh, frames, dh) = a.transpose() * d_o;
        const Vector<Scalar> row_dot = a.cwiseProduct(d_a).rowwise().sum();
        const Mat d_s = a.cwiseProduct(d_a - row_dot.replicate(1, frames));
        d_q.block(r0, h * dh, frames, dh) = scale * d_s * kh;
        d_k.block(r0, h * dh, frames, dh) = scale * d_s.transpose() * qh;
      }
    }
    g(2).noalias() += d_q.transpose() * tape.embed;
    g(3).noalias() += d_k.transpose() * tape.embed;
    g(4).noalias() += d_v.transpose() * tape.embed;
    const Mat d_embed = d_y + d_q * w(2) + d_k * w(3) + d_v * w(4);

    g(0).noalias() += d_embed.transpose() * tape.input;
    g(1).col(0) += d_embed.colwise().sum().transpose();
  }

  EncoderConfig cfg_;
  std::vector<Parameter<Scalar>> params_;
};

/// Copies whole frame stacks into one encoder input matrix.
template <typename Scalar>
Matrix<Scalar> stack_frames(const std::vector<const FrameMatrix*>& stacks) {
  if (stacks.empty()) return {};
  Eigen::Index rows = 0;
  for (const auto* s : stacks) rows += s->rows();
  Matrix<Scalar> out(rows, stacks.front()->cols());
  Eigen::Index r = 0;
  for (const auto* s : stacks) {
    out.middleRows(r, s->rows()) = s->template cast<Scalar>();
    r += s->rows();
  }
  return out;
}

}  // namespace profpipe
