#include "profpipe/classifier.hpp"

namespace profpipe {

FrameMatrix prepare_uniform_stack(const FrameStream& stream, int frames, const EncoderConfig& cfg) {
  return preprocess_frames(sample_frames_uniform(stream, frames), cfg.crop_size, cfg.stats).frames;
}

}  // namespace profpipe
