#include "profpipe/multitask.hpp"

#include "profpipe/checkpoint.hpp"

namespace profpipe {

using nlohmann::json;

std::string_view name_of(ViewFusion fusion) {
  return fusion == ViewFusion::MeanOfPooledViews ? "mean-of-pooled-views" : "views-as-samples";
}

ViewFusion view_fusion_from_name(std::string_view name) {
  if (name == "mean-of-pooled-views" || name == "mean") return ViewFusion::MeanOfPooledViews;
  if (name == "views-as-samples" || name == "samples") return ViewFusion::ViewsAsSamples;
  throw ValidationError("unknown view fusion '" + std::string(name) + "'");
}

MultiTaskLossParts multitask_loss(const Vector<double>& logits_prof, int y_prof, const Vector<double>& logits_scen,
                                  int y_scen, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  MultiTaskLossParts parts;
  parts.alpha = alpha;
  parts.l_prof = cross_entropy(logits_prof, y_prof);
  parts.l_scen = cross_entropy(logits_scen, y_scen);
  parts.total = alpha * parts.l_prof + (1.0 - alpha) * parts.l_scen;
  return parts;
}

MultiTaskSample prepare_multitask_sample(const MultiViewClip& clip, const EncoderConfig& cfg, int frames) {
  MultiTaskSample sample;
  for (const auto v : kAllViews) {
    const auto& stream = clip.stream(v);
    if (stream.frame_count() == 0) {
      throw ValidationError("clip '" + clip.sample_id + "' is missing view " + std::string(name_of(v)));
    }
    sample.views[index_of(v)] =
        preprocess_frames(sample_frames_interpolated(stream, frames, v), cfg.crop_size, cfg.stats).frames;
  }
  sample.proficiency = index_of(clip.proficiency);
  sample.scenario = index_of(clip.scenario);
  return sample;
}

void save_multitask(const std::filesystem::path& path, MultiTaskModel<Real>& model, const TrainConfig& train) {
  Container c;
  c.meta = {{"kind", "multitask"},
            {"encoder", to_json(model.encoder().config())},
            {"train", to_json(train)},
            {"alpha", train.alpha},
            {"view_fusion", name_of(model.fusion())},
            {"frames", kMultiTaskFrames},
            {"seed", train.seed},
            {"assumptions", "optimizer recipe reused from the per-view classifiers"}};
  store_parameters(model.parameters(), c);
  write_container(path, c);
}

MultiTaskModel<Real> load_multitask(const std::filesystem::path& path, TrainConfig* train) {
  const Container c = read_container(path);
  try {
    if (c.meta.at("kind").get<std::string>() != "multitask") {
      throw CorruptContainerError(path.string() + " is not a multi-task checkpoint");
    }
    EncoderConfig enc;
    merge_json(c.meta.at("encoder"), enc);
    MultiTaskModel<Real> model(enc, view_fusion_from_name(c.meta.at("view_fusion").get<std::string>()));
    restore_parameters(c, model.parameters());
    if (train != nullptr) merge_json(c.meta.at("train"), *train);
    return model;
  } catch (const json::exception& e) {
    throw CorruptContainerError("corrupt multi-task checkpoint: " + std::string(e.what()));
  }
}

}  // namespace profpipe
