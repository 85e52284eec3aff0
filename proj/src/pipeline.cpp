// SPDX-License-Identifier: Apache-2.0
#include "disfluency/pipeline.hpp"

#include <cmath>

#include "disfluency/errors.hpp"
#include "disfluency/parallel.hpp"

namespace disfluency {

std::vector<ClassifiedSilence> classify_silences(const AudioClip& clip, std::span<const SilenceSpan> silences,
                                                 const SilenceClassifier& clf, double window_s) {
  std::vector<ClassifiedSilence> out;
  out.reserve(silences.size());
  for (const auto& s : silences) {
    const SilenceDecision d = classify(clf, build_feature(clip, s, window_s));
    out.push_back({s, d.label, d.score});
  }
  return out;
}

std::vector<RepairPlan> RepairResult::plans() const {
  std::vector<RepairPlan> out;
  for (const auto& p : passes) {
    if (!p.plan.edits.empty()) out.push_back(p.plan);
  }
  return out;
}

namespace {

void compose(std::vector<std::int64_t>& total, const std::vector<std::int64_t>& step) {
  std::vector<std::int64_t> out(step.size());
  for (std::size_t i = 0; i < step.size(); ++i) {
    out[i] = step[i] < 0 ? -1 : total[static_cast<std::size_t>(step[i])];
  }
  total = std::move(out);
}

}  // namespace

RepairResult repair_clip(const AudioClip& clip, const Models& models, const RepairConfig& cfg) {
  if (cfg.max_passes < 1) throw SpecError("max_passes must be at least 1");
  RepairResult r;
  const std::vector<SilenceSpan> original_silences = detect_silences(clip);
  r.noise_floor = estimate_noise_floor(clip, &original_silences);
  r.trace.source.resize(clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) r.trace.source[i] = static_cast<std::int64_t>(i);

  AudioClip current = clip;
  std::size_t fillers_after = 0;
  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    RepairPass p;
    p.fillers = crnn::predict_filler_spans(models.crnn, current, cfg.post);
    const std::vector<SilenceSpan> found = pass == 0 ? original_silences : detect_silences(current);
    p.masks = expand_filler_masks(p.fillers, found, current.duration_s(), cfg.padding);
    const AudioClip masked = mask_fillers(current, p.masks, cfg.fill, &r.noise_floor);
    const std::vector<SilenceSpan> resegmented = p.masks.empty() ? found : detect_silences(masked);
    p.silences = classify_silences(masked, resegmented, models.silence, cfg.window_s);

    if (pass == 0) {
      std::vector<double> fluent;
      for (const auto& s : p.silences) {
        if (s.label == SilenceLabel::fluent) fluent.push_back(s.span.duration_s());
      }
      if (fluent.empty()) {
        r.target_s = cfg.fallback_target_s;
        r.fallback_target = true;
      } else {
        r.histogram = fluent_histogram(fluent, cfg.bin_width_s);
        r.target_s = target_silence(*r.histogram);
      }
    }

    std::vector<ClassifiedSilence> to_retime = p.silences;
    if (pass > 0) {
      for (auto& s : to_retime) {
        if (std::abs(s.span.duration_s() - r.target_s) <= cfg.target_tolerance_s) s.label = SilenceLabel::fluent;
      }
    }
    p.plan = build_plan(current.duration_s(), p.masks, to_retime, r.target_s, cfg.fill);
    if (p.plan.edits.empty()) {
      r.converged = true;
      r.output_silences = resegmented;
      fillers_after = 0;
      r.passes.push_back(std::move(p));
      break;
    }
    ApplyTrace step;
    AudioClip next = apply_plan(current, p.plan, &r.noise_floor, &step);
    compose(r.trace.source, step.source);
    current = std::move(next);
    r.passes.push_back(std::move(p));
  }
  if (!r.converged) {
    r.output_silences = detect_silences(current);
    fillers_after = crnn::predict_filler_spans(models.crnn, current, cfg.post).size();
  }
  r.before = measure(clip, r.passes.front().fillers.size(), &original_silences);
  r.after = measure(current, fillers_after, &r.output_silences);
  r.output = std::move(current);
  return r;
}

AudioClip replay_plans(const AudioClip& clip, std::span<const RepairPlan> plans) {
  const NoiseFloor floor = estimate_noise_floor(clip);
  AudioClip current = clip;
  for (const auto& p : plans) current = apply_plan(current, p, &floor);
  return current;
}

crnn::TrainingExample make_detector_example(const AudioClip& clip, const LabelTrack& labels, FeatureKind kind) {
  crnn::TrainingExample ex;
  ex.features = extract(clip, kind);
  ex.labels = project_labels(labels, static_cast<std::size_t>(ex.features.frames()), ex.features.hop_s,
                             ex.features.origin_s);
  return ex;
}

std::vector<LabeledFeature> make_silence_examples(const AudioClip& clip, const LabelTrack& labels, double window_s,
                                                  FillMode fill) {
  const std::vector<SilenceSpan> found = detect_silences(clip);
  const NoiseFloor floor = estimate_noise_floor(clip, &found);
  const std::vector<TimeSpan> fillers = labels.spans_of(SpanClass::filler);
  const std::vector<TimeSpan> masks = expand_filler_masks(fillers, found, clip.duration_s());
  const AudioClip masked = mask_fillers(clip, masks, fill, &floor);
  std::vector<LabeledFeature> out;
  for (const auto& s : detect_silences(masked)) {
    bool inside = false;
    for (const auto& m : masks) inside = inside || m.overlaps(s.span());
    out.push_back({build_feature(masked, s, window_s), heuristic_label(s, inside)});
  }
  return out;
}

Corpus load_corpus(const Manifest& manifest, bool require_labels, unsigned workers) {
  const std::size_t n = manifest.entries.size();
  Corpus c;
  c.ids.resize(n);
  c.clips.resize(n);
  if (require_labels) c.labels.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    c.ids[i] = e.id;
    AudioClip clip = read_wav(e.wav);
    if (clip.sample_rate() != kCanonicalRate) clip = resample(clip, kCanonicalRate);
    if (require_labels) {
      if (e.labels.empty()) throw ParseError("manifest entry " + e.id + " has no labels");
      c.labels[i] = read_labels(e.labels);
      c.labels[i].validate(clip.duration_s());
    }
    c.clips[i] = std::move(clip);
  });
  return c;
}

TrainOutcome train_models(const Corpus& corpus, const TrainOptions& opts, const crnn::EpochCallback& on_epoch) {
  if (corpus.clips.empty()) throw EmptyDataset("corpus holds no clips");
  if (corpus.labels.size() != corpus.clips.size()) throw ParseError("training needs a labelled corpus");
  const std::size_t n = corpus.clips.size();
  std::vector<crnn::TrainingExample> detector(n);
  std::vector<std::vector<LabeledFeature>> silences(n);
  parallel_for(n, opts.workers, [&](std::size_t i) {
    detector[i] = make_detector_example(corpus.clips[i], corpus.labels[i], opts.features);
    silences[i] = make_silence_examples(corpus.clips[i], corpus.labels[i], opts.window_s);
  });
  std::vector<LabeledFeature> pooled;
  for (auto& v : silences) pooled.insert(pooled.end(), v.begin(), v.end());

  TrainOutcome out;
  out.silence_examples = pooled.size();
  out.models.silence = train_classifier(pooled, opts.classifier, opts.classifier_params);
  out.models.silence.window_s = opts.window_s;
  crnn::TrainResult r = crnn::train(detector, crnn::CrnnArch::for_kind(opts.features), opts.crnn, on_epoch);
  out.models.crnn = std::move(r.model);
  out.history = std::move(r.history);
  out.best_epoch = r.best_epoch;
  return out;
}

crnn::FrameScores evaluate_detector(const crnn::CrnnModel& model, const Corpus& corpus, unsigned workers) {
  if (corpus.labels.size() != corpus.clips.size()) throw ParseError("evaluation needs a labelled corpus");
  const std::size_t n = corpus.clips.size();
  std::vector<FrameLabels> pred(n), gold(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const crnn::TrainingExample ex = make_detector_example(corpus.clips[i], corpus.labels[i], model.arch.input_kind);
    pred[i] = crnn::predict_frames(model, ex.features);
    gold[i] = ex.labels;
  });
  FrameLabels p, g;
  for (std::size_t i = 0; i < n; ++i) {
    p.classes.insert(p.classes.end(), pred[i].classes.begin(), pred[i].classes.end());
    g.classes.insert(g.classes.end(), gold[i].classes.begin(), gold[i].classes.end());
  }
  return crnn::evaluate_frames(p, g);
}

}  // namespace disfluency
