// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "disfluency/binary_io.hpp"
#include "disfluency/errors.hpp"
#include "disfluency/pipeline.hpp"
#include "disfluency/report.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace disfluency;

namespace {

constexpr const char* kCrnnFile = "crnn.ckpt";
constexpr const char* kSilenceFile = "silence.ckpt";

// Settings shared by every command: file values first, flags on top.
struct Settings {
  std::uint64_t seed = 1;
  FeatureKind features = FeatureKind::mfcc;
  double window_s = kDefaultContextS;
  FillMode fill = FillMode::noise_floor;
  double bin_width_s = kHistogramBinS;
  unsigned workers = 0;
  SynthSpec synth;
  crnn::TrainConfig train;
  ClassifierKind classifier = ClassifierKind::logreg;
  std::optional<double> classifier_c;
  std::optional<int> classifier_iterations;
  bool features_set = false;
};

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw SpecError("unknown config key '" + where + k + "'");
  }
}

Range read_range(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 2) throw SpecError(std::string("config key '") + key + "' must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

void load_config(const fs::path& path, Settings& s) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  try {
    check_keys(j, {"seed", "features", "window_s", "fill", "bin_width_s", "workers", "synth", "train"}, "");
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("features")) {
      s.features = feature_kind_from_string(j["features"].get<std::string>());
      s.features_set = true;
    }
    if (j.contains("window_s")) s.window_s = j["window_s"].get<double>();
    if (j.contains("fill")) s.fill = fill_mode_from_string(j["fill"].get<std::string>());
    if (j.contains("bin_width_s")) s.bin_width_s = j["bin_width_s"].get<double>();
    if (j.contains("workers")) s.workers = j["workers"].get<unsigned>();
    if (j.contains("synth")) {
      const json& y = j["synth"];
      check_keys(y, {"n_clips", "clip_len_s", "filler_rate", "disfluent_pause_s", "fluent_pause_s", "word_len_s",
                     "disfluent_pause_prob", "snr_db"}, "synth.");
      if (y.contains("n_clips")) s.synth.n_clips = y["n_clips"].get<int>();
      if (y.contains("clip_len_s")) s.synth.clip_len_s = y["clip_len_s"].get<double>();
      if (y.contains("filler_rate")) s.synth.filler_rate = y["filler_rate"].get<double>();
      if (y.contains("disfluent_pause_s")) s.synth.disfluent_pause_s = read_range(y["disfluent_pause_s"], "disfluent_pause_s");
      if (y.contains("fluent_pause_s")) s.synth.fluent_pause_s = read_range(y["fluent_pause_s"], "fluent_pause_s");
      if (y.contains("word_len_s")) s.synth.word_len_s = read_range(y["word_len_s"], "word_len_s");
      if (y.contains("disfluent_pause_prob")) s.synth.disfluent_pause_prob = y["disfluent_pause_prob"].get<double>();
      if (y.contains("snr_db")) s.synth.snr_db = y["snr_db"].get<double>();
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      check_keys(t, {"lr", "l2_lambda", "epochs", "seq_len", "validation_fraction", "patience", "classifier",
                     "classifier_c", "classifier_iterations"}, "train.");
      if (t.contains("lr")) s.train.lr = t["lr"].get<double>();
      if (t.contains("l2_lambda")) s.train.l2_lambda = t["l2_lambda"].get<double>();
      if (t.contains("epochs")) s.train.epochs = t["epochs"].get<int>();
      if (t.contains("seq_len")) s.train.seq_len = t["seq_len"].get<int>();
      if (t.contains("validation_fraction")) s.train.validation_fraction = t["validation_fraction"].get<double>();
      if (t.contains("patience")) s.train.patience = t["patience"].get<int>();
      if (t.contains("classifier")) s.classifier = classifier_kind_from_string(t["classifier"].get<std::string>());
      if (t.contains("classifier_c")) s.classifier_c = t["classifier_c"].get<double>();
      if (t.contains("classifier_iterations")) s.classifier_iterations = t["classifier_iterations"].get<int>();
    }
  } catch (const json::exception& e) {
    throw SpecError("config " + path.string() + ": " + e.what());
  }
}

// Common flags, parsed into strings so that only given flags override.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> features;
  std::optional<double> window_s;
  std::optional<std::string> fill;
  std::optional<unsigned> workers;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--features", features, "Detector input features")->check(CLI::IsMember({"mfcc", "log_mel"}));
    app->add_option("--window-s", window_s, "Silence context window in seconds");
    app->add_option("--fill", fill, "Mask fill")->check(CLI::IsMember({"silence", "noise_floor"}));
    app->add_option("--workers", workers, "Worker threads (0 = all cores)");
  }

  Settings resolve() const {
    Settings s;
    if (!config.empty()) load_config(config, s);
    if (seed) s.seed = *seed;
    if (features) {
      s.features = feature_kind_from_string(*features);
      s.features_set = true;
    }
    if (window_s) s.window_s = *window_s;
    if (fill) s.fill = fill_mode_from_string(*fill);
    if (workers) s.workers = *workers;
    if (s.window_s < 0.8 || s.window_s > 1.0) throw SpecError("window_s must lie in [0.8, 1.0]");
    s.synth.seed = s.seed;
    s.train.seed = s.seed;
    return s;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Models load_models(const fs::path& dir, const Settings& s) {
  const fs::path c = dir / kCrnnFile, q = dir / kSilenceFile;
  if (!fs::exists(c) || !fs::exists(q)) throw IoError("model directory " + dir.string() + " lacks " + kCrnnFile + " or " + kSilenceFile);
  Models m{crnn::load_model(c), load_classifier(q)};
  if (s.features_set && m.crnn.arch.input_kind != s.features) {
    throw SpecError(std::string("model was trained on ") + std::string(to_string(m.crnn.arch.input_kind)) + " features");
  }
  return m;
}

std::string metrics_text(const FluencyReport& before, const FluencyReport& after) {
  return "# before\n" + format_report(before) + "# after\n" + format_report(after);
}

std::pair<FluencyReport, FluencyReport> parse_metrics(const std::string& text) {
  const auto cut = text.find("# after\n");
  if (cut == std::string::npos) throw ParseError("metrics file lacks an after section");
  return {parse_report(text.substr(0, cut)), parse_report(text.substr(cut))};
}

void print_comparison(const FluencyReport& before, const FluencyReport& after) {
  std::printf("%-6s %12s %12s %12s\n", "metric", "before", "after", "change");
  for (const auto& d : compare(before, after)) {
    std::printf("%-6s %12.4f %12.4f %+12.4f %s\n", d.name.c_str(), d.before, d.after, d.delta(),
                d.improved() ? "better" : (d.not_worse() ? "same" : "worse"));
  }
}

int cmd_synth(const CommonFlags& common, const fs::path& out_dir, std::optional<int> n_clips,
              std::optional<double> clip_len, std::optional<double> filler_rate, std::optional<double> snr) {
  Settings s = common.resolve();
  if (n_clips) s.synth.n_clips = *n_clips;
  if (clip_len) s.synth.clip_len_s = *clip_len;
  if (filler_rate) s.synth.filler_rate = *filler_rate;
  if (snr) s.synth.snr_db = *snr;
  const Manifest m = generate_corpus(s.synth, out_dir);
  const fs::path manifest = out_dir / kManifestName;
  std::printf("wrote %zu clips\nmanifest %s\ndigest %s\n", m.entries.size(), manifest.string().c_str(),
              file_digest(manifest).c_str());
  return 0;
}

int cmd_train(const CommonFlags& common, const fs::path& manifest_path, const fs::path& out_dir,
              std::optional<int> epochs, std::optional<int> patience, std::optional<std::string> classifier) {
  Settings s = common.resolve();
  if (epochs) s.train.epochs = *epochs;
  if (patience) s.train.patience = *patience;
  if (classifier) s.classifier = classifier_kind_from_string(*classifier);
  ensure_dir(out_dir);

  TrainOptions opts;
  opts.features = s.features;
  opts.crnn = s.train;
  opts.classifier = s.classifier;
  opts.classifier_params = ClassifierParams::defaults(s.classifier);
  if (s.classifier_c) opts.classifier_params.c = *s.classifier_c;
  if (s.classifier_iterations) opts.classifier_params.iterations = *s.classifier_iterations;
  opts.window_s = s.window_s;
  opts.workers = s.workers;

  const Corpus corpus = load_corpus(read_manifest(manifest_path), true, s.workers);
  std::ofstream log(out_dir / "train_log.tsv", std::ios::binary);
  log << "epoch\ttrain_loss\tval_loss\tval_f1\tseconds\n";
  const TrainOutcome out = train_models(corpus, opts, [&](const crnn::EpochStats& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.6f\t%.4f\t%.1f\n", e.epoch, e.train_loss, e.val_loss, e.val_f1, e.seconds);
    log << buf << std::flush;
    std::printf("epoch %3d  train %.4f  val %.4f  val_f1 %.4f  (%.1fs)\n", e.epoch, e.train_loss, e.val_loss, e.val_f1,
                e.seconds);
    std::fflush(stdout);
  });
  if (!log) throw IoError("cannot write training log");
  crnn::save_model(out.models.crnn, out_dir / kCrnnFile);
  save_classifier(out.models.silence, out_dir / kSilenceFile);
  std::printf("best epoch %d\nsilence examples %zu\n%s %s\n%s %s\n", out.best_epoch, out.silence_examples, kCrnnFile,
              file_digest(out_dir / kCrnnFile).c_str(), kSilenceFile, file_digest(out_dir / kSilenceFile).c_str());
  return 0;
}

int cmd_repair(const CommonFlags& common, const fs::path& input, const std::string& models_dir, fs::path out_dir,
               fs::path output, fs::path plan_out, const std::string& plan_in) {
  const Settings s = common.resolve();
  AudioClip clip = read_wav(input);
  if (clip.sample_rate() != kCanonicalRate) clip = resample(clip, kCanonicalRate);
  if (out_dir.empty()) out_dir = output.empty() ? fs::path(".") : output.parent_path();
  if (out_dir.empty()) out_dir = ".";
  ensure_dir(out_dir);
  const std::string stem = input.stem().string();
  if (output.empty()) output = out_dir / (stem + ".repaired.wav");
  if (plan_out.empty()) plan_out = out_dir / (stem + ".plan");
  const fs::path metrics_out = out_dir / (stem + ".metrics.txt");

  std::vector<RepairPlan> plans;
  AudioClip repaired;
  FluencyReport before, after;
  if (!plan_in.empty()) {
    plans = read_plans(plan_in);
    repaired = replay_plans(clip, plans);
    std::size_t masked = 0;
    for (const auto& p : plans) masked += p.count(EditKind::mask_filler);
    before = measure(clip, masked);
    after = measure(repaired, 0);
  } else {
    if (models_dir.empty()) throw IoError("repair needs --models or --plan-in");
    const Models models = load_models(models_dir, s);
    RepairConfig cfg;
    cfg.window_s = s.window_s;
    cfg.fill = s.fill;
    cfg.bin_width_s = s.bin_width_s;
    const RepairResult r = repair_clip(clip, models, cfg);
    if (r.noise_floor.fallback) std::fprintf(stderr, "warning: no silence found for the noise floor, using zeros\n");
    if (!r.converged) std::fprintf(stderr, "warning: repair did not converge in %zu passes\n", r.passes.size());
    plans = r.plans();
    repaired = r.output;
    before = r.before;
    after = r.after;
    std::printf("target silence %.3f s%s\n", r.target_s, r.fallback_target ? " (fallback)" : "");
  }
  if (plans.empty()) {
    RepairPlan empty;
    empty.source_duration_s = clip.duration_s();
    empty.target_silence_s = RepairConfig{}.fallback_target_s;
    plans.push_back(empty);
  }
  write_wav(repaired, output);
  write_plans(plans, plan_out);
  write_text(metrics_out, metrics_text(before, after));
  std::size_t masks = 0, retimes = 0;
  for (const auto& p : plans) {
    masks += p.count(EditKind::mask_filler);
    retimes += p.count(EditKind::retime_silence);
  }
  std::printf("%zu fillers masked, %zu silences retimed\n", masks, retimes);
  print_comparison(before, after);
  std::printf("output %s\nplan %s\nmetrics %s\n", output.string().c_str(), plan_out.string().c_str(),
              metrics_out.string().c_str());
  return 0;
}

int cmd_eval(const CommonFlags& common, const fs::path& manifest_path, const fs::path& models_dir, int folds,
             const std::string& out) {
  const Settings s = common.resolve();
  const Models models = load_models(models_dir, s);
  const Corpus corpus = load_corpus(read_manifest(manifest_path), true, s.workers);
  const crnn::FrameScores det = evaluate_detector(models.crnn, corpus, s.workers);

  std::vector<LabeledFeature> sil;
  for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
    auto v = make_silence_examples(corpus.clips[i], corpus.labels[i], models.silence.window_s);
    sil.insert(sil.end(), v.begin(), v.end());
  }
  std::vector<SilenceLabel> pred, ref;
  for (const auto& x : sil) {
    pred.push_back(classify(models.silence, x.feature).label);
    ref.push_back(x.label);
  }
  const ClassificationScores held = score_labels(pred, ref);
  const ClassificationScores cv = cross_validate(sil, models.silence.kind, models.silence.params, folds, s.seed);

  char buf[512];
  std::snprintf(buf, sizeof buf,
                "task\tprecision\trecall\tf1\n"
                "detector_frames\t%.4f\t%.4f\t%.4f\n"
                "silence_model\t%.4f\t%.4f\t%.4f\n"
                "silence_%s_%dfold_cv\t%.4f\t%.4f\t%.4f\n",
                det.precision, det.recall, det.f1, held.precision, held.recall, held.f1,
                std::string(to_string(models.silence.kind)).c_str(), folds, cv.precision, cv.recall, cv.f1);
  std::fputs(buf, stdout);
  if (!out.empty()) write_text(out, buf);
  return 0;
}

int cmd_report(const fs::path& before_wav, const fs::path& after_wav, const std::string& plan_path,
               const std::string& metrics_path, const fs::path& output) {
  ReportInput in;
  in.before = read_wav(before_wav);
  in.after = read_wav(after_wav);
  if (in.before.sample_rate() != kCanonicalRate) in.before = resample(in.before, kCanonicalRate);
  if (in.after.sample_rate() != kCanonicalRate) in.after = resample(in.after, kCanonicalRate);
  if (!plan_path.empty()) in.plans = read_plans(plan_path);
  in.title = "Fluency repair: " + before_wav.filename().string();
  if (!metrics_path.empty()) {
    std::tie(in.before_metrics, in.after_metrics) = parse_metrics(read_text(metrics_path));
  } else {
    std::size_t masked = 0;
    for (const auto& p : in.plans) masked += p.count(EditKind::mask_filler);
    in.before_metrics = measure(in.before, masked);
    in.after_metrics = measure(in.after, 0);
  }
  write_text(output, render_report(in));
  std::printf("report %s\n", output.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filler and pause detection, repair and fluency metrics for speech recordings"};
  app.require_subcommand(1);

  CommonFlags synth_flags, train_flags, repair_flags, eval_flags;

  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic corpus");
  synth_flags.add(synth);
  std::string synth_out;
  std::optional<int> n_clips;
  std::optional<double> clip_len, filler_rate, snr;
  synth->add_option("--out-dir", synth_out, "Output directory")->required();
  synth->add_option("--n-clips", n_clips, "Number of clips");
  synth->add_option("--clip-len-s", clip_len, "Clip length in seconds");
  synth->add_option("--filler-rate", filler_rate, "Fillers per minute");
  synth->add_option("--snr-db", snr, "Signal to noise ratio of the added noise");

  auto* train = app.add_subcommand("train", "Train the filler detector and the silence classifier");
  train_flags.add(train);
  std::string train_manifest, train_out;
  std::optional<int> epochs, patience;
  std::optional<std::string> classifier;
  train->add_option("--manifest", train_manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", train_out, "Model directory")->required();
  train->add_option("--epochs", epochs, "Maximum epochs");
  train->add_option("--patience", patience, "Early-stopping patience in epochs (0 = off)");
  train->add_option("--classifier", classifier, "Silence classifier")->check(CLI::IsMember({"logreg", "svm"}));

  auto* repair = app.add_subcommand("repair", "Remove fillers and retime pauses in a recording");
  repair_flags.add(repair);
  std::string repair_in, repair_models, repair_out_dir, repair_output, plan_out, plan_in;
  repair->add_option("--input", repair_in, "Input WAV")->required()->check(CLI::ExistingFile);
  repair->add_option("--models", repair_models, "Model directory");
  repair->add_option("--out-dir", repair_out_dir, "Output directory");
  repair->add_option("--output", repair_output, "Output WAV path");
  repair->add_option("--plan-out", plan_out, "Where to write the edit plan");
  repair->add_option("--plan-in", plan_in, "Replay an edit plan instead of running the models")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Score the models on a labelled corpus");
  eval_flags.add(eval);
  std::string eval_manifest, eval_models, eval_out;
  int folds = 10;
  eval->add_option("--manifest", eval_manifest, "Corpus manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--models", eval_models, "Model directory")->required();
  eval->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  eval->add_option("--out", eval_out, "Write the table to this file");

  auto* report = app.add_subcommand("report", "Render a before/after HTML report");
  std::string rep_before, rep_after, rep_plan, rep_metrics, rep_out;
  report->add_option("--before", rep_before, "Original WAV")->required()->check(CLI::ExistingFile);
  report->add_option("--after", rep_after, "Repaired WAV")->required()->check(CLI::ExistingFile);
  report->add_option("--plan", rep_plan, "Edit plan")->check(CLI::ExistingFile);
  report->add_option("--metrics", rep_metrics, "Metrics file written by repair")->check(CLI::ExistingFile);
  report->add_option("--output", rep_out, "HTML output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(synth_flags, synth_out, n_clips, clip_len, filler_rate, snr);
    if (*train) return cmd_train(train_flags, train_manifest, train_out, epochs, patience, classifier);
    if (*repair) return cmd_repair(repair_flags, repair_in, repair_models, repair_out_dir, repair_output, plan_out, plan_in);
    if (*eval) return cmd_eval(eval_flags, eval_manifest, eval_models, folds, eval_out);
    if (*report) return cmd_report(rep_before, rep_after, rep_plan, rep_metrics, rep_out);
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 1;
}
