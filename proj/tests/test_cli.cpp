// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "disfluency/audio.hpp"
#include "disfluency/binary_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "disfluency_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& log = "cli.log") {
  const std::string cmd = std::string(DISFLUENCY_CLI_PATH) + " " + args + " > " + (work() / log).string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small corpus and models shared by the tests below.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const fs::path cfg = work() / "config.json";
    std::ofstream(cfg) << R"({"seed": 3, "synth": {"n_clips": 8, "clip_len_s": 5.0, "filler_rate": 12},
                             "train": {"epochs": 2, "patience": 0}})";
    ASSERT_EQ(run("synth --config " + q(cfg) + " --out-dir " + q(work() / "corpus")), 0);
    ASSERT_EQ(run("train --config " + q(cfg) + " --manifest " + q(work() / "corpus/manifest.txt") + " --out-dir " +
                  q(work() / "models")),
              0);
  }
};

}  // namespace

TEST(CliUsage, ExitCodes) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("synth"), 1);
  EXPECT_EQ(run("synth --out-dir x --features plp"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(CliUsage, BadConfigIsDataError) {
  const fs::path cfg = work() / "bad.json";
  std::ofstream(cfg) << R"({"seed": 1, "colour": "blue"})";
  EXPECT_EQ(run("synth --config " + q(cfg) + " --out-dir " + q(work() / "never")), 2);
  std::ofstream(work() / "broken.json") << "{ not json";
  EXPECT_EQ(run("synth --config " + q(work() / "broken.json") + " --out-dir " + q(work() / "never")), 2);
}

TEST(CliUsage, UnwritableOutputDirectory) {
  std::ofstream(work() / "plainfile") << "x";
  EXPECT_EQ(run("synth --n-clips 1 --out-dir " + q(work() / "plainfile/sub"), "unwritable.log"), 2);
  EXPECT_NE(slurp(work() / "unwritable.log").find("error"), std::string::npos);
}

TEST(CliUsage, EmptyManifestIsDataError) {
  std::ofstream(work() / "empty_manifest.txt") << "# disfluency-manifest v1\n";
  EXPECT_EQ(run("train --manifest " + q(work() / "empty_manifest.txt") + " --out-dir " + q(work() / "m0")), 2);
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(run("synth --seed 3 --n-clips 8 --clip-len-s 5 --filler-rate 12 --out-dir " + q(work() / "corpus2")), 0);
  EXPECT_EQ(disfluency::file_digest(work() / "corpus/manifest.txt"),
            disfluency::file_digest(work() / "corpus2/manifest.txt"));
  EXPECT_EQ(disfluency::file_digest(work() / "corpus/clip_0005.wav"),
            disfluency::file_digest(work() / "corpus2/clip_0005.wav"));
}

TEST_F(Cli, TrainingIsReproducibleAndLogged) {
  const fs::path cfg = work() / "config.json";
  ASSERT_EQ(run("train --config " + q(cfg) + " --manifest " + q(work() / "corpus/manifest.txt") + " --out-dir " +
                q(work() / "models2")),
            0);
  for (const char* f : {"crnn.ckpt", "silence.ckpt"}) {
    EXPECT_EQ(disfluency::file_digest(work() / "models" / f), disfluency::file_digest(work() / "models2" / f)) << f;
  }
  std::istringstream log(slurp(work() / "models/train_log.tsv"));
  std::string line;
  int rows = 0;
  std::getline(log, line);
  EXPECT_NE(line.find("val_f1"), std::string::npos);
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST_F(Cli, RepairWritesOutputsAndReplays) {
  const fs::path out = work() / "rep";
  ASSERT_EQ(run("repair --input " + q(work() / "corpus/clip_0001.wav") + " --models " + q(work() / "models") +
                " --out-dir " + q(out)),
            0);
  for (const char* f : {"clip_0001.repaired.wav", "clip_0001.plan", "clip_0001.metrics.txt"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const std::string metrics = slurp(out / "clip_0001.metrics.txt");
  EXPECT_NE(metrics.find("# before"), std::string::npos);
  EXPECT_NE(metrics.find("# after"), std::string::npos);

  ASSERT_EQ(run("repair --input " + q(work() / "corpus/clip_0001.wav") + " --plan-in " + q(out / "clip_0001.plan") +
                " --output " + q(work() / "replayed/clip_0001.wav")),
            0);
  EXPECT_EQ(disfluency::file_digest(out / "clip_0001.repaired.wav"),
            disfluency::file_digest(work() / "replayed/clip_0001.wav"));
}

TEST_F(Cli, RepairNeedsModels) {
  EXPECT_EQ(run("repair --input " + q(work() / "corpus/clip_0001.wav") + " --models " + q(work() / "nowhere") +
                " --out-dir " + q(work() / "rep_missing")),
            2);
}

TEST_F(Cli, EvalTable) {
  ASSERT_EQ(run("eval --manifest " + q(work() / "corpus/manifest.txt") + " --models " + q(work() / "models") +
                " --folds 4 --out " + q(work() / "eval.tsv")),
            0);
  const std::string table = slurp(work() / "eval.tsv");
  EXPECT_NE(table.find("detector_frames"), std::string::npos);
  EXPECT_NE(table.find("silence_logreg_4fold_cv"), std::string::npos);

  // The same clips without label files.
  std::ofstream(work() / "corpus/unlabeled.txt") << "clip_0000 clip_0000.wav -\n";
  EXPECT_EQ(run("eval --manifest " + q(work() / "corpus/unlabeled.txt") + " --models " + q(work() / "models")), 2);
}

TEST_F(Cli, ReportIsSelfContained) {
  const fs::path out = work() / "rep_html";
  ASSERT_EQ(run("repair --input " + q(work() / "corpus/clip_0002.wav") + " --models " + q(work() / "models") +
                " --out-dir " + q(out)),
            0);
  ASSERT_EQ(run("report --before " + q(work() / "corpus/clip_0002.wav") + " --after " +
                q(out / "clip_0002.repaired.wav") + " --plan " + q(out / "clip_0002.plan") + " --metrics " +
                q(out / "clip_0002.metrics.txt") + " --output " + q(out / "report.html")),
            0);
  const std::string html = slurp(out / "report.html");
  EXPECT_NE(html.find("<svg"), std::string::npos);
  for (const char* ext : {"src=", "href=", "<link", "<script", "url(", "@import"}) {
    EXPECT_EQ(html.find(ext), std::string::npos) << ext;
  }
}

TEST_F(Cli, IdenticalReportHasZeroDeltas) {
  const fs::path wav = work() / "corpus/clip_0003.wav";
  ASSERT_EQ(run("report --before " + q(wav) + " --after " + q(wav) + " --output " + q(work() / "same.html")), 0);
  const std::string html = slurp(work() / "same.html");
  std::size_t zeros = 0;
  for (std::size_t at = html.find("<td>+0.000</td>"); at != std::string::npos; at = html.find("<td>+0.000</td>", at + 1)) {
    ++zeros;
  }
  EXPECT_EQ(zeros, 6u);
}
