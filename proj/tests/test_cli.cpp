// Drives the installed CLI binary end to end through std::system.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "uverify/common.hpp"

#ifndef UVERIFY_CLI_PATH
#error "UVERIFY_CLI_PATH must be defined"
#endif

namespace {

using testutil::TempDir;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args, const std::string& workdir) {
  std::string out_file = workdir + "/.cmd-output";
  std::string cmd = "cd '" + workdir + "' && '" + UVERIFY_CLI_PATH + "' " + args + " > '" +
                    out_file + "' 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  r.output.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// One shared synthetic-feature project: spec -> corpus -> model.
struct Project {
  TempDir dir;
  Project() {
    REQUIRE(run("gen-corpus --make-spec train-spec.json --dim 4 --box 3.0 --min-dist 1.8 "
                "--within-std 1.0 --seed 11",
                dir.path().string())
                .exit_code == 0);
    REQUIRE(run("gen-corpus --make-spec test-spec.json --perturb-of train-spec.json "
                "--mean-jitter 0.6 --var-scale 1.4 --seed 12",
                dir.path().string())
                .exit_code == 0);
    REQUIRE(run("gen-corpus --spec test-spec.json --random-lexicon 12 --pairs 24 "
                "--words-per-script 4 --mode reassign --gain-min 0.9 --gain-max 1.1 "
                "--seed 13 --out-dir corpus",
                dir.path().string())
                .exit_code == 0);
    REQUIRE(run("train --inventory corpus/inventory.txt --gen-spec train-spec.json "
                "--components 2 --iters 40 --seed 14 --out model.txt",
                dir.path().string())
                .exit_code == 0);
  }
  std::string wd() const { return dir.path().string(); }
};

Project& project() {
  static Project p;
  return p;
}

std::string first_correct_feature(const std::string& wd, std::string* script_out) {
  std::ifstream in(wd + "/corpus/manifest.tsv");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = uverify::split_char(line, '\t');
    if (cells.at(3) == "correct") {
      *script_out = cells.at(1);
      return cells.at(2);
    }
  }
  FAIL("no correct pair in manifest");
  return "";
}

}  // namespace

TEST_CASE("train is deterministic and reports EM progress") {
  auto& p = project();
  auto r1 = run("train --inventory corpus/inventory.txt --gen-spec train-spec.json "
                "--components 2 --iters 40 --seed 14 --out model-b.txt",
                p.wd());
  CHECK(r1.exit_code == 0);
  CHECK(r1.output.find("em ") != std::string::npos);
  CHECK(r1.output.find("loglik") != std::string::npos);
  CHECK(slurp(p.wd() + "/model.txt") == slurp(p.wd() + "/model-b.txt"));
}

TEST_CASE("train usage and data errors exit 2") {
  auto& p = project();
  auto missing = run("train --gen-spec train-spec.json --out x.txt", p.wd());
  CHECK(missing.exit_code == 2);
  auto no_source = run("train --inventory corpus/inventory.txt --out x.txt", p.wd());
  CHECK(no_source.exit_code == 2);
  // far more components than synthesized frames
  auto too_big = run("train --inventory corpus/inventory.txt --gen-spec train-spec.json "
                     "--components 64 --segments-per-phone 2 --out x.txt",
                     p.wd());
  CHECK(too_big.exit_code == 2);
  CHECK(too_big.output.find("insufficient training data for phone") != std::string::npos);
}

TEST_CASE("verify exit codes and report record") {
  auto& p = project();
  std::string script;
  std::string feature = first_correct_feature(p.wd(), &script);

  auto match = run("verify --model model.txt --lexicon corpus/lexicon.txt --script '" +
                       script + "' --method APR --theta 4.0 corpus/" + feature,
                   p.wd());
  CHECK(match.exit_code == 0);
  CHECK(match.output.find("pair_id\tmethod") != std::string::npos);
  CHECK(match.output.find("match") != std::string::npos);

  auto wrong = run("verify --model model.txt --lexicon corpus/lexicon.txt "
                   "--script 'w0007 w0003 w0009 w0001 w0005' --method APR --theta 4.0 corpus/" +
                       feature,
                   p.wd());
  CHECK(wrong.exit_code == 1);

  // tau = +inf forces the two-stage reject branch: score |P|, mismatch
  auto forced = run("verify --model model.txt --lexicon corpus/lexicon.txt --script '" +
                        script + "' --method APR2STAGE --tau 1e300 --theta 4.0 corpus/" +
                        feature,
                    p.wd());
  CHECK(forced.exit_code == 1);
  CHECK(forced.output.find("\t39\t") != std::string::npos);  // two_stage column = |P|

  auto bad_script = run("verify --model model.txt --lexicon corpus/lexicon.txt "
                        "--script '12345' --method APR --theta 4.0 corpus/" +
                            feature,
                        p.wd());
  CHECK(bad_script.exit_code == 2);

  // script from a file, with the inventory cross-checked against the model
  {
    std::ofstream sf(p.wd() + "/script.txt");
    sf << script << "\n";
  }
  auto from_file = run("verify --model model.txt --lexicon corpus/lexicon.txt "
                       "--inventory corpus/inventory.txt --script-file script.txt "
                       "--method APR --theta 4.0 corpus/" +
                           feature,
                       p.wd());
  CHECK(from_file.exit_code == 0);
}

TEST_CASE("align dumps segments with header") {
  auto& p = project();
  std::string script;
  std::string feature = first_correct_feature(p.wd(), &script);
  auto r = run("align --model model.txt --lexicon corpus/lexicon.txt --script '" + script +
                   "' corpus/" + feature + " --out align.txt",
               p.wd());
  CHECK(r.exit_code == 0);
  auto body = slurp(p.wd() + "/align.txt");
  CHECK(body.substr(0, 2) == "# ");
  CHECK(std::count(body.begin(), body.end(), '\n') >= 2);
}

TEST_CASE("gen-corpus reassign mode yields a derangement") {
  auto& p = project();
  auto r = run("gen-corpus --spec test-spec.json --lexicon corpus/lexicon.txt --pairs 10 "
               "--words-per-script 5 --mode reassign --seed 21 --out-dir derange",
               p.wd());
  CHECK(r.exit_code == 0);
  std::ifstream in(p.wd() + "/derange/manifest.tsv");
  std::string line;
  std::map<std::string, std::string> correct_script;  // feature_file -> script
  std::size_t checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = uverify::split_char(line, '\t');
    if (cells.at(3) == "correct") {
      correct_script[cells.at(2)] = cells.at(1);
    } else {
      REQUIRE(correct_script.count(cells.at(2)));
      CHECK(correct_script[cells.at(2)] != cells.at(1));
      ++checked;
    }
  }
  CHECK(checked == 10);
}

TEST_CASE("evaluate emits Table-style summary rows and is seed-stable") {
  auto& p = project();
  std::string cmd = "--jobs 2 evaluate --manifest corpus/manifest.tsv --model model.txt "
                    "--lexicon corpus/lexicon.txt --method LRT,APR --tau -0.5 --theta 3.5 "
                    "--out results.tsv";
  auto r1 = run(cmd, p.wd());
  CHECK(r1.exit_code == 0);
  auto body = slurp(p.wd() + "/results.tsv");
  CHECK(body.find("# method\tthreshold\tACC") != std::string::npos);
  CHECK(body.find("LRT\t") != std::string::npos);
  CHECK(body.find("APR\t") != std::string::npos);
  CHECK(body.find("delta") != std::string::npos);

  auto r2 = run("--jobs 7 evaluate --manifest corpus/manifest.tsv --model model.txt "
                "--lexicon corpus/lexicon.txt --method LRT,APR --tau -0.5 --theta 3.5 "
                "--out results2.tsv",
                p.wd());
  CHECK(r2.exit_code == 0);
  CHECK(slurp(p.wd() + "/results.tsv") == slurp(p.wd() + "/results2.tsv"));

  auto r3 = run("evaluate --manifest corpus/manifest.tsv --model model.txt "
                "--lexicon corpus/lexicon.txt --method LRT,APR,APR2STAGE --tau -0.5 "
                "--theta 3.5",
                p.wd());
  CHECK(r3.exit_code == 0);
  CHECK(r3.output.find("APR2STAGE\t") != std::string::npos);
}

TEST_CASE("options can come from a key=value config file") {
  auto& p = project();
  {
    std::ofstream cfg(p.wd() + "/run.cfg");
    cfg << "jobs=3\n";
  }
  std::string tail = "evaluate --manifest corpus/manifest.tsv --model model.txt "
                     "--lexicon corpus/lexicon.txt --method LRT,APR --tau -0.5 --theta 3.5 ";
  auto with_cfg = run("--config run.cfg " + tail + "--out results-cfg.tsv", p.wd());
  CHECK(with_cfg.exit_code == 0);
  auto with_flag = run("--jobs 3 " + tail + "--out results-flag.tsv", p.wd());
  CHECK(with_flag.exit_code == 0);
  CHECK(slurp(p.wd() + "/results-cfg.tsv") == slurp(p.wd() + "/results-flag.tsv"));
}

TEST_CASE("sweep writes a curve and prints the best threshold") {
  auto& p = project();
  auto r = run("sweep --manifest corpus/manifest.tsv --model model.txt --lexicon "
               "corpus/lexicon.txt --method APR --grid 1.5:39:0.5 --out curve.tsv",
               p.wd());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("best APR threshold") != std::string::npos);
  auto curve = slurp(p.wd() + "/curve.tsv");
  CHECK(curve.find("# threshold\taccuracy") != std::string::npos);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 77);  // header + 76 grid points
}

TEST_CASE("full WAV pipeline: train on sine phones, verify a recording") {
  TempDir dir;
  const std::string wd = dir.path().string();
  const std::size_t sr = 16000;

  // three "phones" realized as sines, plus near-silence
  auto tone = [&](double freq, double seconds, double amp, std::uint64_t seed) {
    uverify::Rng rng(seed);
    std::vector<std::int16_t> s(static_cast<std::size_t>(seconds * sr));
    // dither keeps the learned variances off the floor
    for (std::size_t i = 0; i < s.size(); ++i) {
      double v = amp * std::sin(2.0 * 3.14159265358979323846 * freq * i / sr) +
                 0.03 * rng.normal();
      s[i] = static_cast<std::int16_t>(std::lround(std::clamp(v, -0.999, 0.999) * 32767));
    }
    return s;
  };
  const double f_aa = 500, f_ss = 2200, f_kk = 4800;
  testutil::write_wav(dir.file("aa1.wav"), tone(f_aa, 0.8, 0.5, 1), sr);
  testutil::write_wav(dir.file("aa2.wav"), tone(f_aa, 0.8, 0.4, 2), sr);
  testutil::write_wav(dir.file("ss1.wav"), tone(f_ss, 0.8, 0.5, 3), sr);
  testutil::write_wav(dir.file("ss2.wav"), tone(f_ss, 0.8, 0.4, 4), sr);
  testutil::write_wav(dir.file("kk1.wav"), tone(f_kk, 0.8, 0.5, 5), sr);
  testutil::write_wav(dir.file("kk2.wav"), tone(f_kk, 0.8, 0.4, 6), sr);
  testutil::write_wav(dir.file("sil1.wav"), tone(0.0, 0.8, 0.0, 7), sr);

  {
    std::ofstream inv(dir.file("inventory.txt"));
    inv << "aa\nss\nkk\n:silence sil\n";
    std::ofstream lex(dir.file("lexicon.txt"));
    lex << "ah aa\nessay ss\nkay kk\nask aa ss kk\n";
    std::ofstream segs(dir.file("segments.tsv"));
    segs << "aa aa1.wav 0 -1\naa aa2.wav 0 -1\n"
         << "ss ss1.wav 0 -1\nss ss2.wav 0 -1\n"
         << "kk kk1.wav 0 -1\nkk kk2.wav 0 -1\n"
         << "sil sil1.wav 0 -1\n";
  }

  auto trained = run("train --inventory inventory.txt --segments segments.tsv "
                     "--components 1 --iters 20 --seed 3 --out model.txt",
                     wd);
  REQUIRE(trained.exit_code == 0);

  // utterance "ask ah": aa ss kk then aa, with a leading pause
  std::vector<std::int16_t> utt = tone(0.0, 0.15, 0.0, 8);
  for (auto chunk : {tone(f_aa, 0.4, 0.45, 9), tone(f_ss, 0.4, 0.45, 10),
                     tone(f_kk, 0.4, 0.45, 11), tone(f_aa, 0.4, 0.45, 12)}) {
    utt.insert(utt.end(), chunk.begin(), chunk.end());
  }
  testutil::write_wav(dir.file("utt.wav"), utt, sr);

  auto match = run("verify --model model.txt --lexicon lexicon.txt --script 'ask ah' "
                   "--method APR --theta 1.3 utt.wav",
                   wd);
  CHECK(match.exit_code == 0);
  // with a 3-phone inventory the rank scale is too coarse for mismatches;
  // the likelihood ratio separates them cleanly
  auto mismatch = run("verify --model model.txt --lexicon lexicon.txt --script 'kay kay essay' "
                      "--method LRT --tau 5.0 utt.wav",
                      wd);
  CHECK(mismatch.exit_code == 1);
  auto lrt_match = run("verify --model model.txt --lexicon lexicon.txt --script 'ask ah' "
                       "--method LRT --tau 5.0 utt.wav",
                       wd);
  CHECK(lrt_match.exit_code == 0);

  // a different frontend configuration must be rejected by the fingerprint
  auto fp = run("verify --model model.txt --lexicon lexicon.txt --script 'ask ah' "
                "--method APR --theta 2.0 --frame-length-ms 20 utt.wav",
                wd);
  CHECK(fp.exit_code == 2);
  CHECK(fp.output.find("fingerprint mismatch") != std::string::npos);
  auto fp_override = run("verify --model model.txt --lexicon lexicon.txt --script 'ask ah' "
                         "--method APR --theta 2.0 --frame-length-ms 20 --ignore-fingerprint "
                         "utt.wav",
                         wd);
  CHECK(fp_override.exit_code != 2);

  auto aligned = run("align --model model.txt --lexicon lexicon.txt --script 'ask ah' utt.wav",
                     wd);
  CHECK(aligned.exit_code == 0);
  CHECK(aligned.output.find("aa ") != std::string::npos);
  CHECK(aligned.output.find("kk ") != std::string::npos);
}
