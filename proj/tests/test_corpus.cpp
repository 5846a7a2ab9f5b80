#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "helpers.hpp"
#include "uverify/corpus.hpp"
#include "uverify/genspec_io.hpp"

using namespace uverify;
using testutil::TempDir;

namespace {

const testutil::World& shared_world() {
  static testutil::World w = testutil::make_world();
  return w;
}

CorpusManifest dummy_correct(std::size_t n, std::size_t words_per_script = 5) {
  CorpusManifest m;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry e;
    e.pair_id = "p" + std::to_string(i);
    std::string script;
    for (std::size_t w = 0; w < words_per_script; ++w)
      script += (w ? " " : "") + std::string("w") + std::to_string(i * 100 + w);
    e.script = script;
    e.feature_file = "f" + std::to_string(i) + ".feat";
    e.label = PairLabel::correct;
    m.entries.push_back(e);
  }
  return m;
}

}  // namespace

TEST_CASE("synthesis is deterministic under a fixed seed") {
  const auto& w = shared_world();
  auto a = synthesize_utterance("w0001 w0002", w.lexicon, w.test_gen, nullptr, 99);
  auto b = synthesize_utterance("w0001 w0002", w.lexicon, w.test_gen, nullptr, 99);
  REQUIRE(a.features.values.size() == b.features.values.size());
  for (std::size_t i = 0; i < a.features.values.size(); ++i)
    CHECK(a.features.values[i] == b.features.values[i]);
  auto c = synthesize_utterance("w0001 w0002", w.lexicon, w.test_gen, nullptr, 100);
  CHECK(c.features.values != a.features.values);
}

TEST_CASE("per-phone duration overrides are respected") {
  const auto& w = shared_world();
  GeneratorSpec spec = w.test_gen;
  const auto& pron = w.lexicon.lookup("w0001")->front().phones;
  spec.phone_durations[pron[0]] = {15, 15};
  spec.silence_prob = 0.0;
  auto synth = synthesize_utterance("w0001", w.lexicon, spec, nullptr, 3);
  REQUIRE(!synth.truth.segments.empty());
  bool saw_override = false;
  for (const auto& s : synth.truth.segments) {
    if (s.phone == pron[0] && s.begin == 0) {
      CHECK(s.end - s.begin == 15);
      saw_override = true;
      break;
    }
  }
  CHECK(saw_override);

  // round-trips through JSON
  testutil::TempDir dir;
  auto path = dir.file("spec.json");
  save_generator_spec(spec, path);
  auto loaded = load_generator_spec(path);
  REQUIRE(loaded.phone_durations.count(pron[0]));
  CHECK(loaded.phone_durations.at(pron[0]).min_frames == 15);
}

TEST_CASE("matched generator gives near-perfect truth-alignment APR") {
  const auto& w = shared_world();
  auto scripts = random_scripts(w.lexicon, 100, 4, 5);
  double apr_sum = 0.0;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    auto synth = synthesize_utterance(scripts[i], w.lexicon, w.train_gen, nullptr, 1000 + i);
    apr_sum += compute_apr(w.model, synth.truth, synth.features);
  }
  CHECK(apr_sum / 100.0 <= 1.5);
}

TEST_CASE("covariance inflation strictly lowers the mean LLR on the same seeds") {
  const auto& w = shared_world();
  StyleShift shift;
  shift.cov_inflation = 2.0;
  auto scripts = random_scripts(w.lexicon, 60, 4, 6);
  double base_sum = 0.0, shifted_sum = 0.0;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    auto base = synthesize_utterance(scripts[i], w.lexicon, w.test_gen, nullptr, 7000 + i);
    auto moved = synthesize_utterance(scripts[i], w.lexicon, w.test_gen, &shift, 7000 + i);
    REQUIRE(base.features.num_frames == moved.features.num_frames);
    base_sum += compute_llr(w.model, base.truth, base.features);
    shifted_sum += compute_llr(w.model, moved.truth, moved.features);
  }
  CHECK(shifted_sum / 60.0 < base_sum / 60.0);
}

TEST_CASE("style-shift rank stability statistic") {
  // Over 500 matched pairs the relative APR increase stays under 20% of the
  // relative LLR degradation toward the mismatch distribution.
  const auto& w = shared_world();
  auto shift = testutil::exaggerated_shift(4);
  auto scripts = random_scripts(w.lexicon, 500, 4, 42);
  double apr_read = 0.0, apr_shift = 0.0, llr_read = 0.0, llr_shift = 0.0;
  double apr_wrong = 0.0, llr_wrong = 0.0;
  auto jitter = testutil::read_style_jitter();
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    auto base = synthesize_utterance(scripts[i], w.lexicon, w.test_gen, &jitter, 4000 + i);
    auto moved = synthesize_utterance(scripts[i], w.lexicon, w.test_gen, &shift, 4000 + i);
    auto base_table = score_table(w.model, base.truth, base.features);
    auto moved_table = score_table(w.model, moved.truth, moved.features);
    apr_read += compute_apr(base_table);
    llr_read += compute_llr(base_table);
    apr_shift += compute_apr(moved_table);
    llr_shift += compute_llr(moved_table);
    // mismatched reference: a deranged script force-aligned onto this audio
    const auto& wrong_script = scripts[(i + 1) % scripts.size()];
    auto wrong_lattice = script_to_lattice(wrong_script, w.lexicon);
    auto wrong_alignment = viterbi_align(base.features, wrong_lattice, w.model, {});
    auto wrong_table = score_table(w.model, wrong_alignment, base.features);
    apr_wrong += compute_apr(wrong_table);
    llr_wrong += compute_llr(wrong_table);
  }
  const double n = 500.0;
  apr_read /= n;
  apr_shift /= n;
  llr_read /= n;
  llr_shift /= n;
  apr_wrong /= n;
  llr_wrong /= n;
  double apr_rel_increase = (apr_shift - apr_read) / (apr_wrong - apr_read);
  double llr_rel_degradation = (llr_read - llr_shift) / (llr_read - llr_wrong);
  CHECK(llr_rel_degradation > 0.0);
  CHECK(apr_rel_increase < 0.2 * llr_rel_degradation);
}

TEST_CASE("reassignment builds a derangement") {
  const auto& w = shared_world();
  SUBCASE("three pairs") {
    auto correct = dummy_correct(3);
    auto full = make_mismatch_set(correct, MismatchMode::reassign, 0, w.lexicon, 5);
    REQUIRE(full.entries.size() == 6);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& orig = full.entries[i];
      const auto& wrong = full.entries[3 + i];
      CHECK(wrong.label == PairLabel::incorrect);
      CHECK(wrong.feature_file == orig.feature_file);
      CHECK(wrong.script != orig.script);
    }
  }
  SUBCASE("no fixed points across many seeds") {
    auto correct = dummy_correct(9);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto full = make_mismatch_set(correct, MismatchMode::reassign, 0, w.lexicon, seed);
      for (std::size_t i = 0; i < 9; ++i)
        CHECK(full.entries[9 + i].script != full.entries[i].script);
    }
  }
  SUBCASE("needs two pairs") {
    auto correct = dummy_correct(1);
    CHECK_THROWS_AS(make_mismatch_set(correct, MismatchMode::reassign, 0, w.lexicon, 1),
                    ValidationError);
  }
}

TEST_CASE("word-edit mismatch modes") {
  const auto& w = shared_world();
  auto correct = dummy_correct(331, 10);

  SUBCASE("delete k=4 leaves 6 of 10 words") {
    auto full = make_mismatch_set(correct, MismatchMode::delete_words, 4, w.lexicon, 3);
    CHECK(full.count(PairLabel::correct) == 331);
    CHECK(full.count(PairLabel::incorrect) == 331);
    for (std::size_t i = 331; i < full.entries.size(); ++i) {
      CHECK(tokenize_script(full.entries[i].script).size() == 6);
      CHECK(full.entries[i].mode == MismatchMode::delete_words);
    }
  }
  SUBCASE("insert k=4 grows to 14 words") {
    auto full = make_mismatch_set(correct, MismatchMode::insert_words, 4, w.lexicon, 3);
    for (std::size_t i = 331; i < full.entries.size(); ++i)
      CHECK(tokenize_script(full.entries[i].script).size() == 14);
  }
  SUBCASE("substitute k=4 keeps 10 words but changes 4") {
    auto full = make_mismatch_set(correct, MismatchMode::substitute_words, 4, w.lexicon, 3);
    for (std::size_t i = 331; i < full.entries.size(); ++i) {
      auto before = tokenize_script(full.entries[i - 331].script);
      auto after = tokenize_script(full.entries[i].script);
      REQUIRE(after.size() == 10);
      std::size_t changed = 0;
      for (std::size_t k = 0; k < 10; ++k)
        if (before[k] != after[k]) ++changed;
      CHECK(changed == 4);
    }
  }
  SUBCASE("script too short for k edits") {
    auto small = dummy_correct(2, 4);
    CHECK_THROWS_WITH_AS(make_mismatch_set(small, MismatchMode::delete_words, 4, w.lexicon, 1),
                         doctest::Contains("need more than"), ValidationError);
  }
}

TEST_CASE("manifest io resolves relative paths") {
  TempDir dir;
  CorpusManifest m;
  m.entries.push_back({"a1", "w1 w2", "features/a1.feat", PairLabel::correct, "read",
                       MismatchMode::none});
  m.entries.push_back({"a1-x", "w2 w1", "features/a1.feat", PairLabel::incorrect, "read",
                       MismatchMode::reassign});
  auto path = dir.file("manifest.tsv");
  save_manifest(m, path);
  auto loaded = load_manifest(path);
  REQUIRE(loaded.entries.size() == 2);
  CHECK(loaded.entries[0].pair_id == "a1");
  CHECK(loaded.entries[0].script == "w1 w2");
  CHECK(loaded.entries[0].feature_file == dir.file("features/a1.feat"));
  CHECK(loaded.entries[1].label == PairLabel::incorrect);
  CHECK(loaded.entries[1].mode == MismatchMode::reassign);
}

TEST_CASE("generator spec JSON round-trip preserves parameters exactly") {
  TempDir dir;
  const auto& w = shared_world();
  auto path = dir.file("spec.json");
  save_generator_spec(w.test_gen, path);
  auto loaded = load_generator_spec(path);
  CHECK(loaded.dim == w.test_gen.dim);
  CHECK(loaded.phones.size() == w.test_gen.phones.size());
  for (const auto& [p, g] : w.test_gen.phones) {
    const auto& lg = loaded.phones.at(p);
    REQUIRE(lg.num_components() == g.num_components());
    for (std::size_t k = 0; k < g.num_components(); ++k) {
      CHECK(lg.components()[k].weight == g.components()[k].weight);
      CHECK(lg.components()[k].mean == g.components()[k].mean);
      CHECK(lg.components()[k].var == g.components()[k].var);
    }
  }
  REQUIRE(loaded.silence.has_value());
}

TEST_CASE("generate_corpus writes a balanced deterministic corpus") {
  TempDir dir;
  const auto& w = shared_world();
  CorpusOptions co;
  co.num_pairs = 12;
  co.words_per_script = 4;
  co.mode = MismatchMode::reassign;
  co.seed = 77;
  co.out_dir = dir.file("c1");
  auto m1 = generate_corpus(w.lexicon, w.test_gen, co);
  CHECK(m1.count(PairLabel::correct) == 12);
  CHECK(m1.count(PairLabel::incorrect) == 12);
  for (const auto& e : m1.entries) CHECK(std::filesystem::exists(e.feature_file));

  co.out_dir = dir.file("c2");
  auto m2 = generate_corpus(w.lexicon, w.test_gen, co);
  REQUIRE(m1.entries.size() == m2.entries.size());
  for (std::size_t i = 0; i < m1.entries.size(); ++i) {
    CHECK(m1.entries[i].pair_id == m2.entries[i].pair_id);
    CHECK(m1.entries[i].script == m2.entries[i].script);
    std::ifstream f1(m1.entries[i].feature_file), f2(m2.entries[i].feature_file);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }
}

TEST_CASE("evaluate with a generous threshold accepts an all-correct manifest") {
  TempDir dir;
  const auto& w = shared_world();
  CorpusOptions co;
  co.num_pairs = 10;
  co.words_per_script = 4;
  co.mode = MismatchMode::none;
  co.seed = 5;
  co.out_dir = dir.file("c");
  auto manifest = generate_corpus(w.lexicon, w.test_gen, co);
  VerifierConfig cfg;
  cfg.method = Method::APR;
  cfg.theta = 38.0;
  auto res = evaluate(manifest, w.model, w.lexicon, cfg, {}, 4);
  CHECK(res.accuracy() == 1.0);
  CHECK(res.counts.tp == 10);
  CHECK(res.counts.total() == 10);
}

TEST_CASE("evaluate counts match a hand recount of per-pair scores") {
  TempDir dir;
  const auto& w = shared_world();
  CorpusOptions co;
  co.num_pairs = 15;
  co.words_per_script = 4;
  co.mode = MismatchMode::reassign;
  co.seed = 21;
  co.out_dir = dir.file("c");
  auto manifest = generate_corpus(w.lexicon, w.test_gen, co);
  VerifierConfig cfg;
  cfg.method = Method::APR;
  cfg.theta = 5.0;
  auto res = evaluate(manifest, w.model, w.lexicon, cfg, {}, 4);
  std::size_t hits = 0;
  for (const auto& p : res.pairs) {
    bool said_match = !p.failed && p.score < 5.0;
    bool truth = p.label == PairLabel::correct;
    if (said_match == truth) ++hits;
  }
  CHECK(res.accuracy() ==
        static_cast<double>(hits) / static_cast<double>(res.pairs.size()));
}

TEST_CASE("pipeline failure on a pair is flagged, not thrown") {
  const auto& w = shared_world();
  CorpusManifest m;
  m.entries.push_back({"bad", "w0001", "/nonexistent/file.feat", PairLabel::incorrect, "read",
                       MismatchMode::none});
  VerifierConfig cfg;
  cfg.method = Method::APR;
  cfg.theta = 5.0;
  auto res = evaluate(m, w.model, w.lexicon, cfg, {}, 1);
  REQUIRE(res.pairs.size() == 1);
  CHECK(res.pairs[0].failed);
  CHECK(res.pairs[0].decision == Decision::mismatch);
  CHECK(res.counts.tn == 1);  // incorrect label + mismatch decision
}

TEST_CASE("sweep threshold behavior") {
  std::vector<ScoredPair> scored;
  auto add = [&](const std::string& id, PairLabel label, double apr) {
    ScoredPair sp;
    sp.entry.pair_id = id;
    sp.entry.label = label;
    sp.apr = apr;
    sp.llr = 0.0;
    scored.push_back(sp);
  };
  add("c1", PairLabel::correct, 1.0);
  add("c2", PairLabel::correct, 2.0);
  add("x1", PairLabel::incorrect, 8.0);
  add("x2", PairLabel::incorrect, 9.0);

  SUBCASE("single-point grid returns that point") {
    auto res = sweep_threshold_scored(scored, Method::APR, {4.0}, {}, 10);
    CHECK(res.best_threshold == 4.0);
    CHECK(res.curve.size() == 1);
  }
  SUBCASE("ties resolve to the smallest threshold") {
    auto res = sweep_threshold_scored(scored, Method::APR, {3.0, 4.0, 5.0, 6.0}, {}, 10);
    CHECK(res.best.accuracy() == 1.0);
    CHECK(res.best_threshold == 3.0);
  }
  SUBCASE("empty grid is an error") {
    CHECK_THROWS_AS(sweep_threshold_scored(scored, Method::APR, {}, {}, 10), ValidationError);
  }
}

TEST_CASE("APR sweep curve is unimodal-or-flat on separable data") {
  TempDir dir;
  const auto& w = shared_world();
  CorpusOptions co;
  co.num_pairs = 40;
  co.words_per_script = 4;
  co.mode = MismatchMode::reassign;
  co.seed = 31;
  co.out_dir = dir.file("c");
  auto manifest = generate_corpus(w.lexicon, w.test_gen, co);
  auto scored = score_pairs(manifest, w.model, w.lexicon, {}, 4);
  auto res = sweep_threshold_scored(scored, Method::APR, make_grid(1.0, 39.0, 0.5), {},
                                    w.model.inventory().size());
  // optimum strictly inside the grid
  CHECK(res.best_threshold > 1.0);
  CHECK(res.best_threshold < 39.0);
  // weakly increasing to the peak, weakly decreasing after
  std::size_t peak = 0;
  for (std::size_t i = 1; i < res.curve.size(); ++i)
    if (res.curve[i].accuracy > res.curve[peak].accuracy) peak = i;
  for (std::size_t i = 1; i <= peak; ++i)
    CHECK(res.curve[i].accuracy >= res.curve[i - 1].accuracy - 1e-12);
  for (std::size_t i = peak + 1; i < res.curve.size(); ++i)
    CHECK(res.curve[i].accuracy <= res.curve[i - 1].accuracy + 1e-12);
}

TEST_CASE("identical manifests give zero degradation") {
  TempDir dir;
  const auto& w = shared_world();
  CorpusOptions co;
  co.num_pairs = 20;
  co.words_per_script = 4;
  co.mode = MismatchMode::reassign;
  co.seed = 8;
  co.out_dir = dir.file("c");
  auto manifest = generate_corpus(w.lexicon, w.test_gen, co);
  auto rep = degradation_report(manifest, manifest, w.model, w.lexicon,
                                make_grid(-20, 5, 0.25), make_grid(1.5, 38.0, 0.5), {}, 4);
  CHECK(rep.delta_lrt() == 0.0);
  CHECK(rep.delta_apr() == 0.0);
}

TEST_CASE("degenerate utterances rank well but score terribly") {
  const auto& w = shared_world();
  auto synth = synthesize_degenerate_utterance("w0001 w0002 w0003", w.lexicon, w.test_gen,
                                               5.0, 0.05, 17);
  auto table = score_table(w.model, synth.truth, synth.features);
  CHECK(compute_llr(table) < -10.0);
  CHECK(compute_apr(table) < 10.0);
}
