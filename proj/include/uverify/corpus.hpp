#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "uverify/align.hpp"
#include "uverify/common.hpp"
#include "uverify/features.hpp"
#include "uverify/gmm.hpp"
#include "uverify/lexicon.hpp"
#include "uverify/model.hpp"
#include "uverify/verify.hpp"

namespace uverify {

struct DurationRange {
  std::size_t min_frames = 4;
  std::size_t max_frames = 8;

  void validate() const {
    if (min_frames == 0 || min_frames > max_frames)
      throw ValidationError("duration range must satisfy 1 <= min <= max");
  }
};

// Synthetic speech stand-in: a frame distribution per phone. The generator
// mixtures may deliberately differ from the trained model's.
struct GeneratorSpec {
  std::size_t dim = 0;
  std::map<std::string, Gmm> phones;
  std::optional<Gmm> silence;
  DurationRange duration{4, 8};                          // default for all phones
  std::map<std::string, DurationRange> phone_durations;  // per-phone overrides
  DurationRange silence_duration{2, 5};
  double silence_prob = 0.5;  // chance of a silence stretch at each word boundary
  std::uint64_t seed = 0;

  const Gmm& generator_for(const std::string& phone) const {
    auto it = phones.find(phone);
    if (it == phones.end())
      throw ValidationError("generator spec has no distribution for phone '" + phone + "'");
    return it->second;
  }

  const DurationRange& duration_for(const std::string& phone) const {
    auto it = phone_durations.find(phone);
    return it == phone_durations.end() ? duration : it->second;
  }

  void validate() const {
    if (dim == 0) throw ValidationError("generator spec dimension must be positive");
    if (phones.empty()) throw ValidationError("generator spec has no phone distributions");
    duration.validate();
    silence_duration.validate();
    if (silence_prob < 0.0 || silence_prob > 1.0)
      throw ValidationError("silence probability must lie in [0, 1]");
    for (const auto& [p, g] : phones)
      if (g.dim() != dim)
        throw ValidationError("generator for phone '" + p + "' has wrong dimension");
    for (const auto& [p, d] : phone_durations) {
      d.validate();
      if (!phones.count(p))
        throw ValidationError("duration override for unknown phone '" + p + "'");
    }
    if (silence && silence->dim() != dim)
      throw ValidationError("silence generator has wrong dimension");
  }
};

// Likelihood-degrading transform emulating a speech-style change: a shared
// mean offset, a covariance inflation factor applied to the sampling noise,
// and a per-utterance random gain. Applied identically to every phone of an
// utterance.
struct StyleShift {
  std::vector<double> mean_offset;  // empty = zero offset
  double cov_inflation = 1.0;       // gamma >= 1
  double gain_min = 1.0;
  double gain_max = 1.0;

  void validate(std::size_t dim) const {
    if (cov_inflation < 1.0) throw ValidationError("covariance inflation must be >= 1");
    if (!(gain_min <= gain_max) || gain_min <= 0.0)
      throw ValidationError("gain range must satisfy 0 < min <= max");
    if (!mean_offset.empty() && mean_offset.size() != dim)
      throw ValidationError("mean offset dimension mismatch");
    if (!all_finite(mean_offset)) throw ValidationError("mean offset must be finite");
  }
};

struct SynthesisResult {
  FeatureMatrix features;
  Alignment truth;  // generation segmentation; total_loglik is not populated
};

namespace detail {

// Draws one frame from a mixture: component by weight, then mean + scaled
// noise. The rng stream is independent of the shift so that shifted and
// unshifted runs of the same seed are frame-by-frame comparable.
inline void sample_frame(const Gmm& g, Rng& rng, double noise_scale, double gain,
                         std::span<const double> offset, std::span<double> out) {
  const auto& comps = g.components();
  double u = rng.uniform();
  std::size_t pick = comps.size() - 1;
  double acc = 0.0;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    acc += comps[k].weight;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  const auto& c = comps[pick];
  for (std::size_t j = 0; j < out.size(); ++j) {
    double x = c.mean[j] + noise_scale * std::sqrt(c.var[j]) * rng.normal();
    out[j] = gain * x + (offset.empty() ? 0.0 : offset[j]);
  }
}

}  // namespace detail

// Concatenates per-phone frame samples for the script's first pronunciation
// expansion, with optional silence stretches at word boundaries, applying
// the StyleShift if given. Deterministic under the seed.
inline SynthesisResult synthesize_utterance(const std::string& script, const Lexicon& lex,
                                            const GeneratorSpec& spec, const StyleShift* shift,
                                            std::uint64_t seed) {
  spec.validate();
  if (shift) shift->validate(spec.dim);
  auto lattice = script_to_lattice(script, lex);
  auto prons = lattice.expansion(0);

  Rng rng(seed);
  Rng shift_rng(mix_seed(seed, fnv1a("style-shift")));
  const double gain = shift ? shift_rng.uniform(shift->gain_min, shift->gain_max) : 1.0;
  const double noise_scale = shift ? std::sqrt(shift->cov_inflation) : 1.0;
  const std::span<const double> offset =
      shift && !shift->mean_offset.empty() ? std::span<const double>(shift->mean_offset)
                                           : std::span<const double>();

  struct PlannedSegment {
    const Gmm* gen;
    std::string phone;
    std::size_t frames;
    bool is_silence;
  };
  std::vector<PlannedSegment> plan;
  auto maybe_silence = [&]() {
    if (!spec.silence || !lex.inventory.silence) return;
    // the draw happens unconditionally so the stream does not depend on
    // whether the coin lands heads
    double coin = rng.uniform();
    std::size_t frames = static_cast<std::size_t>(rng.integer(
        static_cast<std::int64_t>(spec.silence_duration.min_frames),
        static_cast<std::int64_t>(spec.silence_duration.max_frames)));
    if (coin < spec.silence_prob)
      plan.push_back({&*spec.silence, *lex.inventory.silence, frames, true});
  };
  maybe_silence();
  for (std::size_t wi = 0; wi < prons.size(); ++wi) {
    if (wi > 0) maybe_silence();
    for (const auto& p : prons[wi]->phones) {
      const Gmm& g = spec.generator_for(p);
      const DurationRange& dur = spec.duration_for(p);
      std::size_t frames = static_cast<std::size_t>(
          rng.integer(static_cast<std::int64_t>(dur.min_frames),
                      static_cast<std::int64_t>(dur.max_frames)));
      plan.push_back({&g, p, frames, false});
    }
  }
  maybe_silence();

  std::size_t total = 0;
  for (const auto& s : plan) total += s.frames;
  SynthesisResult out;
  out.features.num_frames = total;
  out.features.dim = spec.dim;
  out.features.values.resize(total * spec.dim);
  out.truth.num_frames = total;

  std::size_t t = 0;
  for (const auto& s : plan) {
    AlignedSegment seg;
    seg.phone = s.phone;
    seg.begin = t;
    seg.is_silence = s.is_silence;
    for (std::size_t i = 0; i < s.frames; ++i, ++t)
      detail::sample_frame(*s.gen, rng, noise_scale, gain, offset, out.features.frame(t));
    seg.end = t;
    out.truth.segments.push_back(std::move(seg));
  }
  return out;
}

// Degenerate utterance for the two-stage experiments: frames placed far out
// along each script phone's own mean direction, so the right phone still
// wins the ranking while every absolute likelihood is extremely low.
inline SynthesisResult synthesize_degenerate_utterance(const std::string& script,
                                                       const Lexicon& lex,
                                                       const GeneratorSpec& spec, double scale,
                                                       double noise_std, std::uint64_t seed) {
  spec.validate();
  auto lattice = script_to_lattice(script, lex);
  auto prons = lattice.expansion(0);
  Rng rng(seed);

  std::vector<std::pair<const Gmm*, std::string>> units;
  for (const auto* pron : prons)
    for (const auto& p : pron->phones) units.emplace_back(&spec.generator_for(p), p);

  std::vector<std::size_t> durations(units.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const DurationRange& dur = spec.duration_for(units[i].second);
    durations[i] = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(dur.min_frames),
                    static_cast<std::int64_t>(dur.max_frames)));
    total += durations[i];
  }

  SynthesisResult out;
  out.features.num_frames = total;
  out.features.dim = spec.dim;
  out.features.values.resize(total * spec.dim);
  out.truth.num_frames = total;
  std::size_t t = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& mean = units[i].first->components().front().mean;
    AlignedSegment seg;
    seg.phone = units[i].second;
    seg.begin = t;
    for (std::size_t f = 0; f < durations[i]; ++f, ++t) {
      auto row = out.features.frame(t);
      for (std::size_t j = 0; j < spec.dim; ++j)
        row[j] = scale * mean[j] + noise_std * rng.normal();
    }
    seg.end = t;
    out.truth.segments.push_back(std::move(seg));
  }
  return out;
}

enum class PairLabel { correct, incorrect };
enum class MismatchMode { none, delete_words, insert_words, substitute_words, reassign };

inline std::string label_name(PairLabel l) {
  return l == PairLabel::correct ? "correct" : "incorrect";
}
inline PairLabel parse_label(const std::string& s) {
  if (s == "correct") return PairLabel::correct;
  if (s == "incorrect") return PairLabel::incorrect;
  throw FormatError("unknown pair label '" + s + "'");
}

inline std::string mode_name(MismatchMode m) {
  switch (m) {
    case MismatchMode::none: return "none";
    case MismatchMode::delete_words: return "delete";
    case MismatchMode::insert_words: return "insert";
    case MismatchMode::substitute_words: return "substitute";
    case MismatchMode::reassign: return "reassign";
  }
  throw ValidationError("invalid mismatch mode");
}

inline MismatchMode parse_mode(const std::string& s) {
  if (s == "none") return MismatchMode::none;
  if (s == "delete") return MismatchMode::delete_words;
  if (s == "insert") return MismatchMode::insert_words;
  if (s == "substitute") return MismatchMode::substitute_words;
  if (s == "reassign") return MismatchMode::reassign;
  throw FormatError("unknown mismatch mode '" + s + "'");
}

struct ManifestEntry {
  std::string pair_id;
  std::string script;
  std::string feature_file;
  PairLabel label = PairLabel::correct;
  std::string style = "read";
  MismatchMode mode = MismatchMode::none;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  std::size_t count(PairLabel l) const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.label == l) ++n;
    return n;
  }
};

// Tab-separated manifest; the script column therefore must not contain tabs.
inline void save_manifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest file: " + path);
  out << "# pair_id\tscript\tfeature_file\tlabel\tstyle\tmode\n";
  for (const auto& e : m.entries) {
    if (e.script.find('\t') != std::string::npos)
      throw ValidationError("script contains a tab character: " + e.pair_id);
    out << e.pair_id << '\t' << e.script << '\t' << e.feature_file << '\t'
        << label_name(e.label) << '\t' << e.style << '\t' << mode_name(e.mode) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

// Relative feature paths are resolved against the manifest's directory.
inline CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest file: " + path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  CorpusManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_char(line, '\t');
    if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r')
      cells.back().pop_back();
    if (cells.size() != 6)
      throw FormatError("manifest line " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " columns, expected 6: " + path);
    ManifestEntry e;
    e.pair_id = cells[0];
    e.script = cells[1];
    std::filesystem::path f = cells[2];
    e.feature_file = f.is_absolute() ? f.string() : (base / f).string();
    e.label = parse_label(cells[3]);
    e.style = cells[4];
    e.mode = parse_mode(cells[5]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace detail {

// Fixed-point-free permutation (a uniform cycle, Sattolo's algorithm).
inline std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
  if (n < 2) throw ValidationError("derangement needs at least 2 elements");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = rng.index(i);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           Rng& rng) {
  if (k > n) throw ValidationError("cannot sample " + std::to_string(k) + " of " +
                                   std::to_string(n) + " positions");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace detail

// Spawns one incorrect pair per correct pair. Word-edit modes apply k edits
// at positions sampled without replacement; reassignment permutes scripts
// with no fixed points. Inserted and substituted words are drawn uniformly
// from the lexicon's word list.
inline CorpusManifest make_mismatch_set(const CorpusManifest& correct, MismatchMode mode,
                                        std::size_t k, const Lexicon& lex, std::uint64_t seed) {
  if (mode == MismatchMode::none) throw ValidationError("mismatch mode must not be 'none'");
  for (const auto& e : correct.entries)
    if (e.label != PairLabel::correct)
      throw ValidationError("make_mismatch_set expects a manifest of correct pairs");
  const std::size_t n = correct.entries.size();
  if (n == 0) throw ValidationError("empty manifest");
  if (mode == MismatchMode::reassign && n < 2)
    throw ValidationError("reassignment needs at least 2 pairs");
  auto vocab = lex.words();
  if (vocab.empty() && (mode == MismatchMode::insert_words || mode == MismatchMode::substitute_words))
    throw ValidationError("lexicon has no words to sample from");

  Rng rng(seed);
  CorpusManifest out;
  out.entries = correct.entries;

  std::vector<std::size_t> perm;
  if (mode == MismatchMode::reassign) perm = detail::derangement(n, rng);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = correct.entries[i];
    ManifestEntry e = src;
    e.pair_id = src.pair_id + "-x";
    e.label = PairLabel::incorrect;
    e.mode = mode;
    auto words = tokenize_script(src.script);
    switch (mode) {
      case MismatchMode::reassign:
        e.script = correct.entries[perm[i]].script;
        break;
      case MismatchMode::delete_words: {
        if (words.size() <= k)
          throw ValidationError("script of pair '" + src.pair_id + "' has " +
                                std::to_string(words.size()) + " words; need more than " +
                                std::to_string(k) + " for deletion");
        auto victims = detail::sample_without_replacement(words.size(), k, rng);
        std::sort(victims.begin(), victims.end());
        std::vector<std::string> kept;
        std::size_t vi = 0;
        for (std::size_t w = 0; w < words.size(); ++w) {
          if (vi < victims.size() && victims[vi] == w) {
            ++vi;
            continue;
          }
          kept.push_back(words[w]);
        }
        e.script = detail::join_words(kept);
        break;
      }
      case MismatchMode::insert_words: {
        if (words.size() <= k)
          throw ValidationError("script of pair '" + src.pair_id + "' has " +
                                std::to_string(words.size()) + " words; need more than " +
                                std::to_string(k) + " for insertion");
        auto slots = detail::sample_without_replacement(words.size() + 1, k, rng);
        std::sort(slots.begin(), slots.end(), std::greater<std::size_t>());
        std::vector<std::string> edited = words;
        for (std::size_t s : slots)
          edited.insert(edited.begin() + static_cast<std::ptrdiff_t>(s),
                        vocab[rng.index(vocab.size())]);
        e.script = detail::join_words(edited);
        break;
      }
      case MismatchMode::substitute_words: {
        if (words.size() <= k)
          throw ValidationError("script of pair '" + src.pair_id + "' has " +
                                std::to_string(words.size()) + " words; need more than " +
                                std::to_string(k) + " for substitution");
        auto victims = detail::sample_without_replacement(words.size(), k, rng);
        std::vector<std::string> edited = words;
        for (std::size_t v : victims) {
          std::string repl = vocab[rng.index(vocab.size())];
          for (int tries = 0; repl == edited[v] && tries < 64; ++tries)
            repl = vocab[rng.index(vocab.size())];
          edited[v] = repl;
        }
        e.script = detail::join_words(edited);
        break;
      }
      case MismatchMode::none: break;
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

struct EvalCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
  double accuracy() const {
    return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
  }
};

struct ScoredPair {
  ManifestEntry entry;
  bool failed = false;
  std::string error;
  double llr = 0.0;
  double apr = 0.0;
  std::size_t num_phones = 0;
  std::vector<PhoneVerdict> per_phone;
};

struct PairResult {
  std::string pair_id;
  PairLabel label = PairLabel::correct;
  double score = 0.0;
  Decision decision = Decision::mismatch;
  bool failed = false;
};

struct EvalResult {
  Method method = Method::APR;
  double tau = 0.0;
  double theta = 0.0;
  EvalCounts counts;
  std::vector<PairResult> pairs;
  double accuracy() const { return counts.accuracy(); }
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// Runs the pipeline once per pair and keeps the threshold-independent
// numbers (LLR, APR, per-phone ranks), so thresholds can be swept without
// re-aligning. A pipeline failure is recorded on the pair, not thrown.
inline std::vector<ScoredPair> score_pairs(const CorpusManifest& manifest,
                                           const AcousticModel& model, const Lexicon& lex,
                                           const AlignOptions& opts = {}, std::size_t jobs = 1) {
  std::vector<ScoredPair> out(manifest.entries.size());
  detail::parallel_for(manifest.entries.size(), jobs, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    auto& sp = out[i];
    sp.entry = entry;
    try {
      FeatureMatrix feat = load_features(entry.feature_file);
      auto lattice = script_to_lattice(entry.script, lex);
      auto alignment = viterbi_align(feat, lattice, model, opts);
      auto table = score_table(model, alignment, feat);
      sp.llr = compute_llr(table);
      sp.apr = compute_apr(table);
      sp.num_phones = table.segments.size();
      sp.per_phone.reserve(table.segments.size());
      for (const auto& s : table.segments)
        sp.per_phone.push_back(
            {s.phone, rank_from_scores(s.all_scores, s.target_index), s.h0, s.anti});
    } catch (const Error& e) {
      sp.failed = true;
      sp.error = e.what();
    }
  });
  return out;
}

inline double scored_value(const ScoredPair& sp, const VerifierConfig& cfg,
                           std::size_t inventory_size) {
  switch (cfg.method) {
    case Method::LRT: return sp.llr;
    case Method::APR: return sp.apr;
    case Method::APR2STAGE:
      return sp.llr <= cfg.tau ? static_cast<double>(inventory_size) : sp.apr;
  }
  throw ValidationError("invalid method");
}

// Tallies decisions against labels. Failed pairs count as mismatch
// decisions with the failed flag set.
inline EvalResult evaluate_scored(const std::vector<ScoredPair>& scored,
                                  const VerifierConfig& cfg, std::size_t inventory_size) {
  EvalResult res;
  res.method = cfg.method;
  res.tau = cfg.tau;
  res.theta = cfg.theta;
  res.pairs.reserve(scored.size());
  for (const auto& sp : scored) {
    PairResult pr;
    pr.pair_id = sp.entry.pair_id;
    pr.label = sp.entry.label;
    pr.failed = sp.failed;
    if (sp.failed) {
      pr.decision = Decision::mismatch;
      pr.score = std::numeric_limits<double>::quiet_NaN();
    } else {
      pr.score = scored_value(sp, cfg, inventory_size);
      pr.decision = decide(pr.score, cfg);
    }
    bool truth_match = pr.label == PairLabel::correct;
    bool said_match = pr.decision == Decision::match;
    if (truth_match && said_match) ++res.counts.tp;
    else if (truth_match && !said_match) ++res.counts.fn;
    else if (!truth_match && said_match) ++res.counts.fp;
    else ++res.counts.tn;
    res.pairs.push_back(std::move(pr));
  }
  return res;
}

// Full pipeline evaluation at one operating point.
inline EvalResult evaluate(const CorpusManifest& manifest, const AcousticModel& model,
                           const Lexicon& lex, const VerifierConfig& cfg,
                           const AlignOptions& opts = {}, std::size_t jobs = 1) {
  return evaluate_scored(score_pairs(manifest, model, lex, opts, jobs), cfg,
                         model.inventory().size());
}

struct SweepPoint {
  double threshold = 0.0;
  double accuracy = 0.0;
  EvalCounts counts;
};

struct SweepResult {
  double best_threshold = 0.0;
  EvalResult best;
  std::vector<SweepPoint> curve;
};

inline std::vector<double> make_grid(double lo, double hi, double step) {
  if (step <= 0.0 || hi < lo) throw ValidationError("bad threshold grid");
  std::vector<double> out;
  std::size_t n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

// Evaluates every grid point; the winner is the accuracy argmax with ties
// broken toward the smallest threshold.
inline SweepResult sweep_threshold_scored(const std::vector<ScoredPair>& scored, Method method,
                                          std::vector<double> grid, const VerifierConfig& base,
                                          std::size_t inventory_size) {
  if (grid.empty()) throw ValidationError("threshold grid is empty");
  std::sort(grid.begin(), grid.end());
  SweepResult res;
  bool have_best = false;
  for (double g : grid) {
    VerifierConfig cfg = base;
    cfg.method = method;
    if (method == Method::LRT)
      cfg.tau = g;
    else
      cfg.theta = g;
    EvalResult r = evaluate_scored(scored, cfg, inventory_size);
    res.curve.push_back({g, r.accuracy(), r.counts});
    if (!have_best || r.accuracy() > res.best.accuracy()) {
      have_best = true;
      res.best = std::move(r);
      res.best_threshold = g;
    }
  }
  return res;
}

inline SweepResult sweep_threshold(const CorpusManifest& manifest, const AcousticModel& model,
                                   const Lexicon& lex, Method method,
                                   const std::vector<double>& grid,
                                   const VerifierConfig& base = {}, const AlignOptions& opts = {},
                                   std::size_t jobs = 1) {
  return sweep_threshold_scored(score_pairs(manifest, model, lex, opts, jobs), method, grid,
                                base, model.inventory().size());
}

struct DegradationReport {
  SweepResult read_lrt;
  SweepResult read_apr;
  EvalResult shifted_lrt;
  EvalResult shifted_apr;

  double delta_lrt() const { return shifted_lrt.accuracy() - read_lrt.best.accuracy(); }
  double delta_apr() const { return shifted_apr.accuracy() - read_apr.best.accuracy(); }
};

// Optimizes tau and theta on the read-style manifest, applies them unchanged
// to the shifted manifest, and reports the accuracy change per method.
inline DegradationReport degradation_report(const CorpusManifest& read_manifest,
                                            const CorpusManifest& shifted_manifest,
                                            const AcousticModel& model, const Lexicon& lex,
                                            const std::vector<double>& tau_grid,
                                            const std::vector<double>& theta_grid,
                                            const AlignOptions& opts = {}, std::size_t jobs = 1) {
  auto read_scored = score_pairs(read_manifest, model, lex, opts, jobs);
  auto shifted_scored = score_pairs(shifted_manifest, model, lex, opts, jobs);
  const std::size_t inv = model.inventory().size();

  DegradationReport rep;
  rep.read_lrt = sweep_threshold_scored(read_scored, Method::LRT, tau_grid, {}, inv);
  rep.read_apr = sweep_threshold_scored(read_scored, Method::APR, theta_grid, {}, inv);

  VerifierConfig lrt_cfg;
  lrt_cfg.method = Method::LRT;
  lrt_cfg.tau = rep.read_lrt.best_threshold;
  rep.shifted_lrt = evaluate_scored(shifted_scored, lrt_cfg, inv);

  VerifierConfig apr_cfg;
  apr_cfg.method = Method::APR;
  apr_cfg.theta = rep.read_apr.best_threshold;
  rep.shifted_apr = evaluate_scored(shifted_scored, apr_cfg, inv);
  return rep;
}

// ---------------------------------------------------------------------------
// Fixture helpers: random inventories of synthetic "speech"
// ---------------------------------------------------------------------------

// Random lexicon of invented words with random phone strings.
inline Lexicon random_lexicon(const PhoneInventory& inv, std::size_t num_words,
                              std::size_t min_phones, std::size_t max_phones,
                              std::uint64_t seed) {
  if (num_words == 0 || min_phones == 0 || min_phones > max_phones)
    throw ValidationError("bad random lexicon shape");
  Rng rng(seed);
  Lexicon lex;
  lex.inventory = inv;
  std::set<std::vector<std::string>> seen;
  for (std::size_t i = 0; i < num_words; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "w%04zu", i);
    Pronunciation pron;
    for (int tries = 0; tries < 64; ++tries) {
      pron.phones.clear();
      std::size_t len = static_cast<std::size_t>(
          rng.integer(static_cast<std::int64_t>(min_phones),
                      static_cast<std::int64_t>(max_phones)));
      for (std::size_t j = 0; j < len; ++j)
        pron.phones.push_back(inv.phones[rng.index(inv.phones.size())]);
      if (seen.insert(pron.phones).second) break;
    }
    lex.entries[name].push_back(std::move(pron));
  }
  return lex;
}

// Distinct random scripts of words drawn uniformly from the lexicon.
inline std::vector<std::string> random_scripts(const Lexicon& lex, std::size_t count,
                                               std::size_t words_per_script,
                                               std::uint64_t seed) {
  auto vocab = lex.words();
  if (vocab.empty()) throw ValidationError("lexicon has no words");
  if (words_per_script == 0) throw ValidationError("scripts need at least one word");
  Rng rng(seed);
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::size_t failed_draws = 0;
  while (out.size() < count) {
    std::vector<std::string> words;
    for (std::size_t w = 0; w < words_per_script; ++w)
      words.push_back(vocab[rng.index(vocab.size())]);
    std::string script = detail::join_words(words);
    if (seen.insert(script).second) {
      out.push_back(std::move(script));
    } else if (++failed_draws > 1000 + 10 * count) {
      throw DataError("cannot draw " + std::to_string(count) + " distinct scripts of " +
                      std::to_string(words_per_script) + " words from " +
                      std::to_string(vocab.size()) + " vocabulary words");
    }
  }
  return out;
}

// Phone generators with means placed by rejection sampling inside a box,
// keeping every pair of means (and silence) at least min_distance apart.
inline GeneratorSpec random_generator_spec(const PhoneInventory& inv, std::size_t dim,
                                           double box_half_width, double min_distance,
                                           double within_std, std::size_t components,
                                           std::uint64_t seed) {
  if (dim == 0 || components == 0) throw ValidationError("bad generator spec shape");
  GeneratorSpec spec;
  spec.dim = dim;
  spec.seed = seed;
  Rng rng(mix_seed(seed, fnv1a("generator-spec")));

  std::vector<std::vector<double>> anchors;  // one anchor per phone + silence
  auto place_anchor = [&]() {
    for (int tries = 0; tries < 10000; ++tries) {
      std::vector<double> cand(dim);
      for (auto& v : cand) v = rng.uniform(-box_half_width, box_half_width);
      bool ok = true;
      for (const auto& a : anchors) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          double diff = cand[j] - a[j];
          d2 += diff * diff;
        }
        if (d2 < min_distance * min_distance) {
          ok = false;
          break;
        }
      }
      if (ok) {
        anchors.push_back(cand);
        return;
      }
    }
    throw DataError("could not place " + std::to_string(anchors.size() + 1) +
                    " phone anchors at distance " + format_double(min_distance) +
                    " inside the box; widen the box or lower the distance");
  };

  place_anchor();  // silence anchor first
  for (std::size_t p = 0; p < inv.phones.size(); ++p) place_anchor();

  auto make_mixture = [&](const std::vector<double>& anchor) {
    std::vector<GmmComponent> comps(components);
    for (std::size_t k = 0; k < components; ++k) {
      comps[k].weight = 1.0 / static_cast<double>(components);
      comps[k].mean.resize(dim);
      comps[k].var.assign(dim, within_std * within_std);
      for (std::size_t j = 0; j < dim; ++j)
        comps[k].mean[j] =
            anchor[j] + (components > 1 ? rng.normal(0.0, within_std * 0.8) : 0.0);
    }
    return Gmm(std::move(comps));
  };

  if (inv.silence) {
    std::vector<GmmComponent> sil(1);
    sil[0].weight = 1.0;
    sil[0].mean = anchors[0];
    sil[0].var.assign(dim, 0.25 * within_std * within_std);
    spec.silence = Gmm(std::move(sil));
  }
  for (std::size_t p = 0; p < inv.phones.size(); ++p)
    spec.phones[inv.phones[p]] = make_mixture(anchors[p + 1]);
  return spec;
}

// Train/test mismatch knob: jitters means and scales variances.
inline GeneratorSpec perturb_generator_spec(const GeneratorSpec& spec, double mean_jitter_std,
                                            double var_scale, std::uint64_t seed) {
  if (var_scale <= 0.0) throw ValidationError("variance scale must be positive");
  GeneratorSpec out = spec;
  Rng rng(mix_seed(seed, fnv1a("perturb")));
  auto perturb = [&](const Gmm& g) {
    std::vector<GmmComponent> comps = g.components();
    for (auto& c : comps) {
      for (auto& m : c.mean) m += rng.normal(0.0, mean_jitter_std);
      for (auto& v : c.var) v *= var_scale;
    }
    return Gmm(std::move(comps));
  };
  for (auto& [p, g] : out.phones) g = perturb(g);
  if (out.silence) out.silence = perturb(*out.silence);
  return out;
}

// Labeled training segments drawn straight from the generator (no scripts),
// for fitting an acoustic model to a synthetic inventory.
struct TrainingSet {
  std::vector<FeatureMatrix> storage;
  std::vector<LabeledSegment> segments;
};

inline TrainingSet synthesize_training_set(const PhoneInventory& inv, const GeneratorSpec& spec,
                                           std::size_t segments_per_phone, std::uint64_t seed) {
  spec.validate();
  TrainingSet ts;
  std::vector<std::string> symbols = inv.phones;
  if (inv.silence && spec.silence) symbols.push_back(*inv.silence);
  ts.storage.reserve(symbols.size());
  for (const auto& phone : symbols) {
    const Gmm& g = inv.is_silence(phone) ? *spec.silence : spec.generator_for(phone);
    Rng rng(mix_seed(seed, fnv1a(phone)));
    const DurationRange& dur =
        inv.is_silence(phone) ? spec.silence_duration : spec.duration_for(phone);
    FeatureMatrix feat;
    feat.dim = spec.dim;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t t = 0;
    for (std::size_t s = 0; s < segments_per_phone; ++s) {
      std::size_t frames = static_cast<std::size_t>(
          rng.integer(static_cast<std::int64_t>(dur.min_frames),
                      static_cast<std::int64_t>(dur.max_frames)));
      ranges.emplace_back(t, t + frames);
      t += frames;
    }
    feat.num_frames = t;
    feat.values.resize(t * spec.dim);
    std::size_t pos = 0;
    for (const auto& [b, e] : ranges)
      for (std::size_t i = b; i < e; ++i, ++pos)
        detail::sample_frame(g, rng, 1.0, 1.0, {}, feat.frame(i));
    ts.storage.push_back(std::move(feat));
    const FeatureMatrix& stored = ts.storage.back();
    for (const auto& [b, e] : ranges)
      ts.segments.push_back({phone, FrameView(stored, b, e)});
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Corpus generation driver
// ---------------------------------------------------------------------------

struct CorpusOptions {
  std::size_t num_pairs = 200;
  std::size_t words_per_script = 8;
  MismatchMode mode = MismatchMode::reassign;
  std::size_t edit_k = 4;
  std::string style = "read";
  std::optional<StyleShift> shift;
  double degenerate_frac = 0.0;  // fraction of incorrect pairs replaced by degenerate audio
  double degenerate_scale = 5.0;
  double degenerate_noise = 0.05;
  std::string id_prefix = "p";
  std::uint64_t seed = 1;
  std::string out_dir;
};

// Builds a balanced corpus on disk: synthesizes one utterance per script,
// writes feature files and manifest.tsv under out_dir, and derives the
// incorrect pairs per the options. The returned manifest carries resolved
// feature paths and is directly usable in-process.
inline CorpusManifest generate_corpus(const Lexicon& lex, const GeneratorSpec& gen,
                                      const CorpusOptions& opts) {
  if (opts.out_dir.empty()) throw ValidationError("corpus output directory not set");
  if (opts.num_pairs == 0) throw ValidationError("corpus needs at least one pair");
  namespace fs = std::filesystem;
  fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir / "features");

  auto scripts = random_scripts(lex, opts.num_pairs, opts.words_per_script,
                                mix_seed(opts.seed, fnv1a("scripts")));

  CorpusManifest correct;
  for (std::size_t i = 0; i < opts.num_pairs; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s%05zu", opts.id_prefix.c_str(), i);
    auto synth = synthesize_utterance(scripts[i], lex, gen,
                                      opts.shift ? &*opts.shift : nullptr,
                                      mix_seed(opts.seed, i));
    std::string rel = std::string("features/") + id + ".feat";
    save_features(synth.features, (out_dir / rel).string());
    ManifestEntry e;
    e.pair_id = id;
    e.script = scripts[i];
    e.feature_file = rel;
    e.label = PairLabel::correct;
    e.style = opts.style;
    e.mode = MismatchMode::none;
    correct.entries.push_back(std::move(e));
  }

  CorpusManifest full = opts.mode == MismatchMode::none
                            ? correct
                            : make_mismatch_set(correct, opts.mode, opts.edit_k, lex,
                                                mix_seed(opts.seed, fnv1a("mismatch")));

  if (opts.degenerate_frac > 0.0) {
    std::size_t m = static_cast<std::size_t>(
        std::floor(opts.degenerate_frac * static_cast<double>(opts.num_pairs)));
    std::vector<std::size_t> incorrect_idx;
    for (std::size_t i = 0; i < full.entries.size(); ++i)
      if (full.entries[i].label == PairLabel::incorrect) incorrect_idx.push_back(i);
    m = std::min(m, incorrect_idx.size());
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t idx = incorrect_idx[incorrect_idx.size() - m + j];
      auto& e = full.entries[idx];
      char id[32];
      std::snprintf(id, sizeof(id), "%sdgn%05zu", opts.id_prefix.c_str(), j);
      auto synth = synthesize_degenerate_utterance(e.script, lex, gen, opts.degenerate_scale,
                                                   opts.degenerate_noise,
                                                   mix_seed(opts.seed, fnv1a(id)));
      std::string rel = std::string("features/") + id + ".feat";
      save_features(synth.features, (out_dir / rel).string());
      e.pair_id = id;
      e.feature_file = rel;
      e.style = "degenerate";
    }
  }

  save_manifest(full, (out_dir / "manifest.tsv").string());
  for (auto& e : full.entries) e.feature_file = (out_dir / e.feature_file).string();
  return full;
}

}  // namespace uverify
