#pragma once

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "uverify/align.hpp"
#include "uverify/common.hpp"
#include "uverify/features.hpp"
#include "uverify/lexicon.hpp"
#include "uverify/model.hpp"

namespace uverify {

enum class Method { LRT, APR, APR2STAGE };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::LRT: return "LRT";
    case Method::APR: return "APR";
    case Method::APR2STAGE: return "APR2STAGE";
  }
  throw ValidationError("invalid method");
}

inline Method parse_method(const std::string& s) {
  if (s == "LRT" || s == "lrt") return Method::LRT;
  if (s == "APR" || s == "apr") return Method::APR;
  if (s == "APR2STAGE" || s == "apr2stage") return Method::APR2STAGE;
  throw ValidationError("unknown method '" + s + "' (expected LRT, APR or APR2STAGE)");
}

struct VerifierConfig {
  double tau = 0.0;    // LLR threshold
  double theta = 0.0;  // average-rank threshold
  Method method = Method::APR;

  void validate(std::size_t inventory_size) const {
    if (!std::isfinite(tau) && method == Method::LRT)
      throw ValidationError("tau must be finite for the LRT method");
    if (method != Method::LRT) {
      if (std::isnan(theta) || theta <= 1.0 || theta > static_cast<double>(inventory_size))
        throw ValidationError("theta must lie in (1, |P|] = (1, " +
                              std::to_string(inventory_size) + "]");
    }
  }
};

enum class Decision { match, mismatch };

inline const char* decision_name(Decision d) {
  return d == Decision::match ? "match" : "mismatch";
}

// Per-aligned-segment scores: the target phone's mean log-likelihood, the
// anti-model's, and the mean log-likelihood under every ranking phone.
struct SegmentScores {
  std::string phone;
  std::size_t target_index = 0;  // inventory index of the target phone
  std::size_t num_frames = 0;
  double h0 = 0.0;
  double anti = 0.0;
  std::vector<double> all_scores;  // inventory order
};

// All verifier measures are pure functions of this table, which decouples
// the rank/likelihood arithmetic from the model and makes order-preservation
// properties directly testable.
struct SegmentScoreTable {
  std::vector<SegmentScores> segments;  // non-silence segments in order
  std::size_t inventory_size = 0;       // |P|
};

inline SegmentScoreTable score_table(const AcousticModel& m, const Alignment& alignment,
                                     const FeatureMatrix& feat) {
  SegmentScoreTable table;
  table.inventory_size = m.inventory().size();
  auto pairs = segment_features(feat, alignment);
  if (pairs.empty()) throw ValidationError("alignment contains no phoneme segments");
  table.segments.reserve(pairs.size());
  for (const auto& [phone, view] : pairs) {
    SegmentScores s;
    s.phone = phone;
    s.target_index = m.inventory().index_of(phone);
    s.num_frames = view.size();
    s.all_scores = m.score_segment_all(view);
    s.h0 = s.all_scores[s.target_index];
    s.anti = m.score_anti(view);
    table.segments.push_back(std::move(s));
  }
  return table;
}

// Rank of the target among all scores: 1 plus the number of strictly
// greater competitors, so exact ties share the better rank.
inline std::size_t rank_from_scores(std::span<const double> all_scores,
                                    std::size_t target_index) {
  if (target_index >= all_scores.size()) throw ValidationError("rank target out of range");
  double target = all_scores[target_index];
  std::size_t greater = 0;
  for (std::size_t i = 0; i < all_scores.size(); ++i)
    if (i != target_index && all_scores[i] > target) ++greater;
  return 1 + greater;
}

// Recognition rank of `phone` for the segment: scores the segment under
// every inventory phone and counts strictly better competitors.
inline std::size_t phone_rank(const AcousticModel& m, const std::string& phone, FrameView seg) {
  if (m.inventory().is_silence(phone))
    throw ValidationError("silence is excluded from phoneme ranking");
  std::size_t target = m.inventory().index_of(phone);
  auto scores = m.score_segment_all(seg);
  return rank_from_scores(scores, target);
}

// g - G: both are per-frame averages over all non-silence frames, i.e.
// segment means weighted by segment length.
inline double compute_llr(const SegmentScoreTable& table) {
  if (table.segments.empty()) throw ValidationError("no segments to score");
  double g = 0.0, anti = 0.0, frames = 0.0;
  for (const auto& s : table.segments) {
    double n = static_cast<double>(s.num_frames);
    g += n * s.h0;
    anti += n * s.anti;
    frames += n;
  }
  return g / frames - anti / frames;
}

// Average phoneme ranking: unweighted mean of per-segment ranks; 1 is best.
inline double compute_apr(const SegmentScoreTable& table) {
  if (table.segments.empty()) throw ValidationError("no segments to score");
  double sum = 0.0;
  for (const auto& s : table.segments)
    sum += static_cast<double>(rank_from_scores(s.all_scores, s.target_index));
  return sum / static_cast<double>(table.segments.size());
}

// Two-stage measure: pairs failing the likelihood-ratio gate (LLR <= tau)
// receive the worst possible rank |P|; the rest pass through to APR.
inline double compute_two_stage(const SegmentScoreTable& table, const VerifierConfig& cfg) {
  if (compute_llr(table) <= cfg.tau) return static_cast<double>(table.inventory_size);
  return compute_apr(table);
}

inline double compute_llr(const AcousticModel& m, const Alignment& a, const FeatureMatrix& f) {
  return compute_llr(score_table(m, a, f));
}
inline double compute_apr(const AcousticModel& m, const Alignment& a, const FeatureMatrix& f) {
  return compute_apr(score_table(m, a, f));
}
inline double compute_two_stage(const AcousticModel& m, const Alignment& a,
                                const FeatureMatrix& f, const VerifierConfig& cfg) {
  return compute_two_stage(score_table(m, a, f), cfg);
}

// LRT matches on score > tau; APR variants match on score < theta. Boundary
// values are mismatches in all three (the inequalities are strict).
inline Decision decide(double score, const VerifierConfig& cfg) {
  switch (cfg.method) {
    case Method::LRT: return score > cfg.tau ? Decision::match : Decision::mismatch;
    case Method::APR:
    case Method::APR2STAGE:
      return score < cfg.theta ? Decision::match : Decision::mismatch;
  }
  throw ValidationError("invalid method");
}

struct PhoneVerdict {
  std::string phone;
  std::size_t rank = 0;
  double h0 = 0.0;
  double anti = 0.0;
};

struct VerdictReport {
  std::string pair_id;
  Method method = Method::APR;
  double llr = 0.0;
  double apr = 0.0;
  double two_stage = 0.0;
  Decision decision = Decision::mismatch;
  double tau = 0.0;
  double theta = 0.0;
  std::size_t num_phones = 0;
  std::vector<PhoneVerdict> per_phone;

  double score() const {
    switch (method) {
      case Method::LRT: return llr;
      case Method::APR: return apr;
      case Method::APR2STAGE: return two_stage;
    }
    throw ValidationError("invalid method");
  }
};

inline VerdictReport make_report(const SegmentScoreTable& table, const VerifierConfig& cfg,
                                 const std::string& pair_id = "-") {
  cfg.validate(table.inventory_size);
  VerdictReport r;
  r.pair_id = pair_id;
  r.method = cfg.method;
  r.tau = cfg.tau;
  r.theta = cfg.theta;
  r.llr = compute_llr(table);
  r.apr = compute_apr(table);
  r.two_stage = r.llr <= cfg.tau ? static_cast<double>(table.inventory_size) : r.apr;
  r.num_phones = table.segments.size();
  for (const auto& s : table.segments)
    r.per_phone.push_back(
        {s.phone, rank_from_scores(s.all_scores, s.target_index), s.h0, s.anti});
  r.decision = decide(r.score(), cfg);
  return r;
}

// Full single-pair pipeline: script -> lattice -> alignment -> report.
inline VerdictReport verify_pair(const AcousticModel& m, const Lexicon& lex,
                                 const std::string& script, const FeatureMatrix& feat,
                                 const VerifierConfig& cfg, const AlignOptions& opts = {},
                                 const std::string& pair_id = "-") {
  auto lattice = script_to_lattice(script, lex);
  auto alignment = viterbi_align(feat, lattice, m, opts);
  return make_report(score_table(m, alignment, feat), cfg, pair_id);
}

// Tab-separated record; per-phone cells are phone:rank:h0:anti.
inline std::string report_header() {
  return "pair_id\tmethod\tllr\tapr\ttwo_stage\tdecision\ttau\ttheta\tN\tper_phone";
}

inline std::string report_record(const VerdictReport& r) {
  std::ostringstream os;
  os << r.pair_id << '\t' << method_name(r.method) << '\t' << format_double(r.llr) << '\t'
     << format_double(r.apr) << '\t' << format_double(r.two_stage) << '\t'
     << decision_name(r.decision) << '\t' << format_double(r.tau) << '\t'
     << format_double(r.theta) << '\t' << r.num_phones << '\t';
  for (std::size_t i = 0; i < r.per_phone.size(); ++i) {
    const auto& p = r.per_phone[i];
    if (i) os << ' ';
    os << p.phone << ':' << p.rank << ':' << format_double(p.h0) << ':'
       << format_double(p.anti);
  }
  return os.str();
}

}  // namespace uverify
