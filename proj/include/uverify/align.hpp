#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uverify/common.hpp"
#include "uverify/features.hpp"
#include "uverify/lexicon.hpp"
#include "uverify/model.hpp"

namespace uverify {

struct AlignOptions {
  std::size_t min_phone_frames = 3;
  std::size_t min_silence_frames = 2;
  bool allow_silence = true;  // takes effect only when the model has a silence GMM
  std::size_t max_expansions = 256;
};

struct AlignedSegment {
  std::string phone;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool is_silence = false;
  double score_sum = 0.0;  // summed per-frame log-likelihood over [begin, end)
};

// Best segmentation of the feature stream into one pronunciation expansion.
// Segments cover [0, T) contiguously; silence segments are marked and are
// excluded from the phoneme count N.
struct Alignment {
  std::vector<AlignedSegment> segments;
  double total_loglik = 0.0;
  std::size_t num_frames = 0;
  std::size_t expansion_index = 0;

  std::size_t num_phones() const {
    std::size_t n = 0;
    for (const auto& s : segments)
      if (!s.is_silence) ++n;
    return n;
  }

  void validate() const {
    if (segments.empty()) throw ValidationError("alignment has no segments");
    std::size_t pos = 0;
    for (const auto& s : segments) {
      if (s.begin != pos || s.end <= s.begin)
        throw ValidationError("alignment segments do not partition the frame range");
      pos = s.end;
    }
    if (pos != num_frames) throw ValidationError("alignment does not cover all frames");
    if (num_phones() == 0) throw ValidationError("alignment contains no phoneme segments");
  }
};

namespace detail {

struct ChainUnit {
  std::size_t score_row = 0;  // row in the frame-score matrix
  std::size_t min_frames = 1;
  bool optional_unit = false;  // may consume zero frames
};

struct ChainAlignment {
  bool feasible = false;
  double total = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> unit_ends;  // per unit; skipped units end where they start
};

// Exact DP over one linear chain. cum holds one cumulative-score row per
// scorer; the returned segmentation maximizes the summed frame score, and
// among optima has the lexicographically smallest per-unit end vector.
//
// The backward table B[j][t] = best score for covering frames [t, T) with
// units j..J, built from right-associated sums over the cumulative rows.
// Because float addition of a constant is weakly monotone, B[0][0] equals
// the bitwise maximum over all candidate end vectors of that same
// right-associated expression. Reconstruction walks forward choosing the
// smallest end whose candidate value — the full total, folded through the
// segments already committed — reproduces B[0][0] exactly. Testing the full
// total rather than the remaining sub-chain matters: mathematically tied
// candidates may differ by an ulp mid-chain that upstream additions absorb.
inline ChainAlignment align_chain(const std::vector<std::vector<double>>& cum,
                                  const std::vector<ChainUnit>& units, std::size_t T) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const std::size_t J = units.size();
  std::vector<std::vector<double>> B(J + 1, std::vector<double>(T + 1, neg_inf));
  B[J][T] = 0.0;
  for (std::size_t j = J; j-- > 0;) {
    const auto& u = units[j];
    const auto& c = cum[u.score_row];
    for (std::size_t t = 0; t <= T; ++t) {
      double best = neg_inf;
      if (u.optional_unit) best = B[j + 1][t];
      for (std::size_t e = t + u.min_frames; e <= T; ++e) {
        double v = B[j + 1][e];
        if (v == neg_inf) continue;
        double cand = (c[e] - c[t]) + v;
        if (cand > best) best = cand;
      }
      B[j][t] = best;
    }
  }

  ChainAlignment out;
  if (B[0][0] == neg_inf) return out;
  out.feasible = true;
  out.total = B[0][0];
  out.unit_ends.resize(J);

  std::vector<double> committed;  // segment values of units chosen so far
  auto fold = [&](double suffix) {
    for (std::size_t i = committed.size(); i-- > 0;) suffix = committed[i] + suffix;
    return suffix;
  };

  std::size_t t = 0;
  for (std::size_t j = 0; j < J; ++j) {
    const auto& u = units[j];
    const auto& c = cum[u.score_row];
    std::size_t chosen = T + 1;
    if (u.optional_unit && B[j + 1][t] != neg_inf && fold(B[j + 1][t]) == out.total) {
      chosen = t;  // skipped unit contributes no segment value
    } else {
      for (std::size_t e = t + u.min_frames; e <= T; ++e) {
        if (B[j + 1][e] == neg_inf) continue;
        double seg = c[e] - c[t];
        if (fold(seg + B[j + 1][e]) == out.total) {
          chosen = e;
          committed.push_back(seg);
          break;
        }
      }
    }
    if (chosen > T) throw Error("internal: chain alignment reconstruction failed");
    out.unit_ends[j] = chosen;
    t = chosen;
  }
  return out;
}

}  // namespace detail

// Forced alignment: searches every pronunciation expansion of the lattice
// (in lattice order) and every valid segmentation, and returns one
// maximizing the total frame log-likelihood. Ties go to the
// lexicographically smallest per-unit boundary vector (a skipped optional
// silence contributes its position), then to the earlier expansion. Exact
// dynamic programming, no pruning.
inline Alignment viterbi_align(const FeatureMatrix& feat, const PronunciationLattice& lattice,
                               const AcousticModel& m, const AlignOptions& opts = {}) {
  feat.validate();
  if (feat.dim != m.feature_dim())
    throw ValidationError("feature dimension " + std::to_string(feat.dim) +
                          " does not match model dimension " + std::to_string(m.feature_dim()));
  if (lattice.words.empty()) throw ValidationError("empty pronunciation lattice");
  const std::size_t n_exp = lattice.expansion_count();
  if (n_exp > opts.max_expansions)
    throw ValidationError("lattice has " + std::to_string(n_exp) +
                          " expansions, exceeding the cap of " +
                          std::to_string(opts.max_expansions));
  const bool use_sil = opts.allow_silence && m.has_silence();
  const std::size_t T = feat.num_frames;

  // one score row per distinct phone (plus silence), shared across expansions
  std::vector<std::string> row_phones;
  std::map<std::string, std::size_t> row_of;
  auto row_for = [&](const std::string& p) {
    auto it = row_of.find(p);
    if (it != row_of.end()) return it->second;
    std::size_t r = row_phones.size();
    row_phones.push_back(p);
    row_of.emplace(p, r);
    return r;
  };
  for (const auto& w : lattice.words)
    for (const auto& v : w.variants)
      for (const auto& p : v.phones) row_for(p);
  std::size_t sil_row = use_sil ? row_for(*m.inventory().silence) : 0;

  std::vector<std::vector<double>> cum(row_phones.size(), std::vector<double>(T + 1, 0.0));
  for (std::size_t r = 0; r < row_phones.size(); ++r) {
    const Gmm& g = m.gmm_for(row_phones[r]);
    for (std::size_t t = 0; t < T; ++t)
      cum[r][t + 1] = cum[r][t] + g.log_likelihood(feat.frame(t));
  }

  struct Best {
    bool found = false;
    double total = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> unit_ends;  // tie-break key and segment construction
    std::vector<detail::ChainUnit> units;
    std::vector<std::string> unit_phones;
    std::size_t expansion = 0;
  } best;

  bool any_feasible = false;
  for (std::size_t e = 0; e < n_exp; ++e) {
    auto prons = lattice.expansion(e);
    std::vector<detail::ChainUnit> units;
    std::vector<std::string> unit_phones;
    auto push_sil = [&]() {
      if (!use_sil) return;
      units.push_back({sil_row, std::max<std::size_t>(opts.min_silence_frames, 1), true});
      unit_phones.push_back(*m.inventory().silence);
    };
    push_sil();
    for (std::size_t wi = 0; wi < prons.size(); ++wi) {
      if (wi > 0) push_sil();
      for (const auto& p : prons[wi]->phones) {
        units.push_back({row_of.at(p), std::max<std::size_t>(opts.min_phone_frames, 1), false});
        unit_phones.push_back(p);
      }
    }
    push_sil();

    auto res = detail::align_chain(cum, units, T);
    if (!res.feasible) continue;
    any_feasible = true;
    bool better = false;
    if (!best.found || res.total > best.total) {
      better = true;
    } else if (res.total == best.total) {
      if (res.unit_ends < best.unit_ends) better = true;
    }
    if (better) {
      best.found = true;
      best.total = res.total;
      best.unit_ends = std::move(res.unit_ends);
      best.units = std::move(units);
      best.unit_phones = std::move(unit_phones);
      best.expansion = e;
    }
  }
  if (!any_feasible)
    throw ValidationError("utterance too short: " + std::to_string(T) +
                          " frames cannot fit any pronunciation expansion");

  Alignment out;
  out.num_frames = T;
  out.total_loglik = best.total;
  out.expansion_index = best.expansion;
  std::size_t t = 0;
  for (std::size_t j = 0; j < best.units.size(); ++j) {
    std::size_t end = best.unit_ends[j];
    if (end == t) continue;  // skipped optional silence
    AlignedSegment seg;
    seg.phone = best.unit_phones[j];
    seg.begin = t;
    seg.end = end;
    seg.is_silence = best.units[j].optional_unit;
    seg.score_sum = cum[best.units[j].score_row][end] - cum[best.units[j].score_row][t];
    out.segments.push_back(std::move(seg));
    t = end;
  }
  out.validate();
  return out;
}

// The N non-silence (phone, frames) pairs in order.
inline std::vector<std::pair<std::string, FrameView>> segment_features(const FeatureMatrix& feat,
                                                                       const Alignment& a) {
  if (a.num_frames != feat.num_frames)
    throw ValidationError("alignment covers " + std::to_string(a.num_frames) +
                          " frames but features have " + std::to_string(feat.num_frames));
  a.validate();
  std::vector<std::pair<std::string, FrameView>> out;
  for (const auto& s : a.segments)
    if (!s.is_silence) out.emplace_back(s.phone, FrameView(feat, s.begin, s.end));
  return out;
}

// Debug dump: '#' header with N, T and the total, then one line per segment.
inline void save_alignment(const Alignment& a, std::ostream& out) {
  out << "# " << a.num_phones() << ' ' << a.num_frames << ' ' << format_double(a.total_loglik)
      << '\n';
  for (const auto& s : a.segments)
    out << s.phone << ' ' << s.begin << ' ' << s.end << ' ' << format_double(s.score_sum)
        << '\n';
}

inline void save_alignment(const Alignment& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write alignment file: " + path);
  save_alignment(a, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace uverify
