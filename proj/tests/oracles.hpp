#pragma once

// Test-only oracles, independent of the library's search code.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "uverify/align.hpp"
#include "uverify/features.hpp"
#include "uverify/lexicon.hpp"
#include "uverify/model.hpp"

namespace testutil {

struct BruteAlignment {
  bool feasible = false;
  double total = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> unit_ends;     // tie-break key (skips included)
  std::vector<std::size_t> emitted_ends;  // nonempty segments, for output checks
  std::size_t expansion = 0;
};

// Exhaustive search over every expansion and every boundary placement.
// Candidate totals are evaluated right-associated over per-phone cumulative
// frame-score sums, the same expression shape the production DP uses, so an
// exact (0-tolerance) comparison of the optimum is meaningful.
inline BruteAlignment brute_force_align(const uverify::FeatureMatrix& feat,
                                        const uverify::PronunciationLattice& lattice,
                                        const uverify::AcousticModel& model,
                                        const uverify::AlignOptions& opts) {
  const std::size_t T = feat.num_frames;
  const bool use_sil = opts.allow_silence && model.has_silence();

  std::map<std::string, std::vector<double>> cum;
  auto cum_for = [&](const std::string& phone) -> const std::vector<double>& {
    auto it = cum.find(phone);
    if (it != cum.end()) return it->second;
    std::vector<double> c(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      c[t + 1] = c[t] + model.score_frame(phone, feat.frame(t));
    return cum.emplace(phone, std::move(c)).first->second;
  };

  struct Unit {
    std::string phone;
    std::size_t min_frames;
    bool optional_unit;
  };

  BruteAlignment best;
  const std::size_t n_exp = lattice.expansion_count();
  for (std::size_t e = 0; e < n_exp; ++e) {
    auto prons = lattice.expansion(e);
    std::vector<Unit> units;
    auto push_sil = [&]() {
      if (use_sil)
        units.push_back({*model.inventory().silence,
                         std::max<std::size_t>(opts.min_silence_frames, 1), true});
    };
    push_sil();
    for (std::size_t wi = 0; wi < prons.size(); ++wi) {
      if (wi > 0) push_sil();
      for (const auto& p : prons[wi]->phones)
        units.push_back({p, std::max<std::size_t>(opts.min_phone_frames, 1), false});
    }
    push_sil();

    std::vector<std::size_t> ends(units.size());
    // enumerate all end vectors recursively
    auto consider = [&](const std::vector<std::size_t>& cand) {
      double total = 0.0;
      for (std::size_t j = units.size(); j-- > 0;) {
        std::size_t b = j == 0 ? 0 : cand[j - 1];
        total = (cum_for(units[j].phone)[cand[j]] - cum_for(units[j].phone)[b]) + total;
      }
      // same preference order as production: larger total, then smaller
      // per-unit boundary vector; enumeration order supplies the
      // earlier-expansion preference on full ties
      bool better = false;
      if (!best.feasible || total > best.total)
        better = true;
      else if (total == best.total && cand < best.unit_ends)
        better = true;
      if (better) {
        best.feasible = true;
        best.total = total;
        best.unit_ends = cand;
        best.emitted_ends.clear();
        std::size_t prev = 0;
        for (std::size_t j = 0; j < units.size(); ++j) {
          if (cand[j] > prev) best.emitted_ends.push_back(cand[j]);
          prev = cand[j];
        }
        best.expansion = e;
      }
    };

    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t j, std::size_t t) {
      if (j == units.size()) {
        if (t == T) consider(ends);
        return;
      }
      if (units[j].optional_unit) {
        ends[j] = t;
        rec(j + 1, t);
      }
      for (std::size_t e2 = t + units[j].min_frames; e2 <= T; ++e2) {
        ends[j] = e2;
        rec(j + 1, e2);
      }
    };
    rec(0, 0);
  }
  return best;
}

}  // namespace testutil
