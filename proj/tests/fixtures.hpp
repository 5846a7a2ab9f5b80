#pragma once

// Shared synthetic world for the harness tests: a generator inventory, a
// lexicon of invented words, and an acoustic model trained on generator
// samples. The test corpus generator is a perturbed copy of the training
// generator so that evaluation errors are non-degenerate.

#include <cstdint>

#include "uverify/corpus.hpp"
#include "uverify/lexicon.hpp"
#include "uverify/model.hpp"

namespace testutil {

struct WorldParams {
  std::size_t dim = 4;
  double box_half_width = 3.0;
  double min_distance = 1.8;
  double within_std = 1.0;
  std::size_t gen_components = 1;
  std::size_t lexicon_words = 12;
  std::size_t word_min_phones = 2;
  std::size_t word_max_phones = 4;
  std::size_t model_components = 4;
  std::size_t segments_per_phone = 60;
  std::size_t em_iters = 50;
  double perturb_mean_jitter = 0.60;
  double perturb_var_scale = 1.40;
  std::uint64_t seed = 20240817;
};

struct World {
  uverify::PhoneInventory inv;
  uverify::GeneratorSpec train_gen;  // distribution the model is fit to
  uverify::GeneratorSpec test_gen;   // slightly mismatched test distribution
  uverify::Lexicon lexicon;
  uverify::AcousticModel model;
};

inline World make_world(const WorldParams& wp = {}) {
  World w;
  w.inv = uverify::default_inventory();
  w.train_gen = uverify::random_generator_spec(w.inv, wp.dim, wp.box_half_width,
                                               wp.min_distance, wp.within_std,
                                               wp.gen_components, wp.seed);
  w.test_gen = uverify::perturb_generator_spec(w.train_gen, wp.perturb_mean_jitter,
                                               wp.perturb_var_scale,
                                               uverify::mix_seed(wp.seed, 1));
  w.lexicon = uverify::random_lexicon(w.inv, wp.lexicon_words, wp.word_min_phones,
                                      wp.word_max_phones, uverify::mix_seed(wp.seed, 2));
  auto training = uverify::synthesize_training_set(w.inv, w.train_gen, wp.segments_per_phone,
                                                   uverify::mix_seed(wp.seed, 3));
  w.model = uverify::train_em(training.segments, w.inv, wp.model_components, wp.em_iters,
                              uverify::mix_seed(wp.seed, 4),
                              "synthetic:d=" + std::to_string(wp.dim));
  return w;
}

// Mild per-utterance variability present even in the "read" condition.
inline uverify::StyleShift read_style_jitter() {
  uverify::StyleShift s;
  s.cov_inflation = 1.0;
  s.gain_min = 0.90;
  s.gain_max = 1.10;
  return s;
}

// Moderate style shift: covariance inflation only.
inline uverify::StyleShift exaggerated_shift(std::size_t /*dim*/) {
  uverify::StyleShift s;
  s.cov_inflation = 2.0;
  s.gain_min = 0.88;
  s.gain_max = 1.12;
  return s;
}

// Strong style shift: more inflation plus a global mean offset.
inline uverify::StyleShift strong_shift(std::size_t dim) {
  uverify::StyleShift s;
  s.cov_inflation = 3.0;
  s.mean_offset.assign(dim, 0.4);
  s.gain_min = 0.85;
  s.gain_max = 1.15;
  return s;
}

}  // namespace testutil
