#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uverify/common.hpp"
#include "uverify/features.hpp"
#include "uverify/gmm.hpp"
#include "uverify/lexicon.hpp"

namespace uverify {

// Training input: a phone label plus a contiguous slice of features.
struct LabeledSegment {
  std::string phone;
  FrameView frames;
};

struct TrainLog {
  // per-iteration total log-likelihood, keyed by phone symbol ("anti" for
  // the anti-model, the silence symbol for the silence model)
  std::map<std::string, std::vector<double>> loglik;
};

// One diagonal-covariance GMM per inventory phone, an optional silence GMM,
// and an anti-model trained on the pooled frames of all phones. Immutable
// after construction; scoring is safe from any number of threads.
class AcousticModel {
 public:
  AcousticModel() = default;

  AcousticModel(PhoneInventory inventory, std::vector<Gmm> phone_gmms, Gmm anti,
                std::optional<Gmm> silence_gmm, std::string fingerprint)
      : inv_(std::move(inventory)),
        gmms_(std::move(phone_gmms)),
        anti_(std::move(anti)),
        silence_(std::move(silence_gmm)),
        fingerprint_(std::move(fingerprint)) {
    inv_.validate();
    if (gmms_.size() != inv_.size())
      throw ValidationError("acoustic model needs exactly one GMM per inventory phone");
    dim_ = anti_.dim();
    for (const auto& g : gmms_)
      if (g.dim() != dim_) throw ValidationError("acoustic model GMMs disagree on dimension");
    if (silence_ && silence_->dim() != dim_)
      throw ValidationError("silence GMM dimension mismatch");
    if (silence_ && !inv_.silence)
      throw ValidationError("silence GMM present but inventory designates no silence symbol");
  }

  const PhoneInventory& inventory() const { return inv_; }
  std::size_t feature_dim() const { return dim_; }
  const std::string& fingerprint() const { return fingerprint_; }
  bool has_silence() const { return silence_.has_value(); }
  const Gmm& anti_model() const { return anti_; }
  const Gmm& phone_gmm(std::size_t index) const { return gmms_.at(index); }

  const Gmm& gmm_for(const std::string& phone) const {
    if (inv_.is_silence(phone)) {
      if (!silence_) throw ValidationError("model has no silence GMM");
      return *silence_;
    }
    return gmms_[inv_.index_of(phone)];
  }

  double score_frame(const std::string& phone, std::span<const double> frame) const {
    if (!all_finite(frame)) throw ValidationError("frame contains non-finite values");
    return gmm_for(phone).log_likelihood(frame);
  }

  // Arithmetic mean of per-frame log-likelihoods over the segment, so the
  // score of a segment is duration-invariant.
  double score_segment(const std::string& phone, FrameView seg) const {
    return mean_score(gmm_for(phone), seg);
  }

  double score_anti(FrameView seg) const { return mean_score(anti_, seg); }

  // Segment score for every ranking phone at once, inventory order.
  std::vector<double> score_segment_all(FrameView seg) const {
    check_segment(seg);
    std::vector<double> out(inv_.size(), 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      auto frame = seg.frame(i);
      for (std::size_t p = 0; p < gmms_.size(); ++p) out[p] += gmms_[p].log_likelihood(frame);
    }
    for (auto& v : out) v /= static_cast<double>(seg.size());
    return out;
  }

 private:
  void check_segment(FrameView seg) const {
    if (seg.feat == nullptr || seg.empty()) throw ValidationError("empty segment");
    if (seg.dim() != dim_)
      throw ValidationError("segment dimension " + std::to_string(seg.dim()) +
                            " does not match model dimension " + std::to_string(dim_));
  }

  double mean_score(const Gmm& g, FrameView seg) const {
    check_segment(seg);
    double s = 0.0;
    for (std::size_t i = 0; i < seg.size(); ++i) s += g.log_likelihood(seg.frame(i));
    return s / static_cast<double>(seg.size());
  }

  PhoneInventory inv_;
  std::vector<Gmm> gmms_;
  Gmm anti_;
  std::optional<Gmm> silence_;
  std::size_t dim_ = 0;
  std::string fingerprint_;
};

// EM training over labeled segments. Every inventory phone needs at least
// K*D frames; silence data is optional. The anti-model is fit on the pooled
// frames of all non-silence phones with the same K.
inline AcousticModel train_em(const std::vector<LabeledSegment>& segments,
                              const PhoneInventory& inventory, std::size_t k, std::size_t iters,
                              std::uint64_t seed, const std::string& fingerprint = "none",
                              const EmOptions& base_opts = {}, TrainLog* log = nullptr) {
  inventory.validate();
  if (k == 0) throw ValidationError("component count must be >= 1");
  EmOptions opts = base_opts;
  opts.max_iters = iters;

  std::map<std::string, detail::FramePool> pools;
  detail::FramePool pooled;
  for (const auto& seg : segments) {
    if (seg.frames.empty()) throw ValidationError("training segment with no frames");
    bool is_sil = inventory.is_silence(seg.phone);
    if (!is_sil && !inventory.contains(seg.phone))
      throw ValidationError("training segment labeled with unknown phoneme '" + seg.phone + "'");
    auto& pool = pools[seg.phone];
    for (std::size_t i = 0; i < seg.frames.size(); ++i) {
      pool.add(seg.frames.frame(i));
      if (!is_sil) pooled.add(seg.frames.frame(i));
    }
  }

  const std::size_t need = k * std::max<std::size_t>(pooled.dim, 1);
  std::vector<Gmm> gmms;
  gmms.reserve(inventory.size());
  for (const auto& phone : inventory.phones) {
    auto it = pools.find(phone);
    std::size_t have = it == pools.end() ? 0 : it->second.n;
    if (have < need)
      throw DataError("insufficient training data for phone '" + phone + "': have " +
                      std::to_string(have) + " frames, need >= " + std::to_string(need));
    EmTrace trace;
    gmms.push_back(train_gmm(it->second, k, mix_seed(seed, fnv1a(phone)), opts, &trace));
    if (log) log->loglik[phone] = trace.loglik;
  }

  std::optional<Gmm> silence_gmm;
  if (inventory.silence) {
    auto it = pools.find(*inventory.silence);
    if (it != pools.end()) {
      EmTrace trace;
      silence_gmm = train_gmm(it->second, k, mix_seed(seed, fnv1a(*inventory.silence)), opts,
                              &trace);
      if (log) log->loglik[*inventory.silence] = trace.loglik;
    }
  }

  EmTrace anti_trace;
  Gmm anti = train_gmm(pooled, k, mix_seed(seed, fnv1a("anti")), opts, &anti_trace);
  if (log) log->loglik["anti"] = anti_trace.loglik;

  return AcousticModel(inventory, std::move(gmms), std::move(anti), std::move(silence_gmm),
                       fingerprint);
}

namespace detail {

inline void write_gmm(std::ostream& out, const Gmm& g) {
  for (const auto& c : g.components()) {
    out << format_double(c.weight);
    for (double m : c.mean) out << ' ' << format_double(m);
    for (double v : c.var) out << ' ' << format_double(v);
    out << '\n';
  }
}

inline Gmm read_gmm(std::istream& in, std::size_t k, std::size_t d, const std::string& path) {
  std::vector<GmmComponent> comps(k);
  std::string line;
  for (std::size_t c = 0; c < k; ++c) {
    if (!std::getline(in, line))
      throw FormatError("corrupt model file (unexpected end of file): " + path);
    auto cells = split_ws(line);
    if (cells.size() != 1 + 2 * d)
      throw FormatError("corrupt model file (component line has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(1 + 2 * d) + "): " + path);
    comps[c].weight = parse_double(cells[0], "weight");
    comps[c].mean.resize(d);
    comps[c].var.resize(d);
    for (std::size_t j = 0; j < d; ++j) comps[c].mean[j] = parse_double(cells[1 + j], "mean");
    for (std::size_t j = 0; j < d; ++j) comps[c].var[j] = parse_double(cells[1 + d + j], "var");
  }
  try {
    return Gmm(std::move(comps));
  } catch (const ValidationError& e) {
    throw FormatError("corrupt model file (" + std::string(e.what()) + "): " + path);
  }
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

// Versioned text format; parameters are written with 17 significant digits
// so that load(save(m)) reproduces every score bit-identically.
inline void save_model(const AcousticModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file: " + path);
  const auto& inv = m.inventory();
  char hash_hex[20];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(inv.hash()));
  out << "uverify-model " << kModelFormatVersion << '\n';
  out << "dim " << m.feature_dim() << '\n';
  out << "components " << m.phone_gmm(0).num_components() << '\n';
  out << "fingerprint " << (m.fingerprint().empty() ? "none" : m.fingerprint()) << '\n';
  out << "silence " << (inv.silence ? *inv.silence : std::string("-")) << '\n';
  out << "inventory_hash " << hash_hex << '\n';
  out << "phones " << inv.size() << '\n';
  for (std::size_t i = 0; i < inv.size(); ++i) {
    out << "phone " << inv.phones[i] << '\n';
    detail::write_gmm(out, m.phone_gmm(i));
  }
  out << "silence_model " << (m.has_silence() ? 1 : 0) << '\n';
  if (m.has_silence()) detail::write_gmm(out, m.gmm_for(*inv.silence));
  out << "anti\n";
  detail::write_gmm(out, m.anti_model());
  out << "end\n";
  if (!out) throw IoError("write failed: " + path);
}

inline AcousticModel load_model(const std::string& path,
                                const PhoneInventory* expected_inventory = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw FormatError("corrupt model file (missing " + std::string(what) + "): " + path);
    return split_ws(line);
  };

  auto magic = next_line("header");
  if (magic.size() != 2 || magic[0] != "uverify-model")
    throw FormatError("not a uverify model file: " + path);
  if (parse_int(magic[1], "version") != kModelFormatVersion)
    throw FormatError("unsupported model file version " + magic[1] + " (expected " +
                      std::to_string(kModelFormatVersion) + "): " + path);

  auto expect_field = [&](const char* key) {
    auto cells = next_line(key);
    if (cells.size() != 2 || cells[0] != key)
      throw FormatError("corrupt model file (expected '" + std::string(key) + "'): " + path);
    return cells[1];
  };

  std::size_t d = static_cast<std::size_t>(parse_int(expect_field("dim"), "dim"));
  std::size_t k = static_cast<std::size_t>(parse_int(expect_field("components"), "components"));
  std::string fingerprint = expect_field("fingerprint");
  std::string silence_sym = expect_field("silence");
  std::string hash_hex = expect_field("inventory_hash");
  std::size_t num_phones =
      static_cast<std::size_t>(parse_int(expect_field("phones"), "phones"));
  if (d == 0 || k == 0 || num_phones == 0)
    throw FormatError("corrupt model file (zero dim/components/phones): " + path);

  PhoneInventory inv;
  if (silence_sym != "-") inv.silence = silence_sym;
  std::vector<Gmm> gmms;
  gmms.reserve(num_phones);
  for (std::size_t i = 0; i < num_phones; ++i) {
    auto cells = next_line("phone block");
    if (cells.size() != 2 || cells[0] != "phone")
      throw FormatError("corrupt model file (expected 'phone <sym>'): " + path);
    inv.phones.push_back(cells[1]);
    gmms.push_back(detail::read_gmm(in, k, d, path));
  }

  std::string sil_flag = expect_field("silence_model");
  std::optional<Gmm> silence_gmm;
  if (sil_flag == "1")
    silence_gmm = detail::read_gmm(in, k, d, path);
  else if (sil_flag != "0")
    throw FormatError("corrupt model file (silence_model must be 0 or 1): " + path);

  auto anti_hdr = next_line("anti block");
  if (anti_hdr.size() != 1 || anti_hdr[0] != "anti")
    throw FormatError("corrupt model file (expected 'anti'): " + path);
  Gmm anti = detail::read_gmm(in, k, d, path);

  auto end_hdr = next_line("end marker");
  if (end_hdr.size() != 1 || end_hdr[0] != "end")
    throw FormatError("corrupt model file (expected 'end'): " + path);

  inv.validate();
  char actual_hex[20];
  std::snprintf(actual_hex, sizeof(actual_hex), "%016llx",
                static_cast<unsigned long long>(inv.hash()));
  if (hash_hex != actual_hex)
    throw FormatError("model inventory mismatch: stored hash " + hash_hex +
                      " does not match phone list (" + actual_hex + "): " + path);
  if (expected_inventory) {
    expected_inventory->validate();
    if (expected_inventory->hash() != inv.hash())
      throw ValidationError("model inventory does not match the expected inventory: " + path);
  }
  return AcousticModel(std::move(inv), std::move(gmms), std::move(anti), std::move(silence_gmm),
                       fingerprint);
}

}  // namespace uverify
