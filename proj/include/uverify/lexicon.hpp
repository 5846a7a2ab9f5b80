#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uverify/common.hpp"

namespace uverify {

// The phoneme set P. The optional silence symbol is tracked separately and
// never counts toward |P|, which bounds the rank scale.
struct PhoneInventory {
  std::vector<std::string> phones;
  std::optional<std::string> silence;

  std::size_t size() const { return phones.size(); }

  bool contains(const std::string& p) const {
    return std::find(phones.begin(), phones.end(), p) != phones.end();
  }
  bool is_silence(const std::string& p) const { return silence && *silence == p; }

  std::size_t index_of(const std::string& p) const {
    auto it = std::find(phones.begin(), phones.end(), p);
    if (it == phones.end()) throw ValidationError("unknown phoneme: '" + p + "'");
    return static_cast<std::size_t>(it - phones.begin());
  }

  std::uint64_t hash() const {
    std::string joined;
    for (const auto& p : phones) {
      joined += p;
      joined += '\n';
    }
    if (silence) {
      joined += ":silence ";
      joined += *silence;
    }
    return fnv1a(joined);
  }

  void validate() const {
    if (phones.size() < 2) throw ValidationError("phone inventory needs at least 2 symbols");
    std::set<std::string> seen;
    for (const auto& p : phones) {
      if (p.empty()) throw ValidationError("phone inventory contains an empty symbol");
      if (!seen.insert(p).second)
        throw ValidationError("duplicate phoneme symbol: '" + p + "'");
      if (silence && *silence == p)
        throw ValidationError("silence symbol '" + p + "' must not appear in the phone list");
    }
  }
};

struct Pronunciation {
  std::vector<std::string> phones;
  bool operator==(const Pronunciation&) const = default;
};

struct Lexicon {
  PhoneInventory inventory;
  std::map<std::string, std::vector<Pronunciation>> entries;

  const std::vector<Pronunciation>* lookup(const std::string& word) const {
    auto it = entries.find(word);
    return it == entries.end() ? nullptr : &it->second;
  }
  std::vector<std::string> words() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& [w, _] : entries) out.push_back(w);
    return out;
  }
};

// One word of a script together with its candidate pronunciations.
struct LatticeWord {
  std::string word;
  std::vector<Pronunciation> variants;
  bool oov = false;  // resolved via the G2P fallback rather than the lexicon
};

// Per-word alternatives in script order. Expansions are indexed with the
// first word most significant, so index 0 takes every word's first variant.
struct PronunciationLattice {
  std::vector<LatticeWord> words;

  // Saturates at SIZE_MAX on overflow.
  std::size_t expansion_count() const {
    std::size_t n = 1;
    for (const auto& w : words) {
      if (w.variants.empty()) throw ValidationError("lattice word without variants");
      if (n > SIZE_MAX / w.variants.size()) return SIZE_MAX;
      n *= w.variants.size();
    }
    return n;
  }

  std::vector<const Pronunciation*> expansion(std::size_t idx) const {
    std::vector<const Pronunciation*> out(words.size());
    std::size_t rem = idx;
    for (std::size_t wi = words.size(); wi-- > 0;) {
      std::size_t k = words[wi].variants.size();
      out[wi] = &words[wi].variants[rem % k];
      rem /= k;
    }
    if (rem != 0) throw ValidationError("expansion index out of range");
    return out;
  }
};

inline PhoneInventory load_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open inventory file: " + path);
  PhoneInventory inv;
  std::string line;
  while (std::getline(in, line)) {
    auto cells = split_ws(line);
    if (cells.empty() || cells[0][0] == '#') continue;
    if (cells[0] == ":silence") {
      if (cells.size() != 2) throw FormatError("':silence' line needs one symbol: " + path);
      inv.silence = cells[1];
      continue;
    }
    if (cells.size() != 1)
      throw FormatError("inventory line must hold a single symbol: '" + line + "'");
    inv.phones.push_back(cells[0]);
  }
  inv.validate();
  return inv;
}

inline void save_inventory(const PhoneInventory& inv, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write inventory file: " + path);
  for (const auto& p : inv.phones) out << p << '\n';
  if (inv.silence) out << ":silence " << *inv.silence << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// Toy ARPAbet-style inventory (39 phones) used by the shipped G2P rules;
// silence is "sil".
inline PhoneInventory default_inventory() {
  PhoneInventory inv;
  inv.phones = {"aa", "ae", "ah", "ao", "aw", "ay", "eh", "er", "ey", "ih",
                "iy", "ow", "oy", "uh", "uw", "b",  "ch", "d",  "dh", "f",
                "g",  "hh", "jh", "k",  "l",  "m",  "n",  "ng", "p",  "r",
                "s",  "sh", "t",  "th", "v",  "w",  "y",  "z",  "zh"};
  inv.silence = "sil";
  inv.validate();
  return inv;
}

struct G2pRule {
  std::string graphemes;
  std::vector<std::string> phones;
};

// Longest-match rules; digraphs take precedence over single letters.
inline const std::vector<G2pRule>& g2p_rules() {
  static const std::vector<G2pRule> rules = {
      {"ch", {"ch"}}, {"sh", {"sh"}}, {"th", {"th"}}, {"ph", {"f"}},  {"wh", {"w"}},
      {"ck", {"k"}},  {"ng", {"ng"}}, {"qu", {"k", "w"}}, {"ee", {"iy"}}, {"oo", {"uw"}},
      {"ea", {"iy"}}, {"ou", {"aw"}}, {"ow", {"ow"}}, {"oy", {"oy"}}, {"oi", {"oy"}},
      {"ai", {"ey"}}, {"ay", {"ey"}}, {"au", {"ao"}}, {"aw", {"aw"}}, {"oa", {"ow"}},
      {"er", {"er"}}, {"ir", {"er"}}, {"ur", {"er"}},
      {"a", {"ae"}},  {"b", {"b"}},   {"c", {"k"}},   {"d", {"d"}},   {"e", {"eh"}},
      {"f", {"f"}},   {"g", {"g"}},   {"h", {"hh"}},  {"i", {"ih"}},  {"j", {"jh"}},
      {"k", {"k"}},   {"l", {"l"}},   {"m", {"m"}},   {"n", {"n"}},   {"o", {"aa"}},
      {"p", {"p"}},   {"q", {"k"}},   {"r", {"r"}},   {"s", {"s"}},   {"t", {"t"}},
      {"u", {"ah"}},  {"v", {"v"}},   {"w", {"w"}},   {"x", {"k", "s"}}, {"y", {"y"}},
      {"z", {"z"}}};
  return rules;
}

inline const std::string& g2p_default_phone() {
  static const std::string p = "ah";
  return p;
}

// Deterministic rule-table G2P. Non-alphabetic characters are stripped
// first; an empty remainder is an error.
inline Pronunciation g2p_fallback(const std::string& word) {
  std::string w;
  for (char c : word) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) w.push_back(static_cast<char>(std::tolower(u)));
  }
  if (w.empty())
    throw ValidationError("g2p: word '" + word + "' is empty after stripping non-alphabetics");
  const auto& rules = g2p_rules();
  std::size_t max_len = 0;
  for (const auto& r : rules) max_len = std::max(max_len, r.graphemes.size());
  Pronunciation out;
  std::size_t i = 0;
  while (i < w.size()) {
    const G2pRule* hit = nullptr;
    for (std::size_t len = std::min(max_len, w.size() - i); len >= 1 && !hit; --len) {
      for (const auto& r : rules) {
        if (r.graphemes.size() == len && w.compare(i, len, r.graphemes) == 0) {
          hit = &r;
          break;
        }
      }
    }
    if (hit) {
      out.phones.insert(out.phones.end(), hit->phones.begin(), hit->phones.end());
      i += hit->graphemes.size();
    } else {
      out.phones.push_back(g2p_default_phone());
      ++i;
    }
  }
  return out;
}

// Lexicon file: one entry per line, `word phone1 phone2 ...`, '#' comments.
inline Lexicon load_lexicon(const std::string& path, const PhoneInventory& inventory) {
  inventory.validate();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  Lexicon lex;
  lex.inventory = inventory;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto cells = split_ws(line);
    if (cells.empty() || cells[0][0] == '#') continue;
    if (cells.size() < 2)
      throw FormatError("lexicon line " + std::to_string(lineno) +
                        " has an empty pronunciation: '" + line + "'");
    Pronunciation pron;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const auto& p = cells[i];
      // silence never appears in pronunciations; the aligner inserts it
      if (inventory.is_silence(p))
        throw FormatError("lexicon line " + std::to_string(lineno) + ": silence symbol '" + p +
                          "' is not allowed in a pronunciation");
      if (!inventory.contains(p))
        throw FormatError("lexicon line " + std::to_string(lineno) + ": unknown phoneme '" + p +
                          "' in word '" + cells[0] + "'");
      pron.phones.push_back(p);
    }
    auto& variants = lex.entries[cells[0]];
    if (std::find(variants.begin(), variants.end(), pron) != variants.end())
      throw FormatError("lexicon line " + std::to_string(lineno) +
                        ": duplicate pronunciation for word '" + cells[0] + "'");
    variants.push_back(pron);
  }
  return lex;
}

// Entries sorted by word, variants in insertion order.
inline void save_lexicon(const Lexicon& lex, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write lexicon file: " + path);
  for (const auto& [word, variants] : lex.entries) {
    for (const auto& pron : variants) {
      out << word;
      for (const auto& p : pron.phones) out << ' ' << p;
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

// Case-folds and strips punctuation, splitting on whitespace. Tokens that
// are pure punctuation vanish; tokens with letters or digits survive.
inline std::vector<std::string> tokenize_script(const std::string& script) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : script) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

// Resolves each script word via the lexicon, falling back to the G2P rules
// for out-of-vocabulary words (flagged). Fallback output must validate
// against the inventory or the word fails.
inline PronunciationLattice script_to_lattice(const std::string& script, const Lexicon& lex) {
  auto tokens = tokenize_script(script);
  if (tokens.empty()) throw ValidationError("script contains no words: '" + script + "'");
  PronunciationLattice lat;
  for (const auto& tok : tokens) {
    LatticeWord lw;
    lw.word = tok;
    if (const auto* variants = lex.lookup(tok)) {
      lw.variants = *variants;
    } else {
      Pronunciation pron;
      try {
        pron = g2p_fallback(tok);
      } catch (const ValidationError&) {
        throw ValidationError("word '" + tok + "' not in lexicon and G2P fallback failed");
      }
      for (const auto& p : pron.phones)
        if (!lex.inventory.contains(p))
          throw ValidationError("word '" + tok + "' not in lexicon and G2P output phoneme '" + p +
                                "' is not in the inventory");
      lw.variants.push_back(std::move(pron));
      lw.oov = true;
    }
    lat.words.push_back(std::move(lw));
  }
  return lat;
}

}  // namespace uverify
