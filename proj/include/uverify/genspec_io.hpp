#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "uverify/common.hpp"
#include "uverify/corpus.hpp"

namespace uverify {

namespace detail {

inline nlohmann::json gmm_to_json(const Gmm& g) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : g.components()) {
    comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
  }
  return comps;
}

inline Gmm gmm_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw FormatError("generator spec: '" + what + "' must be a non-empty component array");
  std::vector<GmmComponent> comps;
  for (const auto& cj : j) {
    GmmComponent c;
    c.weight = cj.at("weight").get<double>();
    c.mean = cj.at("mean").get<std::vector<double>>();
    c.var = cj.at("var").get<std::vector<double>>();
    comps.push_back(std::move(c));
  }
  try {
    return Gmm(std::move(comps));
  } catch (const ValidationError& e) {
    throw FormatError("generator spec: bad mixture for '" + what + "': " + e.what());
  }
}

}  // namespace detail

inline void save_generator_spec(const GeneratorSpec& spec, const std::string& path) {
  spec.validate();
  nlohmann::json j;
  j["dim"] = spec.dim;
  j["seed"] = spec.seed;
  j["duration"] = {{"min", spec.duration.min_frames}, {"max", spec.duration.max_frames}};
  j["silence_duration"] = {{"min", spec.silence_duration.min_frames},
                           {"max", spec.silence_duration.max_frames}};
  j["silence_prob"] = spec.silence_prob;
  nlohmann::json phones = nlohmann::json::object();
  for (const auto& [p, g] : spec.phones) phones[p] = detail::gmm_to_json(g);
  j["phones"] = std::move(phones);
  if (!spec.phone_durations.empty()) {
    nlohmann::json durs = nlohmann::json::object();
    for (const auto& [p, d] : spec.phone_durations)
      durs[p] = {{"min", d.min_frames}, {"max", d.max_frames}};
    j["phone_durations"] = std::move(durs);
  }
  if (spec.silence) j["silence"] = detail::gmm_to_json(*spec.silence);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write generator spec: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline GeneratorSpec load_generator_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generator spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("generator spec is not valid JSON: " + path + " (" + e.what() + ")");
  }
  GeneratorSpec spec;
  try {
    spec.dim = j.at("dim").get<std::size_t>();
    spec.seed = j.value("seed", 0ULL);
    if (j.contains("duration")) {
      spec.duration.min_frames = j["duration"].at("min").get<std::size_t>();
      spec.duration.max_frames = j["duration"].at("max").get<std::size_t>();
    }
    if (j.contains("silence_duration")) {
      spec.silence_duration.min_frames = j["silence_duration"].at("min").get<std::size_t>();
      spec.silence_duration.max_frames = j["silence_duration"].at("max").get<std::size_t>();
    }
    spec.silence_prob = j.value("silence_prob", 0.5);
    for (const auto& [p, gj] : j.at("phones").items())
      spec.phones[p] = detail::gmm_from_json(gj, p);
    if (j.contains("phone_durations"))
      for (const auto& [p, dj] : j["phone_durations"].items())
        spec.phone_durations[p] = {dj.at("min").get<std::size_t>(),
                                   dj.at("max").get<std::size_t>()};
    if (j.contains("silence")) spec.silence = detail::gmm_from_json(j["silence"], "silence");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("generator spec is malformed: " + path + " (" + e.what() + ")");
  }
  spec.validate();
  return spec;
}

}  // namespace uverify
