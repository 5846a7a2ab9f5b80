#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "uverify/common.hpp"

namespace uverify {

// Row-major T x D matrix of per-frame acoustic features.
struct FeatureMatrix {
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  double frame_shift_ms = 10.0;
  std::vector<double> values;

  std::span<const double> frame(std::size_t t) const {
    if (t >= num_frames) throw ValidationError("frame index out of range");
    return std::span<const double>(values).subspan(t * dim, dim);
  }
  std::span<double> frame(std::size_t t) {
    if (t >= num_frames) throw ValidationError("frame index out of range");
    return std::span<double>(values).subspan(t * dim, dim);
  }

  void validate() const {
    if (num_frames == 0) throw ValidationError("feature matrix has no frames");
    if (dim == 0) throw ValidationError("feature matrix has zero dimension");
    if (values.size() != num_frames * dim)
      throw ValidationError("feature matrix storage does not match T x D");
    if (!all_finite(values)) throw ValidationError("feature matrix contains non-finite values");
  }
};

// Contiguous frame range [begin, end) of a caller-owned FeatureMatrix.
struct FrameView {
  const FeatureMatrix* feat = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;

  FrameView() = default;
  FrameView(const FeatureMatrix& f) : feat(&f), begin(0), end(f.num_frames) {}
  FrameView(const FeatureMatrix& f, std::size_t b, std::size_t e) : feat(&f), begin(b), end(e) {
    if (b > e || e > f.num_frames) throw ValidationError("frame range out of bounds");
  }

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  std::size_t dim() const { return feat ? feat->dim : 0; }
  std::span<const double> frame(std::size_t i) const { return feat->frame(begin + i); }
};

// Text dump: "#" header with T, D and frame shift, then one line per frame.
inline void save_features(const FeatureMatrix& feat, const std::string& path) {
  feat.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature file: " + path);
  out << "# " << feat.num_frames << ' ' << feat.dim << ' ' << format_double(feat.frame_shift_ms)
      << '\n';
  for (std::size_t t = 0; t < feat.num_frames; ++t) {
    auto row = feat.frame(t);
    for (std::size_t d = 0; d < feat.dim; ++d) {
      if (d) out << ' ';
      out << format_double(row[d]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline FeatureMatrix load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw FormatError("feature file missing '#' header: " + path);
  auto head = split_ws(std::string_view(line).substr(1));
  if (head.size() != 3) throw FormatError("feature header needs T D frame_shift_ms: " + path);
  FeatureMatrix feat;
  std::int64_t t64 = parse_int(head[0], "T");
  std::int64_t d64 = parse_int(head[1], "D");
  if (t64 <= 0 || d64 <= 0) throw FormatError("feature header T and D must be positive: " + path);
  feat.num_frames = static_cast<std::size_t>(t64);
  feat.dim = static_cast<std::size_t>(d64);
  feat.frame_shift_ms = parse_double(head[2], "frame_shift_ms");
  feat.values.reserve(feat.num_frames * feat.dim);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_ws(line);
    if (cells.size() != feat.dim)
      throw FormatError("feature row has " + std::to_string(cells.size()) + " values, expected " +
                        std::to_string(feat.dim) + ": " + path);
    for (const auto& c : cells) feat.values.push_back(parse_double(c, "feature value"));
    ++rows;
  }
  if (rows != feat.num_frames)
    throw FormatError("feature file declares " + std::to_string(feat.num_frames) +
                      " frames but contains " + std::to_string(rows) + ": " + path);
  feat.validate();
  return feat;
}

}  // namespace uverify
