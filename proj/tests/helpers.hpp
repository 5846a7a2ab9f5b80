#pragma once

#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uverify/common.hpp"
#include "uverify/features.hpp"
#include "uverify/gmm.hpp"
#include "uverify/lexicon.hpp"

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("uverify-test-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void put_u32le(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 24) & 0xff);
}

inline void put_u16le(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

// Minimal RIFF/WAVE writer for test fixtures; arbitrary format fields so
// unsupported encodings can be fabricated.
inline void write_wav(const std::string& path, const std::vector<std::int16_t>& samples,
                      std::uint32_t sample_rate, std::uint16_t channels = 1,
                      std::uint16_t bits = 16, std::uint16_t format_tag = 1) {
  std::vector<unsigned char> bytes;
  std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  bytes.insert(bytes.end(), {'R', 'I', 'F', 'F'});
  put_u32le(bytes, 36 + data_size);
  bytes.insert(bytes.end(), {'W', 'A', 'V', 'E'});
  bytes.insert(bytes.end(), {'f', 'm', 't', ' '});
  put_u32le(bytes, 16);
  put_u16le(bytes, format_tag);
  put_u16le(bytes, channels);
  put_u32le(bytes, sample_rate);
  put_u32le(bytes, sample_rate * channels * (bits / 8));
  put_u16le(bytes, static_cast<std::uint16_t>(channels * (bits / 8)));
  put_u16le(bytes, bits);
  bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
  put_u32le(bytes, data_size);
  for (std::int16_t s : samples)
    put_u16le(bytes, static_cast<std::uint16_t>(s));
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

inline uverify::PhoneInventory inventory_of(std::vector<std::string> phones,
                                            const std::string& silence = "") {
  uverify::PhoneInventory inv;
  inv.phones = std::move(phones);
  if (!silence.empty()) inv.silence = silence;
  return inv;
}

inline uverify::Gmm single_gaussian(std::vector<double> mean, double var) {
  uverify::GmmComponent c;
  c.weight = 1.0;
  c.var.assign(mean.size(), var);
  c.mean = std::move(mean);
  return uverify::Gmm({c});
}

inline uverify::FeatureMatrix matrix_of(std::size_t dim,
                                        const std::vector<std::vector<double>>& rows,
                                        double shift_ms = 10.0) {
  uverify::FeatureMatrix f;
  f.dim = dim;
  f.num_frames = rows.size();
  f.frame_shift_ms = shift_ms;
  for (const auto& r : rows) f.values.insert(f.values.end(), r.begin(), r.end());
  return f;
}

}  // namespace testutil
