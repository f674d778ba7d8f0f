#pragma once

// Helpers and reference oracles shared by the test binaries. The oracles are
// deliberately naive and written without the library's comparison or
// aggregation code.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sgxmr/apps.hpp"
#include "sgxmr/codec.hpp"
#include "sgxmr/crypto.hpp"
#include "sgxmr/record.hpp"

namespace testing {

inline sgxmr::Key random_key(std::mt19937_64& rng) {
  sgxmr::Key k;
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}

inline std::string random_string(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len,
                                 const std::string& alphabet = "abcdefghijklmnopqrstuvwxyz") {
  const std::size_t len = std::uniform_int_distribution<std::size_t>(min_len, max_len)(rng);
  std::string s(len, ' ');
  for (auto& c : s) c = alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
  return s;
}

/// A scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("sgxmr-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Flat stable sort oracle: fillers (dummy, empty key) last, then by key as a
/// byte string, then seq.
inline std::vector<sgxmr::codec::Record> oracle_sort(std::vector<sgxmr::codec::Record> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    const bool fa = a.flag == sgxmr::codec::Flag::Dummy && a.key.empty();
    const bool fb = b.flag == sgxmr::codec::Flag::Dummy && b.key.empty();
    if (fa != fb) return fb;
    if (a.key != b.key) return a.key < b.key;
    return a.seq < b.seq;
  });
  return records;
}

/// Records with small random keys (duplicates likely), distinct seqs and
/// 8-byte values.
inline std::vector<sgxmr::codec::Record> random_records(std::mt19937_64& rng, std::size_t n,
                                                       std::size_t key_alphabet = 4, std::size_t max_key = 3) {
  std::vector<sgxmr::codec::Record> out;
  std::vector<std::uint64_t> seqs(n);
  for (std::size_t i = 0; i < n; ++i) seqs[i] = i;
  std::shuffle(seqs.begin(), seqs.end(), rng);
  const std::string alphabet = std::string("abcdefgh").substr(0, key_alphabet);
  for (std::size_t i = 0; i < n; ++i) {
    sgxmr::codec::Record r;
    r.key = random_string(rng, 1, max_key, alphabet);
    const std::int64_t v = static_cast<std::int64_t>(rng());
    r.value = sgxmr::codec::encode_words(std::span(&v, 1));
    r.seq = seqs[i];
    out.push_back(std::move(r));
  }
  return out;
}

/// WordCount reference: its own tokenizer and a plain map count.
inline std::map<std::string, std::int64_t> oracle_wordcount(const std::vector<std::string>& lines) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& line : lines) {
    std::string token;
    auto finish = [&] {
      std::size_t a = 0, b = token.size();
      while (a < b && !std::isalnum(static_cast<unsigned char>(token[a]))) ++a;
      while (b > a && !std::isalnum(static_cast<unsigned char>(token[b - 1]))) --b;
      if (a < b) {
        std::string w = token.substr(a, b - a);
        std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
        ++counts[w];
      }
      token.clear();
    };
    for (char c : line) {
      if (c == '\0' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        finish();
      } else {
        token += c;
      }
    }
    finish();
  }
  return counts;
}

/// One flat KMeans iteration in fixed point: nearest centroid by squared
/// distance (lowest index on ties), then per-cluster mean rounded half away
/// from zero; empty clusters keep their centroid.
inline std::vector<std::vector<std::int64_t>> oracle_kmeans_round(
    const std::vector<std::vector<std::int64_t>>& points, const std::vector<std::vector<std::int64_t>>& centroids) {
  const std::size_t k = centroids.size(), d = centroids[0].size();
  std::vector<std::vector<std::int64_t>> isums(k, std::vector<std::int64_t>(d, 0));
  std::vector<std::int64_t> counts(k, 0);
  for (const auto& p : points) {
    std::size_t best = 0;
    long double best_d = -1;
    for (std::size_t c = 0; c < k; ++c) {
      long double dist = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const long double diff = static_cast<long double>(p[i]) - static_cast<long double>(centroids[c][i]);
        dist += diff * diff;
      }
      if (best_d < 0 || dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    for (std::size_t i = 0; i < d; ++i) isums[best][i] += p[i];
    ++counts[best];
  }
  auto next = centroids;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t i = 0; i < d; ++i) {
      next[c][i] = std::llround(static_cast<double>(isums[c][i]) / static_cast<double>(counts[c]));
    }
  }
  return next;
}

/// Lines padded with NULs to `len` bytes (fixed-mode input for jobs).
inline std::vector<std::string> pad_lines(std::vector<std::string> lines, std::size_t len) {
  for (auto& l : lines) l.resize(len, '\0');
  return lines;
}

inline sgxmr::codec::BlockFile encode_lines(const std::vector<std::string>& lines, const sgxmr::Key& key,
                                            std::uint32_t record_len = 64, std::uint32_t block_size = 4096) {
  sgxmr::codec::EncodeParams params;
  params.block_size = block_size;
  params.record_len = record_len;
  return sgxmr::codec::encode_file(pad_lines(lines, record_len), params, key);
}

}  // namespace testing
