#include "bench.hpp"

#include <chrono>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "sgxmr/boundary.hpp"
#include "sgxmr/oram.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr::cli {
namespace {

constexpr std::uint32_t kBenchRecordLen = 64;
constexpr std::size_t kBenchVocabulary = 2000;
constexpr std::size_t kBenchWordsPerLine = 6;

Key bench_key(std::uint64_t seed) {
  std::uint8_t s[8];
  codec::store_le<std::uint64_t>(s, seed);
  const auto d = sha256(s);
  Key key;
  std::copy_n(d.begin(), key.size(), key.begin());
  return key;
}

}  // namespace

Backend parse_backend(const std::string& name) {
  if (name == "sgxmr") return Backend::Sgxmr;
  if (name == "oram") return Backend::Oram;
  throw std::invalid_argument("unknown backend '" + name + "'");
}

std::string to_string(Backend backend) { return backend == Backend::Sgxmr ? "sgxmr" : "oram"; }

codec::BlockFile bench_input(const std::string& app, std::uint64_t n, const Key& key, std::uint64_t seed) {
  std::vector<std::string> lines;
  if (app == "wordcount") {
    lines = apps::zipf_corpus(n * kBenchWordsPerLine, kBenchVocabulary, 1.0, seed, kBenchWordsPerLine);
  } else if (app == "kmeans") {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> coord(0, 100 * apps::kFixedScale - 1);
    for (std::uint64_t i = 0; i < n; ++i) lines.push_back(apps::format_point({coord(rng), coord(rng)}));
  } else {
    throw std::invalid_argument("unknown app '" + app + "'");
  }
  for (auto& l : lines) l.resize(kBenchRecordLen, '\0');
  codec::EncodeParams params;
  params.record_len = kBenchRecordLen;
  return codec::encode_file(lines, params, key);
}

mrcore::JobConfig bench_config(Backend backend, std::uint64_t seed) {
  mrcore::JobConfig config;
  config.seed = seed;
  config.combiner = true;
  config.dummy_rate = 0.0;
  const bool protect = backend == Backend::Sgxmr;
  config.protect_sort = protect;
  config.protect_swap = protect;
  return config;
}

mrcore::UserFunctions bench_udf(const std::string& app) {
  if (app == "wordcount") return apps::wordcount_udf();
  if (app == "kmeans") {
    std::vector<apps::Point> centroids;
    for (std::int64_t i = 0; i < 4; ++i) centroids.push_back({(25 * i + 10) * apps::kFixedScale, 50 * apps::kFixedScale});
    return apps::kmeans_udf(centroids);
  }
  throw std::invalid_argument("unknown app '" + app + "'");
}

BenchRow bench_once(const std::string& app, std::uint64_t n, Backend backend, std::uint64_t seed) {
  const Key key = bench_key(seed);
  const auto input = bench_input(app, n, key, seed);
  const auto udf = bench_udf(app);
  const auto config = bench_config(backend, seed);

  BenchRow row;
  row.backend = backend;
  row.n = n;
  trace::Recorder recorder;
  using Clock = std::chrono::steady_clock;
  if (backend == Backend::Sgxmr) {
    boundary::UntrustedStore store(config.block_size, &recorder);
    const auto t0 = Clock::now();
    auto result = mrcore::run_job(config, input, udf, store, recorder, key);
    row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    row.boundary_block_transfers = trace::summarize(recorder.events()).boundary_block_transfers();
    row.peak_untrusted_bytes = store.peak_bytes();
    row.stats = std::move(result.stats);
    row.peak_enclave_bytes = row.stats.peak_enclave_bytes;
  } else {
    trace::Recorder dry_recorder;
    boundary::UntrustedStore dry(config.block_size, &dry_recorder);
    mrcore::run_job(config, input, udf, dry, dry_recorder, key);
    oram::OramDevice device(dry.size(), config.block_size, key, seed, &recorder);
    const auto t0 = Clock::now();
    auto result = mrcore::run_job(config, input, udf, device, recorder, key);
    row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    row.boundary_block_transfers = device.block_transfers();
    row.peak_untrusted_bytes = device.peak_bytes();
    row.logical_accesses = device.logical_accesses();
    row.oram_height = device.state().height();
    row.stats = std::move(result.stats);
    // Position map and stash live in the enclave next to the job's buffers.
    row.peak_enclave_bytes = row.stats.peak_enclave_bytes + 8 * device.state().num_blocks() +
                             device.state().max_stash() * (16 + config.block_size);
  }
  return row;
}

std::string bench_csv_header() {
  return "backend,N,wall_ms,boundary_block_transfers,peak_untrusted_bytes,peak_enclave_bytes";
}

std::string bench_csv_line(const BenchRow& row) {
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", row.wall_ms);
  return to_string(row.backend) + "," + std::to_string(row.n) + "," + wall + "," +
         std::to_string(row.boundary_block_transfers) + "," + std::to_string(row.peak_untrusted_bytes) + "," +
         std::to_string(row.peak_enclave_bytes);
}

}  // namespace sgxmr::cli
