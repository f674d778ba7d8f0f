#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgxmr/apps.hpp"
#include "sgxmr/codec.hpp"
#include "sgxmr/mrcore.hpp"

namespace sgxmr::cli {

enum class Backend { Sgxmr, Oram };

Backend parse_backend(const std::string& name);
std::string to_string(Backend backend);

struct BenchRow {
  Backend backend = Backend::Sgxmr;
  std::uint64_t n = 0;
  double wall_ms = 0;
  std::uint64_t boundary_block_transfers = 0;
  std::uint64_t peak_untrusted_bytes = 0;
  std::uint64_t peak_enclave_bytes = 0;
  /// Block reads of the job's input (not part of the ORAM cost).
  std::uint64_t logical_accesses = 0;
  mrcore::JobStats stats;
  std::uint32_t oram_height = 0;
};

/// Input for `bench`: N 64-byte fixed records in 4096-byte blocks.
/// WordCount gets Zipf text lines, KMeans 2-D points in [0, 100).
codec::BlockFile bench_input(const std::string& app, std::uint64_t n, const Key& key, std::uint64_t seed);

/// Job configuration for a backend: the full protected pipeline for sgxmr,
/// merge sort with the combiner for the ORAM baseline.
mrcore::JobConfig bench_config(Backend backend, std::uint64_t seed);

mrcore::UserFunctions bench_udf(const std::string& app);

/// Runs one job on the backend. The ORAM tree is sized by a dry run of the
/// same job on plain storage.
BenchRow bench_once(const std::string& app, std::uint64_t n, Backend backend, std::uint64_t seed);

std::string bench_csv_header();
std::string bench_csv_line(const BenchRow& row);

}  // namespace sgxmr::cli
