#pragma once

// The MapReduce controller. A job runs
//
//   Map -> (in-buffer sort, Combine, dummy injection) -> block-level Sort -> Reduce -> Output
//
// with every block crossing the boundary through a BlockDevice and every
// spill re-encrypted under a job-specific context.

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgxmr/boundary.hpp"
#include "sgxmr/codec.hpp"
#include "sgxmr/oprim.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr::mrcore {

enum class AggregatorKind : std::uint8_t { Count, Sum, Max, Min, TopK };

/// Associative, commutative aggregation applied by both combiner and
/// reducer. Values are arrays of int64 words.
struct Aggregator {
  AggregatorKind kind = AggregatorKind::Sum;
  std::uint32_t k = 0;  // TopK only

  static Aggregator count() { return {AggregatorKind::Count, 0}; }
  static Aggregator sum() { return {AggregatorKind::Sum, 0}; }
  static Aggregator max() { return {AggregatorKind::Max, 0}; }
  static Aggregator min() { return {AggregatorKind::Min, 0}; }
  static Aggregator top_k(std::uint32_t k) { return {AggregatorKind::TopK, k}; }

  /// Words in an aggregated value when map emits `input_words` per pair.
  std::size_t stored_words(std::size_t input_words) const;
  /// Turns one emitted value into an aggregated value.
  std::vector<std::int64_t> lift(std::span<const std::int64_t> emitted, std::size_t stored) const;
  /// The neutral element: what a dummy record carries.
  std::vector<std::int64_t> identity(std::size_t stored) const;
  /// out = a (+) b. Fixed instruction sequence for all inputs.
  void merge(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
             std::span<std::int64_t> out) const;

  std::string name() const;
};

Aggregator parse_aggregator(std::string_view text);

struct JobConfig {
  std::uint32_t block_size = codec::kPageSize;
  bool protect_sort = true;
  bool protect_swap = true;
  bool combiner = true;
  double dummy_rate = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t map_buffer_records = 1024;
  std::uint16_t key_max = 32;
  /// Log enclave page touches of the sort and combine buffers.
  bool trace_pages = false;
  /// Keep per-key flush and dummy counts in JobStats (test instrumentation).
  bool collect_key_stats = false;

  /// Throws std::invalid_argument / InvalidBlockSize on bad settings.
  void validate() const;
};

using Emit = std::function<void(std::string_view key, std::span<const std::int64_t> value)>;
using MapFn = std::function<void(const codec::Record& input, const Emit& emit)>;

/// What an application supplies. Input records reach map() with the stored
/// payload as value, an empty key, and seq = position in the input file.
struct UserFunctions {
  std::string name;
  MapFn map;
  Aggregator aggregator;
  std::size_t value_words = 1;  // words per emitted value
};

/// Reducer-side observable: how many sorted records were consumed before
/// each output emission.
struct ReduceObservation {
  std::uint64_t group = 0;
  std::string key;
  std::uint64_t consumed = 0;
};

struct JobStats {
  std::uint64_t input_blocks = 0;
  std::uint64_t input_records = 0;
  std::uint64_t map_outputs = 0;
  std::uint64_t flushes = 0;
  std::uint64_t injected_dummies = 0;
  std::uint64_t spill_blocks = 0;   // including any power-of-two padding
  std::uint64_t sorted_blocks = 0;  // blocks the reducer reads
  std::uint64_t output_blocks = 0;
  std::uint64_t output_records = 0;  // real keys
  std::uint64_t peak_enclave_bytes = 0;
  std::map<std::string, std::uint64_t> key_flushes;
  std::map<std::string, std::uint64_t> key_dummies;
};

struct JobResult {
  codec::BlockFile output;
  std::vector<ReduceObservation> observations;
  JobStats stats;
};

/// Digest over the parts of the configuration that shape the trace:
/// everything except seed and dummy_rate.
std::string config_digest(const JobConfig& config, const UserFunctions& udf);

/// Slot layout of intermediate and output records for a job.
codec::RecordLayout job_layout(const JobConfig& config, const UserFunctions& udf);

/// Runs one job. The device must be empty; the input is loaded into it at
/// [0, num_blocks) and output blocks are appended after the intermediates.
JobResult run_job(const JobConfig& config, const codec::BlockFile& input, const UserFunctions& udf,
                  boundary::BlockDevice& device, trace::Recorder& recorder, const Key& key,
                  boundary::PageSimulator* pages = nullptr);

/// Decodes an output file into (key, aggregated value) pairs, dropping
/// dummies. key_max and value words must match the job that wrote it.
std::vector<std::pair<std::string, std::vector<std::int64_t>>> decode_output(
    const codec::BlockFile& output, const Key& key, const codec::RecordLayout& layout);

/// Per-flush seeded generator used for dummy injection.
std::mt19937_64 flush_rng(std::uint64_t seed, std::uint64_t flush_index);

/// One oblivious pass over a key-sorted buffer: adjacent equal keys are
/// merged into the later slot and the earlier slot becomes a filler. Then
/// d ~ Binomial(buffer size, dummy_rate) count-zero dummies are appended,
/// keys drawn uniformly from the buffer's distinct keys, and the buffer is
/// re-sorted. `next_seq` supplies sequence numbers for the dummies.
/// Returns the number of dummies injected.
std::uint64_t combine_buffer(codec::RecordBuffer& buffer, const Aggregator& aggregator,
                             double dummy_rate, std::mt19937_64& rng, std::uint64_t& next_seq,
                             const oprim::SortOptions& sort_options = {});

}  // namespace sgxmr::mrcore
