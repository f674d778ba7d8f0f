#pragma once

// Access traces: what an OS-level observer sees at the enclave boundary.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgxmr/codec.hpp"

namespace sgxmr::trace {

enum class Phase : std::uint8_t { Encode, Map, Combine, Sort, Reduce, Output, Oram };
enum class Space : std::uint8_t { UntrustedBlock, EnclavePage };
enum class Op : std::uint8_t { Read, Write };

inline constexpr std::size_t kPhaseCount = 7;

std::string_view to_string(Phase phase);
std::string_view to_string(Space space);
std::string_view to_string(Op op);
Phase parse_phase(std::string_view name);
Space parse_space(std::string_view name);
Op parse_op(std::string_view name);

struct AccessEvent {
  std::uint64_t tick = 0;
  Phase phase = Phase::Map;
  Space space = Space::UntrustedBlock;
  Op op = Op::Read;
  std::uint64_t index = 0;

  /// Equality on everything an observer compares; the tick is ignored.
  bool same_access(const AccessEvent& other) const {
    return phase == other.phase && space == other.space && op == other.op && index == other.index;
  }
  bool operator==(const AccessEvent&) const = default;
};

using Trace = std::vector<AccessEvent>;

/// Single-writer event log. Events are stamped with consecutive ticks
/// starting at 0 and, unless given explicitly, with the current phase.
class Recorder {
 public:
  void set_phase(Phase phase) { phase_ = phase; }
  Phase phase() const { return phase_; }

  void record(Space space, Op op, std::uint64_t index) { record(phase_, space, op, index); }
  void record(Phase phase, Space space, Op op, std::uint64_t index) {
    events_.push_back(AccessEvent{next_tick_++, phase, space, op, index});
  }

  const Trace& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  void clear() {
    events_.clear();
    next_tick_ = 0;
  }

 private:
  Trace events_;
  std::uint64_t next_tick_ = 0;
  Phase phase_ = Phase::Map;
};

struct Divergence {
  std::size_t position = 0;
  std::optional<AccessEvent> left;   // empty when the left trace ended first
  std::optional<AccessEvent> right;  // empty when the right trace ended first
};

/// First position where the traces differ in (phase, space, op, index), or
/// where one ends before the other.
std::optional<Divergence> diff(std::span<const AccessEvent> left, std::span<const AccessEvent> right);

Trace filter_phase(std::span<const AccessEvent> events, Phase phase);
Trace filter_space(std::span<const AccessEvent> events, Space space);

/// Reads/writes per phase and space.
struct Counts {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
};
struct Summary {
  Counts block[kPhaseCount];
  Counts page[kPhaseCount];

  const Counts& blocks(Phase p) const { return block[static_cast<std::size_t>(p)]; }
  const Counts& pages(Phase p) const { return page[static_cast<std::size_t>(p)]; }
  /// UntrustedBlock reads + writes over every phase except Encode.
  std::uint64_t boundary_block_transfers() const;
};
Summary summarize(std::span<const AccessEvent> events);

/// The data-independent parameters a trace may legitimately depend on.
/// `seed` and `dummy_rate` are carried alongside but are not part of the
/// shape proper; see shapes_compatible().
struct Shape {
  std::uint64_t num_input_blocks = 0;
  std::uint32_t block_size = codec::kPageSize;
  codec::RecordMode record_mode = codec::RecordMode::Fixed;
  std::uint32_t record_len = 0;
  std::string config_digest;
  std::uint64_t seed = 0;
  double dummy_rate = 0.0;

  bool same_shape(const Shape& other) const {
    return num_input_blocks == other.num_input_blocks && block_size == other.block_size &&
           record_mode == other.record_mode && record_len == other.record_len &&
           config_digest == other.config_digest;
  }
};

Shape shape_of(const codec::FileHeader& input, std::string config_digest, std::uint64_t seed,
               double dummy_rate);

/// By default the seed and dummy_rate must also match (one fixed
/// configuration across varying data). With `across_seeds` they may differ,
/// which is the stricter obliviousness claim.
bool shapes_compatible(const Shape& a, const Shape& b, bool across_seeds);

enum class VerdictKind { Oblivious, Leaky };

struct Verdict {
  VerdictKind kind = VerdictKind::Oblivious;
  std::optional<Divergence> divergence;
  std::size_t left_run = 0;
  std::size_t right_run = 0;
};

/// Certifies that all traces are identical (ignoring ticks). Requires at
/// least two traces and pairwise compatible shapes; throws ShapeMismatch
/// otherwise.
Verdict assert_oblivious(std::span<const Trace> traces, std::span<const Shape> shapes,
                         bool across_seeds = false);

// JSONL serialization, one event per line:
// {"tick":0,"phase":"Sort","space":"UntrustedBlock","op":"Read","index":5}
std::string to_json_line(const AccessEvent& event);
AccessEvent parse_json_line(std::string_view line);
std::string serialize(std::span<const AccessEvent> events);
Trace parse(std::string_view text);
void save(const std::filesystem::path& path, std::span<const AccessEvent> events);
Trace load(const std::filesystem::path& path);

std::string shape_to_json(const Shape& shape);
Shape shape_from_json(std::string_view text);
void save_shape(const std::filesystem::path& path, const Shape& shape);
Shape load_shape(const std::filesystem::path& path);
/// Sidecar location for a trace file's shape: "<trace>.shape.json".
std::filesystem::path shape_path_for(const std::filesystem::path& trace_path);

}  // namespace sgxmr::trace
