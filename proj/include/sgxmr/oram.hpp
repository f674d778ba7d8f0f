#pragma once

// Path ORAM over untrusted bucket storage, and a BlockDevice adapter that
// routes every block transfer of a job through it.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sgxmr/boundary.hpp"
#include "sgxmr/crypto.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr::oram {

enum class OramOp : std::uint8_t { Read, Write };

struct OramConfig {
  std::uint64_t num_blocks = 1;
  std::uint32_t z = 4;
  std::uint32_t block_bytes = 64;
  std::uint64_t seed = 0;
  std::size_t stash_limit = 128;
};

/// Tree height for n logical blocks: ceil(log2 n), 0 for n = 1.
std::uint32_t tree_height(std::uint64_t num_blocks);

/// Non-recursive Path ORAM. The position map and stash live in the enclave;
/// buckets live outside, each slot encrypted, every slot always occupied.
/// Each access logs L+1 bucket reads (root to leaf) followed by L+1 bucket
/// writes (root to leaf) as Oram-phase UntrustedBlock events whose index is
/// the bucket's heap position.
class OramState {
 public:
  OramState(const OramConfig& config, const Key& key, trace::Recorder* recorder);

  /// Reads (and for Write, replaces) block `id`. Returns the block's
  /// contents before the access. Unwritten blocks read as zeros.
  /// Throws OutOfRange for a bad id or data size, StashOverflow when the
  /// stash outgrows its limit.
  std::vector<std::uint8_t> access(OramOp op, std::uint64_t id, std::span<const std::uint8_t> data = {});

  std::uint64_t num_blocks() const { return config_.num_blocks; }
  std::uint32_t z() const { return config_.z; }
  std::uint32_t height() const { return height_; }
  std::uint64_t num_leaves() const { return 1ull << height_; }
  std::uint64_t bucket_count() const { return (2ull << height_) - 1; }
  std::uint32_t block_bytes() const { return config_.block_bytes; }

  std::size_t stash_size() const { return stash_.size(); }
  std::size_t max_stash() const { return max_stash_; }
  std::uint64_t accesses() const { return accesses_; }
  /// Bucket reads and writes logged so far.
  std::uint64_t bucket_events() const { return bucket_events_; }
  /// Leaf whose path the last access read and wrote.
  std::uint64_t last_leaf() const { return last_leaf_; }
  /// Bucket at `level` (0 = root) on the path to `leaf`.
  std::uint64_t bucket_on_path(std::uint64_t leaf, std::uint32_t level) const;

  /// Untrusted bytes held by the bucket tree.
  std::uint64_t storage_bytes() const;

  /// Decrypts the whole tree and checks that every block is on the path to
  /// its mapped leaf or in the stash. Test instrumentation; not traced.
  bool check_path_invariant() const;

  void set_recorder(trace::Recorder* recorder) { recorder_ = recorder; }

 private:
  struct Entry {
    std::uint64_t id;
    std::uint64_t leaf;
    std::vector<std::uint8_t> data;
  };

  std::size_t slot_plaintext_size() const { return 16 + config_.block_bytes; }
  std::vector<std::uint8_t> seal_slot(const Entry* entry, std::uint64_t slot_index);
  bool open_slot(std::uint64_t slot_index, Entry& out) const;

  OramConfig config_;
  Key key_;
  Digest context_;
  std::uint32_t nonce_domain_;
  std::uint64_t nonce_counter_ = 0;
  trace::Recorder* recorder_;
  std::uint32_t height_;
  std::vector<std::uint64_t> position_;
  std::vector<Entry> stash_;
  std::vector<std::vector<std::uint8_t>> slots_;  // bucket-major, z per bucket
  std::mt19937_64 rng_;
  std::size_t max_stash_ = 0;
  std::uint64_t accesses_ = 0;
  std::uint64_t bucket_events_ = 0;
  std::uint64_t last_leaf_ = 0;
};

/// BlockDevice whose block i is ORAM block i. Capacity is fixed at
/// construction, so size the tree for everything a job will write.
class OramDevice final : public boundary::BlockDevice {
 public:
  OramDevice(std::uint64_t capacity, std::uint32_t block_size, const Key& key, std::uint64_t seed,
             trace::Recorder* recorder, std::uint32_t z = 4);

  codec::Block read_block(std::uint64_t index) override;
  void write_block(std::uint64_t index, const codec::Block& block) override;
  std::uint64_t size() const override { return size_; }
  /// Places blocks through the ORAM with tracing and counting suspended.
  void load(std::span<const codec::Block> blocks) override;
  std::uint64_t peak_bytes() const override { return state_.storage_bytes(); }

  const OramState& state() const { return state_; }
  /// Traced read_block/write_block calls.
  std::uint64_t logical_accesses() const { return logical_accesses_; }
  /// Slot transfers observed: Z per logged bucket event.
  std::uint64_t block_transfers() const { return state_.bucket_events() * state_.z(); }

 private:
  OramState state_;
  trace::Recorder* recorder_;
  std::uint64_t size_ = 0;
  std::uint64_t logical_accesses_ = 0;
};

}  // namespace sgxmr::oram
