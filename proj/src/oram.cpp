#include "sgxmr/oram.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "sgxmr/codec.hpp"
#include "sgxmr/error.hpp"
#include "sgxmr/oprim.hpp"

namespace sgxmr::oram {
namespace {

constexpr std::uint64_t kEmptyId = std::numeric_limits<std::uint64_t>::max();

Digest oram_context(std::uint64_t seed) {
  std::vector<std::uint8_t> material;
  constexpr std::string_view kLabel = "sgxmr/oram";
  material.insert(material.end(), kLabel.begin(), kLabel.end());
  std::uint8_t s[8];
  codec::store_le<std::uint64_t>(s, seed);
  material.insert(material.end(), s, s + 8);
  return sha256(material);
}

std::uint64_t ct_eq(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t d = a ^ b;
  std::uint64_t r = 1 ^ ((d | (0 - d)) >> 63);
  oprim::opaque(r);
  return r;
}

}  // namespace

std::uint32_t tree_height(std::uint64_t num_blocks) {
  std::uint32_t h = 0;
  while ((1ull << h) < num_blocks) ++h;
  return h;
}

OramState::OramState(const OramConfig& config, const Key& key, trace::Recorder* recorder)
    : config_(config),
      key_(key),
      context_(oram_context(config.seed)),
      nonce_domain_(codec::load_le<std::uint32_t>(context_.data())),
      recorder_(recorder),
      height_(tree_height(config.num_blocks)),
      rng_(config.seed) {
  if (config.num_blocks == 0) throw std::invalid_argument("ORAM needs at least one block");
  if (config.z < 2) throw std::invalid_argument("ORAM bucket size Z must be at least 2");
  if (config.block_bytes == 0) throw std::invalid_argument("ORAM block size must be positive");
  std::uniform_int_distribution<std::uint64_t> leaf(0, num_leaves() - 1);
  position_.resize(config.num_blocks);
  for (auto& p : position_) p = leaf(rng_);
  slots_.resize(bucket_count() * config.z);
  for (std::uint64_t s = 0; s < slots_.size(); ++s) slots_[s] = seal_slot(nullptr, s);
}

std::uint64_t OramState::bucket_on_path(std::uint64_t leaf, std::uint32_t level) const {
  const std::uint64_t node = leaf + num_leaves();  // 1-based heap index of the leaf
  return (node >> (height_ - level)) - 1;
}

std::uint64_t OramState::storage_bytes() const {
  return slots_.size() * (slot_plaintext_size() + kNonceSize + kTagSize);
}

std::vector<std::uint8_t> OramState::seal_slot(const Entry* entry, std::uint64_t slot_index) {
  std::vector<std::uint8_t> plain(slot_plaintext_size(), 0);
  codec::store_le<std::uint64_t>(plain.data(), entry ? entry->id : kEmptyId);
  codec::store_le<std::uint64_t>(plain.data() + 8, entry ? entry->leaf : 0);
  if (entry) std::copy(entry->data.begin(), entry->data.end(), plain.begin() + 16);
  return codec::seal_block(plain, slot_index, key_, make_nonce(nonce_domain_, nonce_counter_++), context_).bytes;
}

bool OramState::open_slot(std::uint64_t slot_index, Entry& out) const {
  codec::Block block{slot_index, slots_[slot_index]};
  const auto plain = codec::open_block(block, slot_index, key_, context_);
  out.id = codec::load_le<std::uint64_t>(plain.data());
  out.leaf = codec::load_le<std::uint64_t>(plain.data() + 8);
  out.data.assign(plain.begin() + 16, plain.end());
  return out.id != kEmptyId;
}

std::vector<std::uint8_t> OramState::access(OramOp op, std::uint64_t id, std::span<const std::uint8_t> data) {
  if (id >= config_.num_blocks) {
    throw OutOfRange("ORAM block " + std::to_string(id) + " out of range (" +
                     std::to_string(config_.num_blocks) + " blocks)");
  }
  if (op == OramOp::Write && data.size() != config_.block_bytes) {
    throw OutOfRange("ORAM write of " + std::to_string(data.size()) + " bytes; blocks are " +
                     std::to_string(config_.block_bytes));
  }
  ++accesses_;
  const std::uint64_t leaf = position_[id];
  const std::uint64_t new_leaf = std::uniform_int_distribution<std::uint64_t>(0, num_leaves() - 1)(rng_);
  position_[id] = new_leaf;
  last_leaf_ = leaf;

  const std::uint32_t z = config_.z;
  for (std::uint32_t level = 0; level <= height_; ++level) {
    const std::uint64_t bucket = bucket_on_path(leaf, level);
    if (recorder_) {
      recorder_->record(trace::Phase::Oram, trace::Space::UntrustedBlock, trace::Op::Read, bucket);
      ++bucket_events_;
    }
    for (std::uint32_t s = 0; s < z; ++s) {
      Entry e;
      if (open_slot(bucket * z + s, e)) stash_.push_back(std::move(e));
    }
  }

  // Serve the request with a scan that touches every stash entry.
  std::vector<std::uint8_t> result(config_.block_bytes, 0);
  std::uint64_t found = 0;
  for (auto& e : stash_) {
    const std::uint64_t hit = ct_eq(e.id, id);
    found |= hit;
    oprim::ocopy(hit, result, e.data);
    if (op == OramOp::Write) oprim::ocopy(hit, e.data, data);
    e.leaf = oprim::oselect(hit, new_leaf, e.leaf);
  }
  if (!found) {
    Entry e{id, new_leaf, std::vector<std::uint8_t>(config_.block_bytes, 0)};
    if (op == OramOp::Write) std::copy(data.begin(), data.end(), e.data.begin());
    stash_.push_back(std::move(e));
  }

  // Greedy eviction, deepest bucket first, then write the path root to leaf.
  std::vector<std::vector<const Entry*>> chosen(height_ + 1);
  std::vector<bool> evicted(stash_.size(), false);
  for (std::uint32_t level = height_ + 1; level-- > 0;) {
    const std::uint64_t bucket = bucket_on_path(leaf, level);
    for (std::size_t i = 0; i < stash_.size() && chosen[level].size() < z; ++i) {
      if (evicted[i] || bucket_on_path(stash_[i].leaf, level) != bucket) continue;
      evicted[i] = true;
      chosen[level].push_back(&stash_[i]);
    }
  }
  for (std::uint32_t level = 0; level <= height_; ++level) {
    const std::uint64_t bucket = bucket_on_path(leaf, level);
    for (std::uint32_t s = 0; s < z; ++s) {
      const Entry* e = s < chosen[level].size() ? chosen[level][s] : nullptr;
      slots_[bucket * z + s] = seal_slot(e, bucket * z + s);
    }
    if (recorder_) {
      recorder_->record(trace::Phase::Oram, trace::Space::UntrustedBlock, trace::Op::Write, bucket);
      ++bucket_events_;
    }
  }
  std::vector<Entry> kept;
  kept.reserve(stash_.size());
  for (std::size_t i = 0; i < stash_.size(); ++i) {
    if (!evicted[i]) kept.push_back(std::move(stash_[i]));
  }
  stash_ = std::move(kept);
  max_stash_ = std::max(max_stash_, stash_.size());
  if (stash_.size() > config_.stash_limit) {
    throw StashOverflow("ORAM stash holds " + std::to_string(stash_.size()) + " blocks; limit is " +
                        std::to_string(config_.stash_limit));
  }
  return result;
}

bool OramState::check_path_invariant() const {
  std::vector<bool> seen(config_.num_blocks, false);
  const std::uint32_t z = config_.z;
  for (std::uint64_t bucket = 0; bucket < bucket_count(); ++bucket) {
    // Level of a heap node: floor(log2(bucket + 1)).
    std::uint32_t level = 0;
    while ((2ull << level) <= bucket + 1) ++level;
    for (std::uint32_t s = 0; s < z; ++s) {
      Entry e;
      if (!open_slot(bucket * z + s, e)) continue;
      if (e.id >= config_.num_blocks || seen[e.id]) return false;
      seen[e.id] = true;
      if (e.leaf != position_[e.id] || bucket_on_path(e.leaf, level) != bucket) return false;
    }
  }
  for (const auto& e : stash_) {
    if (e.id >= config_.num_blocks || seen[e.id] || e.leaf != position_[e.id]) return false;
    seen[e.id] = true;
  }
  return true;
}

OramDevice::OramDevice(std::uint64_t capacity, std::uint32_t block_size, const Key& key, std::uint64_t seed,
                       trace::Recorder* recorder, std::uint32_t z)
    : state_(OramConfig{std::max<std::uint64_t>(capacity, 1), z, block_size, seed,
                        OramConfig{}.stash_limit},
             key, recorder),
      recorder_(recorder) {}

codec::Block OramDevice::read_block(std::uint64_t index) {
  if (index >= size_) {
    throw OutOfRange("block " + std::to_string(index) + " out of range (size " + std::to_string(size_) + ")");
  }
  ++logical_accesses_;
  return codec::Block{index, state_.access(OramOp::Read, index)};
}

void OramDevice::write_block(std::uint64_t index, const codec::Block& block) {
  if (index > size_ || index >= state_.num_blocks()) {
    throw OutOfRange("block " + std::to_string(index) + " out of range (size " + std::to_string(size_) +
                     ", capacity " + std::to_string(state_.num_blocks()) + ")");
  }
  ++logical_accesses_;
  state_.access(OramOp::Write, index, block.bytes);
  size_ = std::max(size_, index + 1);
}

void OramDevice::load(std::span<const codec::Block> blocks) {
  if (size_ + blocks.size() > state_.num_blocks()) throw OutOfRange("ORAM device capacity exceeded by load");
  state_.set_recorder(nullptr);
  for (const auto& b : blocks) state_.access(OramOp::Write, size_++, b.bytes);
  state_.set_recorder(recorder_);
}

}  // namespace sgxmr::oram
