#pragma once

// Data-oblivious primitives: branchless select, compare-and-swap over record
// slots, and the bitonic sorting network at record and block granularity.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgxmr/boundary.hpp"
#include "sgxmr/codec.hpp"
#include "sgxmr/record.hpp"

namespace sgxmr::oprim {

enum class Direction : std::uint8_t { Ascending, Descending };

/// Oblivious: both slots are rewritten on every compare-swap.
/// Branching: the `if (a >= b) swap` form, which only writes when it swaps.
enum class SwapMode : std::uint8_t { Oblivious, Branching };

/// Keeps the compiler from turning mask arithmetic back into branches.
inline void opaque(std::uint64_t& v) noexcept {
#if defined(__GNUC__) || defined(__clang__)
  __asm__ __volatile__("" : "+r"(v));
#endif
}

/// Returns a if cond == 1, b if cond == 0, without branching on cond.
inline std::uint64_t oselect(std::uint64_t cond, std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t mask = 0 - cond;
  opaque(mask);
  return (a & mask) | (b & ~mask);
}

/// 1 if x < y (unsigned), without a data-dependent branch.
inline std::uint64_t ct_less(std::uint64_t x, std::uint64_t y) noexcept {
  std::uint64_t z = x - y;
  std::uint64_t r = (z ^ ((x ^ y) & (y ^ z))) >> 63;
  opaque(r);
  return r;
}

/// 1 if x < y (signed), without a data-dependent branch.
inline std::uint64_t ct_less_signed(std::int64_t x, std::int64_t y) noexcept {
  constexpr std::uint64_t kBias = 1ull << 63;
  return ct_less(static_cast<std::uint64_t>(x) ^ kBias, static_cast<std::uint64_t>(y) ^ kBias);
}

inline std::int64_t oselect_i64(std::uint64_t cond, std::int64_t a, std::int64_t b) noexcept {
  return static_cast<std::int64_t>(
      oselect(cond, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b)));
}

/// Swaps a and b (equal length) iff cond == 1. Every byte of both spans is
/// read and written regardless of cond: 64-bit words, then a byte tail.
void oswap(std::uint64_t cond, std::span<std::uint8_t> a, std::span<std::uint8_t> b) noexcept;

/// dst = cond ? src : dst, touching every byte of dst.
void ocopy(std::uint64_t cond, std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) noexcept;

/// 1 if slot a sorts strictly before slot b, else 0. The order is
/// (filler, key bytes, key length, seq): fillers (key-less dummies) come
/// after everything else, keys compare lexicographically and seq breaks
/// ties. Runs the same instruction sequence for any slot contents.
std::uint64_t oless(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                    const codec::RecordLayout& layout) noexcept;

/// 1 if both slots are non-filler records with the same key.
std::uint64_t osame_key(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                        const codec::RecordLayout& layout) noexcept;

/// Non-oblivious reference ordering on decoded records (same order as oless).
bool sort_key_less(const codec::Record& a, const codec::Record& b);

/// Compare-and-swap on two records. They are serialized into equal-length
/// buffers (value padded to the pair's maximum) and swapped with oswap.
/// Ascending returns (min, max); Descending returns (max, min).
std::pair<codec::Record, codec::Record> ocompare_swap(const codec::Record& a, const codec::Record& b,
                                                      Direction dir);

/// Compare-and-swap of slots i and j of `buf`, logging page touches to `tap`.
void compare_swap_slots(codec::RecordBuffer& buf, std::size_t i, std::size_t j, Direction dir,
                        SwapMode mode, const boundary::PageTap& tap);

struct CompareSwap {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  Direction dir = Direction::Ascending;

  bool operator==(const CompareSwap&) const = default;
};

struct CompareSwapSchedule {
  std::size_t n = 0;
  std::vector<CompareSwap> steps;
};

/// Smallest power of two >= n (0 stays 0).
std::size_t pad_pow2(std::size_t n);

/// Closed form (p/2)*k*(k+1)/2 with p = pad_pow2(n) = 2^k; 0 for n <= 1.
std::size_t schedule_length(std::size_t n);

/// The bitonic sorting network on n = 2^k elements, layer by layer.
/// Throws std::invalid_argument if n is not a power of two.
CompareSwapSchedule schedule(std::size_t n);

struct SortOptions {
  SwapMode mode = SwapMode::Oblivious;
  boundary::PageSimulator* pages = nullptr;
  std::string buffer = "sort_buffer";
};

/// Sorts `buf` ascending under oless by running schedule(pad_pow2(n)).
/// Padding slots are fillers that sort last and are dropped afterwards.
/// With a page simulator attached the buffer is (re)registered under
/// options.buffer and every slot access is logged.
void bitonic_sort_records(codec::RecordBuffer& buf, const SortOptions& options = {});

/// Given `low` and `high`, each sorted with m slots, leaves the m smallest
/// in `low` for Ascending (largest for Descending), both sorted, using a
/// bitonic merge over the 2m records.
void merge_split(codec::RecordBuffer& low, codec::RecordBuffer& high, Direction dir,
                 const SortOptions& options = {});

struct BlockRange {
  std::uint64_t first = 0;
  std::uint64_t count = 0;
};

/// Block-level bitonic sort of [first, first + count). Blocks each hold
/// records_per_block() slots. Each step of schedule(pad_pow2(count)) reads
/// both blocks, merge-splits their records inside the enclave (first-layer
/// steps sort each block beforehand), re-seals and writes both back, so the
/// block access sequence depends on count alone. If count is not a power of
/// two, filler blocks are appended at first + count first. A single block
/// is read, sorted and written back.
void bitonic_sort_blocks(boundary::BlockDevice& device, std::uint64_t first, std::uint64_t count,
                         codec::SlotBlockCodec& codec, const SortOptions& options = {});

/// The unprotected baseline: bottom-up external merge sort whose block reads
/// follow the data. Runs start as single blocks, so each block must already
/// be sorted. Uses scratch blocks appended after the device's current
/// end and returns where the sorted blocks ended up.
BlockRange merge_sort_blocks(boundary::BlockDevice& device, std::uint64_t first, std::uint64_t count,
                             codec::SlotBlockCodec& codec);

}  // namespace sgxmr::oprim
