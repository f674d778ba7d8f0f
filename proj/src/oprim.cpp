#include "sgxmr/oprim.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>

namespace sgxmr::oprim {
namespace {

using codec::RecordLayout;

inline std::uint64_t ct_lt(std::uint64_t x, std::uint64_t y) noexcept { return ct_less(x, y); }
inline std::uint64_t ct_gt(std::uint64_t x, std::uint64_t y) noexcept { return ct_less(y, x); }

inline std::uint64_t ct_is_zero(std::uint64_t x) noexcept {
  std::uint64_t r = 1 ^ ((x | (0 - x)) >> 63);
  opaque(r);
  return r;
}

inline std::uint64_t load_word(const std::uint8_t* p) noexcept {
  std::uint64_t w;
  std::memcpy(&w, p, 8);
  return w;
}

inline void store_word(std::uint8_t* p, std::uint64_t w) noexcept { std::memcpy(p, &w, 8); }

// Big-endian load of up to 8 bytes, zero-extended on the right, so that
// unsigned comparison of words matches lexicographic byte order.
inline std::uint64_t load_be(const std::uint8_t* p, std::size_t len) noexcept {
  std::uint64_t w = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    std::uint64_t byte = i < len ? p[i] : 0;
    w |= byte << (56 - 8 * i);
  }
  return w;
}

inline std::uint64_t filler_bit(const std::uint8_t* slot) noexcept {
  std::uint64_t dummy = slot[RecordLayout::kFlagOffset] & 1u;
  std::uint64_t key_len = codec::load_le<std::uint16_t>(slot + RecordLayout::kKeyLenOffset);
  return dummy & ct_is_zero(key_len);
}

// Calls fn(i, j, dir) for every compare-swap of the bitonic network on n
// elements, layer by layer and in increasing i within a layer.
template <typename Fn>
void for_each_step(std::size_t n, Fn&& fn) {
  for (std::size_t size = 2; size <= n; size <<= 1) {
    for (std::size_t stride = size >> 1; stride > 0; stride >>= 1) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = i ^ stride;
        if (l > i) fn(i, l, (i & size) == 0 ? Direction::Ascending : Direction::Descending);
      }
    }
  }
}

boundary::PageTap make_tap(const SortOptions& options, std::size_t bytes) {
  boundary::PageTap tap;
  if (options.pages) {
    tap.sim = options.pages;
    tap.region = options.pages->register_buffer(options.buffer, bytes);
  }
  return tap;
}

constexpr std::uint64_t kPadSeq = std::numeric_limits<std::uint64_t>::max();

}  // namespace

void oswap(std::uint64_t cond, std::span<std::uint8_t> a, std::span<std::uint8_t> b) noexcept {
  std::uint64_t mask = 0 - cond;
  opaque(mask);
  const std::size_t n = std::min(a.size(), b.size());
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    std::uint64_t x = load_word(a.data() + i);
    std::uint64_t y = load_word(b.data() + i);
    std::uint64_t t = (x ^ y) & mask;
    store_word(a.data() + i, x ^ t);
    store_word(b.data() + i, y ^ t);
  }
  const auto bmask = static_cast<std::uint8_t>(mask);
  for (; i < n; ++i) {
    std::uint8_t t = static_cast<std::uint8_t>((a[i] ^ b[i]) & bmask);
    a[i] = static_cast<std::uint8_t>(a[i] ^ t);
    b[i] = static_cast<std::uint8_t>(b[i] ^ t);
  }
}

void ocopy(std::uint64_t cond, std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) noexcept {
  std::uint64_t mask = 0 - cond;
  opaque(mask);
  const std::size_t n = std::min(dst.size(), src.size());
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    std::uint64_t x = load_word(dst.data() + i);
    std::uint64_t y = load_word(src.data() + i);
    store_word(dst.data() + i, (y & mask) | (x & ~mask));
  }
  const auto bmask = static_cast<std::uint8_t>(mask);
  for (; i < n; ++i) dst[i] = static_cast<std::uint8_t>((src[i] & bmask) | (dst[i] & ~bmask));
}

std::uint64_t oless(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                    const RecordLayout& layout) noexcept {
  std::uint64_t lt = 0;
  std::uint64_t gt = 0;
  auto step = [&](std::uint64_t x, std::uint64_t y) {
    const std::uint64_t undecided = 1 ^ (lt | gt);
    lt |= undecided & ct_lt(x, y);
    gt |= undecided & ct_gt(x, y);
  };
  step(filler_bit(a.data()), filler_bit(b.data()));
  const std::uint8_t* ka = a.data() + RecordLayout::kKeyOffset;
  const std::uint8_t* kb = b.data() + RecordLayout::kKeyOffset;
  for (std::size_t off = 0; off < layout.key_max; off += 8) {
    const std::size_t len = std::min<std::size_t>(8, layout.key_max - off);
    step(load_be(ka + off, len), load_be(kb + off, len));
  }
  step(codec::load_le<std::uint16_t>(a.data() + RecordLayout::kKeyLenOffset),
       codec::load_le<std::uint16_t>(b.data() + RecordLayout::kKeyLenOffset));
  step(codec::load_le<std::uint64_t>(a.data() + RecordLayout::kSeqOffset),
       codec::load_le<std::uint64_t>(b.data() + RecordLayout::kSeqOffset));
  return lt;
}

std::uint64_t osame_key(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                        const RecordLayout& layout) noexcept {
  std::uint64_t differ = 0;
  const std::uint8_t* ka = a.data() + RecordLayout::kKeyOffset;
  const std::uint8_t* kb = b.data() + RecordLayout::kKeyOffset;
  for (std::size_t off = 0; off < layout.key_max; off += 8) {
    const std::size_t len = std::min<std::size_t>(8, layout.key_max - off);
    differ |= load_be(ka + off, len) ^ load_be(kb + off, len);
  }
  differ |= static_cast<std::uint64_t>(codec::load_le<std::uint16_t>(a.data() + RecordLayout::kKeyLenOffset) ^
                                       codec::load_le<std::uint16_t>(b.data() + RecordLayout::kKeyLenOffset));
  return ct_is_zero(differ) & (1 ^ filler_bit(a.data())) & (1 ^ filler_bit(b.data()));
}

bool sort_key_less(const codec::Record& a, const codec::Record& b) {
  if (a.is_filler() != b.is_filler()) return b.is_filler();
  if (a.key != b.key) return a.key < b.key;
  return a.seq < b.seq;
}

std::pair<codec::Record, codec::Record> ocompare_swap(const codec::Record& a, const codec::Record& b,
                                                      Direction dir) {
  RecordLayout layout;
  layout.key_max = static_cast<std::uint16_t>(std::max(a.key.size(), b.key.size()));
  layout.value_max = static_cast<std::uint16_t>(std::max(a.value.size(), b.value.size()));
  codec::RecordBuffer buf(layout);
  buf.push_back(a);
  buf.push_back(b);
  compare_swap_slots(buf, 0, 1, dir, SwapMode::Oblivious, {});
  return {buf.record(0), buf.record(1)};
}

void compare_swap_slots(codec::RecordBuffer& buf, std::size_t i, std::size_t j, Direction dir,
                        SwapMode mode, const boundary::PageTap& tap) {
  const std::size_t ss = buf.slot_size();
  auto a = buf.slot(i);
  auto b = buf.slot(j);
  tap.touch_range(i * ss, ss, trace::Op::Read);
  tap.touch_range(j * ss, ss, trace::Op::Read);
  const std::uint64_t b_first = oless(b, a, buf.layout());
  const std::uint64_t a_first = oless(a, b, buf.layout());
  const std::uint64_t swap = oselect(dir == Direction::Ascending ? 1 : 0, b_first, a_first);
  if (mode == SwapMode::Oblivious) {
    oswap(swap, a, b);
    tap.touch_range(i * ss, ss, trace::Op::Write);
    tap.touch_range(j * ss, ss, trace::Op::Write);
  } else if (swap) {
    std::swap_ranges(a.begin(), a.end(), b.begin());
    tap.touch_range(i * ss, ss, trace::Op::Write);
    tap.touch_range(j * ss, ss, trace::Op::Write);
  }
}

std::size_t pad_pow2(std::size_t n) { return n <= 1 ? n : std::bit_ceil(n); }

std::size_t schedule_length(std::size_t n) {
  if (n <= 1) return 0;
  const std::size_t padded = pad_pow2(n);
  const std::size_t k = static_cast<std::size_t>(std::countr_zero(padded));
  return (padded / 2) * k * (k + 1) / 2;
}

CompareSwapSchedule schedule(std::size_t n) {
  if (n == 0 || !std::has_single_bit(n)) {
    throw std::invalid_argument("bitonic schedule needs a power-of-two size, got " + std::to_string(n));
  }
  CompareSwapSchedule s;
  s.n = n;
  s.steps.reserve(schedule_length(n));
  for_each_step(n, [&](std::size_t i, std::size_t j, Direction dir) {
    s.steps.push_back(CompareSwap{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), dir});
  });
  return s;
}

void bitonic_sort_records(codec::RecordBuffer& buf, const SortOptions& options) {
  const std::size_t n = buf.size();
  if (n <= 1) return;
  const std::size_t padded = pad_pow2(n);
  for (std::size_t i = n; i < padded; ++i) buf.push_filler(kPadSeq);
  const auto tap = make_tap(options, padded * buf.slot_size());
  for_each_step(padded, [&](std::size_t i, std::size_t j, Direction dir) {
    compare_swap_slots(buf, i, j, dir, options.mode, tap);
  });
  buf.resize(n);
}

void merge_split(codec::RecordBuffer& low, codec::RecordBuffer& high, Direction dir,
                 const SortOptions& options) {
  const std::size_t m = low.size();
  if (high.size() != m) throw std::invalid_argument("merge_split needs equal halves");
  if (m == 0) return;
  const std::size_t padded = pad_pow2(2 * m);

  // low ascending, then max-valued padding, then high reversed: a bitonic
  // sequence that one merge cascade sorts.
  codec::RecordBuffer work(low.layout());
  work.reserve(padded);
  work.append(low, 0, m);
  for (std::size_t i = 2 * m; i < padded; ++i) work.push_filler(kPadSeq);
  for (std::size_t i = m; i-- > 0;) work.push_slot(high.slot(i));

  const auto tap = make_tap(options, padded * work.slot_size());
  for (std::size_t stride = padded >> 1; stride > 0; stride >>= 1) {
    for (std::size_t i = 0; i < padded; ++i) {
      const std::size_t l = i ^ stride;
      if (l > i) compare_swap_slots(work, i, l, Direction::Ascending, options.mode, tap);
    }
  }

  const std::size_t small = dir == Direction::Ascending ? 0 : m;
  const std::size_t large = dir == Direction::Ascending ? m : 0;
  low.clear();
  low.append(work, small, m);
  high.clear();
  high.append(work, large, m);
}

}  // namespace sgxmr::oprim
