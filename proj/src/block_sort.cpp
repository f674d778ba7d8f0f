#include <limits>

#include "sgxmr/error.hpp"
#include "sgxmr/oprim.hpp"

namespace sgxmr::oprim {
namespace {

constexpr std::uint64_t kPadSeq = std::numeric_limits<std::uint64_t>::max();

codec::RecordBuffer filler_slots(const codec::RecordLayout& layout, std::size_t count) {
  codec::RecordBuffer buf(layout);
  buf.reserve(count);
  for (std::size_t i = 0; i < count; ++i) buf.push_filler(kPadSeq);
  return buf;
}

// One input run of the external merge: the block currently held in the
// enclave plus the position of the next unread block.
struct RunCursor {
  std::uint64_t next_block;
  std::uint64_t end_block;
  codec::RecordBuffer current;
  std::size_t pos = 0;

  bool exhausted() const { return pos == current.size() && next_block == end_block; }
};

void advance(RunCursor& run, boundary::BlockDevice& device, codec::SlotBlockCodec& codec) {
  ++run.pos;
  if (run.pos == run.current.size() && run.next_block < run.end_block) {
    run.current = codec.open(device.read_block(run.next_block++));
    run.pos = 0;
  }
}

void merge_runs(boundary::BlockDevice& device, codec::SlotBlockCodec& codec, std::uint64_t a_first,
                std::uint64_t a_count, std::uint64_t b_first, std::uint64_t b_count,
                std::uint64_t out_first) {
  const std::size_t m = codec.records_per_block();
  RunCursor a{a_first + 1, a_first + a_count, codec.open(device.read_block(a_first))};
  RunCursor b{b_first + 1, b_first + b_count, codec.open(device.read_block(b_first))};
  codec::RecordBuffer out(codec.layout());
  out.reserve(m);
  std::uint64_t out_index = out_first;
  const auto& layout = codec.layout();
  while (!a.exhausted() || !b.exhausted()) {
    // Branches on record order: this is the leak being demonstrated.
    bool take_b = a.exhausted() ||
                  (!b.exhausted() && oless(b.current.slot(b.pos), a.current.slot(a.pos), layout));
    RunCursor& src = take_b ? b : a;
    out.push_slot(src.current.slot(src.pos));
    advance(src, device, codec);
    if (out.size() == m) {
      device.write_block(out_index, codec.seal(out, 0, out_index));
      ++out_index;
      out.clear();
    }
  }
}

}  // namespace

void bitonic_sort_blocks(boundary::BlockDevice& device, std::uint64_t first, std::uint64_t count,
                         codec::SlotBlockCodec& codec, const SortOptions& options) {
  if (count == 0) return;
  SortOptions block_options = options;
  block_options.buffer = options.buffer + ".block";
  if (count == 1) {
    auto only = codec.open(device.read_block(first));
    bitonic_sort_records(only, block_options);
    device.write_block(first, codec.seal(only, 0, first));
    return;
  }
  const std::size_t m = codec.records_per_block();
  const std::uint64_t padded = pad_pow2(count);
  if (padded > count) {
    const auto fillers = filler_slots(codec.layout(), m);
    for (std::uint64_t i = count; i < padded; ++i) {
      device.write_block(first + i, codec.seal(fillers, 0, first + i));
    }
  }

  SortOptions merge_options = options;
  merge_options.buffer = options.buffer + ".merge";
  const auto steps = schedule(padded).steps;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const auto& step = steps[s];
    const std::uint64_t lo_index = first + step.i;
    const std::uint64_t hi_index = first + step.j;
    auto lo = codec.open(device.read_block(lo_index));
    auto hi = codec.open(device.read_block(hi_index));
    // The first layer touches every block once; sorting each block there
    // lets the merges that follow assume sorted halves.
    if (s < padded / 2) {
      bitonic_sort_records(lo, block_options);
      bitonic_sort_records(hi, block_options);
    }
    merge_split(lo, hi, step.dir, merge_options);
    device.write_block(lo_index, codec.seal(lo, 0, lo_index));
    device.write_block(hi_index, codec.seal(hi, 0, hi_index));
  }
}

BlockRange merge_sort_blocks(boundary::BlockDevice& device, std::uint64_t first, std::uint64_t count,
                             codec::SlotBlockCodec& codec) {
  if (count <= 1) return {first, count};
  std::uint64_t src = first;
  std::uint64_t dst = std::max(device.size(), first + count);
  if (dst > device.size()) throw OutOfRange("merge sort scratch must start at the end of the device");
  for (std::uint64_t width = 1; width < count; width *= 2) {
    for (std::uint64_t lo = 0; lo < count; lo += 2 * width) {
      const std::uint64_t mid = std::min(lo + width, count);
      const std::uint64_t hi = std::min(lo + 2 * width, count);
      if (mid == hi) {
        // Unpaired tail run: copy through.
        for (std::uint64_t i = lo; i < hi; ++i) {
          auto block = codec.open(device.read_block(src + i));
          device.write_block(dst + i, codec.seal(block, 0, dst + i));
        }
        continue;
      }
      merge_runs(device, codec, src + lo, mid - lo, src + mid, hi - mid, dst + lo);
    }
    std::swap(src, dst);
  }
  return {src, count};
}

}  // namespace sgxmr::oprim
