#pragma once

// The simulated enclave boundary. Blocks live in untrusted storage behind a
// BlockDevice, and every transfer across the boundary is logged. Inside the
// enclave, a PageSimulator models the page-fault channel for the buffers
// that sort kernels register.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sgxmr/codec.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr::boundary {

inline constexpr std::size_t kEnclavePageSize = 4096;

/// Untrusted block storage. Implementations never see plaintext.
class BlockDevice {
 public:
  virtual ~BlockDevice() = default;

  virtual codec::Block read_block(std::uint64_t index) = 0;
  /// index may equal size() to append.
  virtual void write_block(std::uint64_t index, const codec::Block& block) = 0;
  virtual std::uint64_t size() const = 0;

  /// Places blocks at [size(), size() + n) without crossing the boundary:
  /// the owner's upload of already-encrypted data. Not traced.
  virtual void load(std::span<const codec::Block> blocks) = 0;

  /// Largest untrusted footprint held so far, in bytes.
  virtual std::uint64_t peak_bytes() const = 0;
};

/// In-memory untrusted store. Every read_block/write_block emits exactly one
/// UntrustedBlock event (in the recorder's current phase) before returning.
class UntrustedStore final : public BlockDevice {
 public:
  UntrustedStore(std::uint32_t block_size, trace::Recorder* recorder);

  codec::Block read_block(std::uint64_t index) override;
  void write_block(std::uint64_t index, const codec::Block& block) override;
  std::uint64_t size() const override { return blocks_.size(); }
  void load(std::span<const codec::Block> blocks) override;
  std::uint64_t peak_bytes() const override { return peak_blocks_ * block_size_; }

  std::uint32_t block_size() const { return block_size_; }

  /// Copies blocks [first, first + count) out as a block file with `header`.
  /// The blocks must have been sealed for that header's digest and for
  /// in-file positions 0..count-1.
  codec::BlockFile export_range(const codec::FileHeader& header, std::uint64_t first,
                                std::uint64_t count) const;
  /// Raw mutable access for tamper experiments.
  std::vector<std::uint8_t>& raw(std::uint64_t index) { return blocks_.at(index); }

 private:
  std::uint32_t block_size_;
  trace::Recorder* recorder_;
  std::vector<std::vector<std::uint8_t>> blocks_;
  std::uint64_t peak_blocks_ = 0;
};

/// A registered enclave buffer: a contiguous run of simulated pages.
struct PageRegion {
  std::uint64_t base_page = 0;
  std::uint64_t num_pages = 0;
  std::size_t byte_size = 0;
};

/// Models the page-fault side channel: touch() logs the 4 KiB page an
/// enclave access lands on. Buffers get disjoint page ranges.
class PageSimulator {
 public:
  explicit PageSimulator(trace::Recorder* recorder) : recorder_(recorder) {}

  /// Registers (or re-registers, growing if needed) a buffer of `bytes`.
  const PageRegion& register_buffer(const std::string& name, std::size_t bytes);
  const PageRegion& region(const std::string& name) const;
  std::uint64_t base_page(const std::string& name) const { return region(name).base_page; }

  /// Throws UnknownBuffer if `name` is not registered.
  void touch(const std::string& name, std::size_t byte_offset, trace::Op op = trace::Op::Read);
  void touch(const PageRegion& region, std::size_t byte_offset, trace::Op op = trace::Op::Read);

 private:
  trace::Recorder* recorder_;
  std::map<std::string, PageRegion> regions_;
  std::uint64_t next_page_ = 0;
};

/// Optional page-level observation of a buffer. A default-constructed tap
/// observes nothing.
struct PageTap {
  PageSimulator* sim = nullptr;
  PageRegion region{};

  explicit operator bool() const { return sim != nullptr; }

  /// Touches every page covered by [offset, offset + len).
  void touch_range(std::size_t offset, std::size_t len, trace::Op op) const {
    if (!sim || len == 0) return;
    const std::size_t first = offset / kEnclavePageSize;
    const std::size_t last = (offset + len - 1) / kEnclavePageSize;
    for (std::size_t p = first; p <= last; ++p) sim->touch(region, p * kEnclavePageSize, op);
  }
};

}  // namespace sgxmr::boundary
