#include "sgxmr/boundary.hpp"

#include <algorithm>

#include "sgxmr/error.hpp"

namespace sgxmr::boundary {

UntrustedStore::UntrustedStore(std::uint32_t block_size, trace::Recorder* recorder)
    : block_size_(block_size), recorder_(recorder) {
  codec::validate_block_size(block_size);
}

codec::Block UntrustedStore::read_block(std::uint64_t index) {
  if (index >= blocks_.size()) {
    throw OutOfRange("read of block " + std::to_string(index) + " in a store of " +
                     std::to_string(blocks_.size()));
  }
  if (recorder_) recorder_->record(trace::Space::UntrustedBlock, trace::Op::Read, index);
  return codec::Block{index, blocks_[index]};
}

void UntrustedStore::write_block(std::uint64_t index, const codec::Block& block) {
  if (index > blocks_.size()) {
    throw OutOfRange("write of block " + std::to_string(index) + " past append position " +
                     std::to_string(blocks_.size()));
  }
  if (block.bytes.size() != block_size_) throw FormatError("block has wrong size for store");
  if (recorder_) recorder_->record(trace::Space::UntrustedBlock, trace::Op::Write, index);
  if (index == blocks_.size()) {
    blocks_.push_back(block.bytes);
    peak_blocks_ = std::max<std::uint64_t>(peak_blocks_, blocks_.size());
  } else {
    blocks_[index] = block.bytes;
  }
}

void UntrustedStore::load(std::span<const codec::Block> blocks) {
  for (const auto& b : blocks) {
    if (b.bytes.size() != block_size_) throw FormatError("block has wrong size for store");
    blocks_.push_back(b.bytes);
  }
  peak_blocks_ = std::max<std::uint64_t>(peak_blocks_, blocks_.size());
}

codec::BlockFile UntrustedStore::export_range(const codec::FileHeader& header, std::uint64_t first,
                                              std::uint64_t count) const {
  if (first + count > blocks_.size()) throw OutOfRange("export range past end of store");
  codec::BlockFile file;
  file.header = header;
  for (std::uint64_t i = 0; i < count; ++i) file.blocks.push_back(codec::Block{i, blocks_[first + i]});
  return file;
}

const PageRegion& PageSimulator::register_buffer(const std::string& name, std::size_t bytes) {
  const std::uint64_t pages = std::max<std::uint64_t>(1, (bytes + kEnclavePageSize - 1) / kEnclavePageSize);
  auto it = regions_.find(name);
  if (it != regions_.end() && it->second.num_pages >= pages) {
    it->second.byte_size = std::max(it->second.byte_size, bytes);
    return it->second;
  }
  // New buffers, and buffers that outgrow their range, take fresh pages.
  PageRegion region{next_page_, pages, bytes};
  next_page_ += pages;
  return regions_[name] = region;
}

const PageRegion& PageSimulator::region(const std::string& name) const {
  auto it = regions_.find(name);
  if (it == regions_.end()) throw UnknownBuffer("buffer '" + name + "' is not registered");
  return it->second;
}

void PageSimulator::touch(const std::string& name, std::size_t byte_offset, trace::Op op) {
  touch(region(name), byte_offset, op);
}

void PageSimulator::touch(const PageRegion& region, std::size_t byte_offset, trace::Op op) {
  if (recorder_) {
    recorder_->record(trace::Space::EnclavePage, op, region.base_page + byte_offset / kEnclavePageSize);
  }
}

}  // namespace sgxmr::boundary
