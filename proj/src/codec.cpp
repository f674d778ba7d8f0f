#include "sgxmr/codec.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "sgxmr/error.hpp"

namespace sgxmr::codec {
namespace {

constexpr std::size_t kVersionOffset = 8;
constexpr std::size_t kBlockSizeOffset = 10;
constexpr std::size_t kModeOffset = 14;
constexpr std::size_t kRecordLenOffset = 15;
constexpr std::size_t kNumBlocksOffset = 19;
constexpr std::size_t kNumRecordsOffset = 27;
constexpr std::size_t kReservedOffset = 35;

std::array<std::uint8_t, 8 + 32> associated_data(std::uint64_t index, const Digest& context) {
  std::array<std::uint8_t, 8 + 32> ad{};
  store_le<std::uint64_t>(ad.data(), index);
  std::copy(context.begin(), context.end(), ad.begin() + 8);
  return ad;
}

std::size_t packed_size(const std::string& record, RecordMode mode) {
  return mode == RecordMode::Fixed ? record.size() : record.size() + 4;
}

}  // namespace

void validate_block_size(std::uint64_t block_size) {
  if (block_size == 0 || block_size % kPageSize != 0 || block_size > (1ull << 31)) {
    throw InvalidBlockSize("block size " + std::to_string(block_size) +
                           " is not a positive multiple of 4096");
  }
}

std::array<std::uint8_t, kHeaderSize> FileHeader::serialize() const {
  std::array<std::uint8_t, kHeaderSize> out{};
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  store_le<std::uint16_t>(out.data() + kVersionOffset, version);
  store_le<std::uint32_t>(out.data() + kBlockSizeOffset, block_size);
  out[kModeOffset] = static_cast<std::uint8_t>(record_mode);
  store_le<std::uint32_t>(out.data() + kRecordLenOffset, record_len);
  store_le<std::uint64_t>(out.data() + kNumBlocksOffset, num_blocks);
  store_le<std::uint64_t>(out.data() + kNumRecordsOffset, num_records);
  return out;
}

FileHeader FileHeader::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw FormatError("file shorter than header");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw FormatError("bad magic");
  FileHeader h;
  h.version = load_le<std::uint16_t>(bytes.data() + kVersionOffset);
  if (h.version != kFormatVersion) throw FormatError("unsupported version");
  h.block_size = load_le<std::uint32_t>(bytes.data() + kBlockSizeOffset);
  try {
    validate_block_size(h.block_size);
  } catch (const InvalidBlockSize& e) {
    throw FormatError(e.what());
  }
  auto mode = bytes[kModeOffset];
  if (mode > 1) throw FormatError("invalid record mode");
  h.record_mode = static_cast<RecordMode>(mode);
  h.record_len = load_le<std::uint32_t>(bytes.data() + kRecordLenOffset);
  if ((h.record_mode == RecordMode::Fixed) != (h.record_len != 0)) {
    throw FormatError("record_len inconsistent with record mode");
  }
  h.num_blocks = load_le<std::uint64_t>(bytes.data() + kNumBlocksOffset);
  h.num_records = load_le<std::uint64_t>(bytes.data() + kNumRecordsOffset);
  if (std::any_of(bytes.begin() + kReservedOffset, bytes.begin() + kHeaderSize,
                  [](std::uint8_t b) { return b != 0; })) {
    throw FormatError("reserved header bytes are not zero");
  }
  return h;
}

Digest FileHeader::digest() const {
  auto bytes = serialize();
  return sha256(bytes);
}

std::vector<std::uint8_t> BlockFile::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + blocks.size() * header.block_size);
  auto h = header.serialize();
  out.insert(out.end(), h.begin(), h.end());
  for (const auto& b : blocks) out.insert(out.end(), b.bytes.begin(), b.bytes.end());
  return out;
}

BlockFile BlockFile::parse(std::span<const std::uint8_t> bytes) {
  BlockFile file;
  file.header = FileHeader::parse(bytes);
  const std::uint64_t bs = file.header.block_size;
  if ((bytes.size() - kHeaderSize) % bs != 0 ||
      (bytes.size() - kHeaderSize) / bs != file.header.num_blocks) {
    throw FormatError("file size does not match header block count");
  }
  file.blocks.reserve(file.header.num_blocks);
  for (std::uint64_t i = 0; i < file.header.num_blocks; ++i) {
    auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + i * bs);
    file.blocks.push_back(Block{i, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(bs))});
  }
  return file;
}

void BlockFile::save(const std::filesystem::path& path) const {
  auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

BlockFile BlockFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

Block seal_block(std::span<const std::uint8_t> plaintext, std::uint64_t index, const Key& key,
                 const Nonce& nonce, const Digest& context) {
  Block block;
  block.index = index;
  block.bytes.resize(plaintext.size() + kBlockOverhead);
  std::copy(nonce.begin(), nonce.end(), block.bytes.begin());
  auto ad = associated_data(index, context);
  auto tag = aes_gcm_encrypt(key, nonce, ad, plaintext,
                             std::span(block.bytes).subspan(kNonceSize, plaintext.size()));
  std::copy(tag.begin(), tag.end(), block.bytes.end() - kTagSize);
  return block;
}

std::vector<std::uint8_t> open_block(const Block& block, std::uint64_t index, const Key& key,
                                     const Digest& context) {
  if (block.bytes.size() < kBlockOverhead) throw AuthenticationError(index);
  std::vector<std::uint8_t> plaintext(block.bytes.size() - kBlockOverhead);
  auto ad = associated_data(index, context);
  if (!aes_gcm_decrypt(key, block.nonce(), ad, block.ciphertext(), block.tag(), plaintext)) {
    throw AuthenticationError(index);
  }
  return plaintext;
}

std::size_t fixed_capacity(std::uint32_t block_size, std::uint32_t record_len) {
  return (block_size - kBlockOverhead - kCountSize) / record_len;
}

std::vector<std::uint8_t> pack_block(std::span<const std::string> records, RecordMode mode,
                                     std::size_t plaintext_size) {
  std::vector<std::uint8_t> out(plaintext_size, 0);
  store_le<std::uint32_t>(out.data(), static_cast<std::uint32_t>(records.size()));
  std::size_t pos = kCountSize;
  for (const auto& r : records) {
    if (pos + packed_size(r, mode) > plaintext_size) throw RecordTooLarge("records overflow block");
    if (mode == RecordMode::Variable) {
      store_le<std::uint32_t>(out.data() + pos, static_cast<std::uint32_t>(r.size()));
      pos += 4;
    }
    std::memcpy(out.data() + pos, r.data(), r.size());
    pos += r.size();
  }
  return out;
}

std::vector<std::string> unpack_block(std::span<const std::uint8_t> plaintext, RecordMode mode,
                                      std::uint32_t record_len) {
  if (plaintext.size() < kCountSize) throw FormatError("block plaintext too short");
  const std::uint64_t count = load_le<std::uint32_t>(plaintext.data());
  std::vector<std::string> out;
  std::size_t pos = kCountSize;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t len = record_len;
    if (mode == RecordMode::Variable) {
      if (pos + 4 > plaintext.size()) throw FormatError("truncated length prefix");
      len = load_le<std::uint32_t>(plaintext.data() + pos);
      pos += 4;
    }
    if (len > plaintext.size() - pos) throw FormatError("record overruns block");
    out.emplace_back(reinterpret_cast<const char*>(plaintext.data() + pos), len);
    pos += len;
  }
  if (std::any_of(plaintext.begin() + static_cast<std::ptrdiff_t>(pos), plaintext.end(),
                  [](std::uint8_t b) { return b != 0; })) {
    throw FormatError("nonzero block padding");
  }
  return out;
}

BlockFile encode_file(std::span<const std::string> records, const EncodeParams& params,
                      const Key& key) {
  validate_block_size(params.block_size);
  FileHeader header;
  header.block_size = params.block_size;
  header.record_mode = params.record_mode;
  header.record_len = params.record_mode == RecordMode::Fixed ? params.record_len : 0;
  const std::size_t capacity = header.payload_capacity();

  if (params.record_mode == RecordMode::Fixed) {
    if (params.record_len == 0) throw FormatError("fixed mode requires record_len > 0");
    if (params.record_len > capacity) {
      throw RecordTooLarge("record_len " + std::to_string(params.record_len) +
                           " exceeds block capacity " + std::to_string(capacity));
    }
  }

  // Greedy first-fit in input order: [begin, end) ranges per block.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t used = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (params.record_mode == RecordMode::Fixed && r.size() != params.record_len) {
      throw FormatError("record " + std::to_string(i) + " is " + std::to_string(r.size()) +
                        " bytes; fixed mode requires " + std::to_string(params.record_len));
    }
    const std::size_t need = packed_size(r, params.record_mode);
    if (need > capacity) {
      throw RecordTooLarge("record " + std::to_string(i) + " needs " + std::to_string(need) +
                           " bytes; block capacity is " + std::to_string(capacity));
    }
    if (ranges.empty() || used + need > capacity) {
      ranges.emplace_back(i, i);
      used = 0;
    }
    ranges.back().second = i + 1;
    used += need;
  }

  header.num_blocks = ranges.size();
  header.num_records = records.size();
  BlockFile file;
  file.header = header;
  const Digest context = header.digest();
  const std::size_t plaintext_size = header.block_size - kBlockOverhead;
  file.blocks.reserve(ranges.size());
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    auto [begin, end] = ranges[b];
    auto plaintext = pack_block(records.subspan(begin, end - begin), params.record_mode, plaintext_size);
    file.blocks.push_back(seal_block(plaintext, b, key, make_nonce(params.nonce_base, b), context));
  }
  return file;
}

BlockFile encode_records(std::span<const Record> records, const RecordLayout& layout,
                         const EncodeParams& params, const Key& key) {
  std::vector<std::string> slots;
  slots.reserve(records.size());
  std::string slot(layout.slot_size(), '\0');
  for (const auto& r : records) {
    layout.encode(r, std::span(reinterpret_cast<std::uint8_t*>(slot.data()), slot.size()));
    slots.push_back(slot);
  }
  EncodeParams fixed = params;
  fixed.record_mode = RecordMode::Fixed;
  fixed.record_len = static_cast<std::uint32_t>(layout.slot_size());
  return encode_file(slots, fixed, key);
}

std::vector<std::string> decode_block(const BlockFile& file, std::size_t position, const Key& key) {
  const auto& block = file.blocks.at(position);
  if (block.bytes.size() != file.header.block_size) {
    throw FormatError("block " + std::to_string(position) + " has wrong size");
  }
  auto plaintext = open_block(block, position, key, file.header.digest());
  return unpack_block(plaintext, file.header.record_mode, file.header.record_len);
}

std::vector<std::string> decode_file(const BlockFile& file, const Key& key) {
  if (file.blocks.size() != file.header.num_blocks) {
    throw FormatError("block count does not match header");
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < file.blocks.size(); ++i) {
    auto records = decode_block(file, i, key);
    std::move(records.begin(), records.end(), std::back_inserter(out));
  }
  if (out.size() != file.header.num_records) {
    throw FormatError("record count does not match header");
  }
  return out;
}

SlotBlockCodec::SlotBlockCodec(RecordLayout layout, std::uint32_t block_size, BlockSealer sealer)
    : layout_(layout), block_size_(block_size), sealer_(std::move(sealer)) {
  validate_block_size(block_size);
  per_block_ = fixed_capacity(block_size, static_cast<std::uint32_t>(layout.slot_size()));
  if (per_block_ == 0) throw RecordTooLarge("record slot does not fit in one block");
}

Block SlotBlockCodec::seal(const RecordBuffer& buffer, std::size_t first, std::uint64_t index) {
  std::vector<std::uint8_t> plaintext(block_size_ - kBlockOverhead, 0);
  store_le<std::uint32_t>(plaintext.data(), static_cast<std::uint32_t>(per_block_));
  auto src = buffer.bytes().subspan(first * layout_.slot_size(), per_block_ * layout_.slot_size());
  std::copy(src.begin(), src.end(), plaintext.begin() + kCountSize);
  return sealer_.seal(plaintext, index);
}

void SlotBlockCodec::open_into(const Block& block, RecordBuffer& out) const {
  auto plaintext = sealer_.open(block);
  const auto count = load_le<std::uint32_t>(plaintext.data());
  if (count != per_block_) {
    throw FormatError("block " + std::to_string(block.index) + " holds " + std::to_string(count) +
                      " slots, expected " + std::to_string(per_block_));
  }
  const std::size_t ss = layout_.slot_size();
  for (std::size_t i = 0; i < per_block_; ++i) {
    out.push_slot(std::span<const std::uint8_t>(plaintext).subspan(kCountSize + i * ss, ss));
  }
}

RecordBuffer SlotBlockCodec::open(const Block& block) const {
  RecordBuffer out(layout_);
  out.reserve(per_block_);
  open_into(block, out);
  return out;
}

FileHeader SlotBlockCodec::header(std::uint64_t num_blocks) const {
  FileHeader h;
  h.block_size = block_size_;
  h.record_mode = RecordMode::Fixed;
  h.record_len = static_cast<std::uint32_t>(layout_.slot_size());
  h.num_blocks = num_blocks;
  h.num_records = num_blocks * per_block_;
  return h;
}

}  // namespace sgxmr::codec
