#pragma once

// Encrypted block file format.
//
// File layout: a 64-byte header followed by num_blocks blocks of exactly
// block_size bytes each. A block is nonce(12) || ciphertext || tag(16); the
// ciphertext decrypts to record_count(u32) followed by the packed records and
// zero padding. Every block is authenticated with the block index and the
// SHA-256 digest of the file header as associated data.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgxmr/crypto.hpp"
#include "sgxmr/record.hpp"

namespace sgxmr::codec {

inline constexpr std::uint32_t kPageSize = 4096;
inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::size_t kBlockOverhead = kNonceSize + kTagSize;  // 28
inline constexpr std::size_t kCountSize = 4;
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::string_view kMagic = "SGXMRBLK";

enum class RecordMode : std::uint8_t { Fixed = 0, Variable = 1 };

struct FileHeader {
  std::uint16_t version = kFormatVersion;
  std::uint32_t block_size = kPageSize;
  RecordMode record_mode = RecordMode::Fixed;
  std::uint32_t record_len = 0;  // 0 in variable mode
  std::uint64_t num_blocks = 0;
  std::uint64_t num_records = 0;

  std::array<std::uint8_t, kHeaderSize> serialize() const;
  static FileHeader parse(std::span<const std::uint8_t> bytes);
  Digest digest() const;

  /// Plaintext bytes available for records in one block.
  std::size_t payload_capacity() const { return block_size - kBlockOverhead - kCountSize; }

  bool operator==(const FileHeader&) const = default;
};

/// Throws InvalidBlockSize unless block_size is a positive multiple of 4096.
void validate_block_size(std::uint64_t block_size);

/// One serialized block as it sits in untrusted storage. `index` is the
/// position the block was read from; it is not part of the serialized bytes.
struct Block {
  std::uint64_t index = 0;
  std::vector<std::uint8_t> bytes;

  std::span<const std::uint8_t> nonce() const { return {bytes.data(), kNonceSize}; }
  std::span<const std::uint8_t> ciphertext() const {
    return {bytes.data() + kNonceSize, bytes.size() - kBlockOverhead};
  }
  std::span<const std::uint8_t> tag() const {
    return {bytes.data() + bytes.size() - kTagSize, kTagSize};
  }
};

struct BlockFile {
  FileHeader header;
  std::vector<Block> blocks;

  std::vector<std::uint8_t> serialize() const;
  static BlockFile parse(std::span<const std::uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static BlockFile load(const std::filesystem::path& path);
};

/// Encrypts `plaintext` (block_size - 28 bytes) into a block bound to
/// `index` and `context`.
Block seal_block(std::span<const std::uint8_t> plaintext, std::uint64_t index, const Key& key,
                 const Nonce& nonce, const Digest& context);

/// Inverse of seal_block. Throws AuthenticationError(index) on tag mismatch.
std::vector<std::uint8_t> open_block(const Block& block, std::uint64_t index, const Key& key,
                                     const Digest& context);

/// Seals blocks for one authentication context, drawing nonces from a
/// (domain, counter) sequence so every seal uses a fresh nonce.
class BlockSealer {
 public:
  BlockSealer(const Key& key, const Digest& context, std::uint32_t nonce_domain,
              std::uint64_t first_counter = 0)
      : key_(key), context_(context), domain_(nonce_domain), counter_(first_counter) {}

  Block seal(std::span<const std::uint8_t> plaintext, std::uint64_t index) {
    return seal_block(plaintext, index, key_, make_nonce(domain_, counter_++), context_);
  }
  std::vector<std::uint8_t> open(const Block& block) const {
    return open_block(block, block.index, key_, context_);
  }

  const Digest& context() const { return context_; }

 private:
  Key key_;
  Digest context_;
  std::uint32_t domain_;
  std::uint64_t counter_;
};

struct EncodeParams {
  std::uint32_t block_size = kPageSize;
  RecordMode record_mode = RecordMode::Fixed;
  std::uint32_t record_len = 64;
  std::uint32_t nonce_base = 0;
};

/// Greedily packs `records` in input order into encrypted blocks. No record
/// spans two blocks; every block except possibly the last is full.
BlockFile encode_file(std::span<const std::string> records, const EncodeParams& params,
                      const Key& key);

/// Serializes `records` into fixed-width slots and encodes them.
BlockFile encode_records(std::span<const Record> records, const RecordLayout& layout,
                         const EncodeParams& params, const Key& key);

/// Verifies every block and returns the stored records in order.
std::vector<std::string> decode_file(const BlockFile& file, const Key& key);

/// Decrypts and unpacks a single block of `file`.
std::vector<std::string> decode_block(const BlockFile& file, std::size_t position, const Key& key);

/// Builds the plaintext of one block: count, records, zero padding.
std::vector<std::uint8_t> pack_block(std::span<const std::string> records, RecordMode mode,
                                     std::size_t plaintext_size);

/// Parses a block plaintext. Throws FormatError on malformed content.
std::vector<std::string> unpack_block(std::span<const std::uint8_t> plaintext, RecordMode mode,
                                      std::uint32_t record_len);

/// Number of fixed-length records one block can hold.
std::size_t fixed_capacity(std::uint32_t block_size, std::uint32_t record_len);

/// Blocks of fixed-width record slots, the format used for every
/// intermediate (spilled) block. Each block holds exactly
/// records_per_block() slots.
class SlotBlockCodec {
 public:
  SlotBlockCodec(RecordLayout layout, std::uint32_t block_size, BlockSealer sealer);

  const RecordLayout& layout() const { return layout_; }
  std::uint32_t block_size() const { return block_size_; }
  std::size_t records_per_block() const { return per_block_; }

  /// Seals slots [first, first + records_per_block()) of `buffer`.
  Block seal(const RecordBuffer& buffer, std::size_t first, std::uint64_t index);
  /// Opens `block` and appends its slots to `out`.
  void open_into(const Block& block, RecordBuffer& out) const;
  RecordBuffer open(const Block& block) const;

  /// Header describing these blocks as a fixed-mode file.
  FileHeader header(std::uint64_t num_blocks) const;

 private:
  RecordLayout layout_;
  std::uint32_t block_size_;
  std::size_t per_block_;
  BlockSealer sealer_;
};

}  // namespace sgxmr::codec
