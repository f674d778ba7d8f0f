#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sgxmr::codec {

enum class Flag : std::uint8_t { Real = 0, Dummy = 1 };

/// Unit of map/reduce processing. A Dummy with an empty key is a filler:
/// it belongs to no group and sorts after every other record.
struct Record {
  std::string key;
  std::string value;
  Flag flag = Flag::Real;
  std::uint64_t seq = 0;

  bool is_dummy() const { return flag == Flag::Dummy; }
  bool is_filler() const { return flag == Flag::Dummy && key.empty(); }

  bool operator==(const Record&) const = default;
};

/// Little-endian integer helpers used by every on-disk structure.
template <typename T>
inline void store_le(std::uint8_t* out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i));
  }
}

template <typename T>
inline T load_le(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return static_cast<T>(v);
}

/// Fixed-width serialization of a Record into a slot:
///
///   flag u8 | seq u64 | key_len u16 | value_len u16 | key[key_max] | value[value_max]
///
/// Unused key and value bytes are zero.
struct RecordLayout {
  static constexpr std::size_t kFlagOffset = 0;
  static constexpr std::size_t kSeqOffset = 1;
  static constexpr std::size_t kKeyLenOffset = 9;
  static constexpr std::size_t kValueLenOffset = 11;
  static constexpr std::size_t kKeyOffset = 13;

  std::uint16_t key_max = 32;
  std::uint16_t value_max = 8;

  std::size_t slot_size() const { return kKeyOffset + key_max + value_max; }
  std::size_t value_offset() const { return kKeyOffset + key_max; }

  /// Throws RecordTooLarge if key or value exceed the layout.
  void encode(const Record& record, std::span<std::uint8_t> slot) const;
  Record decode(std::span<const std::uint8_t> slot) const;
  void encode_filler(std::uint64_t seq, std::span<std::uint8_t> slot) const;

  bool operator==(const RecordLayout&) const = default;
};

/// Contiguous array of equal-width record slots; the in-enclave buffer the
/// sorting network and combiner operate on.
class RecordBuffer {
 public:
  explicit RecordBuffer(RecordLayout layout = {}) : layout_(layout) {}

  const RecordLayout& layout() const { return layout_; }
  std::size_t slot_size() const { return layout_.slot_size(); }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t byte_size() const { return count_ * slot_size(); }

  std::span<std::uint8_t> slot(std::size_t i) {
    return {bytes_.data() + i * slot_size(), slot_size()};
  }
  std::span<const std::uint8_t> slot(std::size_t i) const {
    return {bytes_.data() + i * slot_size(), slot_size()};
  }
  std::span<std::uint8_t> bytes() { return {bytes_.data(), byte_size()}; }
  std::span<const std::uint8_t> bytes() const { return {bytes_.data(), byte_size()}; }

  Record record(std::size_t i) const { return layout_.decode(slot(i)); }
  std::vector<Record> records() const;

  void push_back(const Record& record);
  void push_filler(std::uint64_t seq);
  void push_slot(std::span<const std::uint8_t> slot);
  void append(const RecordBuffer& other, std::size_t first, std::size_t count);
  void resize(std::size_t count);  // new slots are zeroed (fillers with seq 0)
  void clear() { count_ = 0; bytes_.clear(); }
  void reserve(std::size_t count) { bytes_.reserve(count * slot_size()); }

  static RecordBuffer from_records(const RecordLayout& layout, std::span<const Record> records);

 private:
  RecordLayout layout_;
  std::vector<std::uint8_t> bytes_;
  std::size_t count_ = 0;
};

/// Values inside records are arrays of little-endian int64 words.
std::string encode_words(std::span<const std::int64_t> words);
std::vector<std::int64_t> decode_words(std::string_view bytes);

}  // namespace sgxmr::codec
