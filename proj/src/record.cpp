#include "sgxmr/record.hpp"

#include <algorithm>

#include "sgxmr/error.hpp"

namespace sgxmr::codec {

void RecordLayout::encode(const Record& record, std::span<std::uint8_t> slot) const {
  if (record.key.size() > key_max) {
    throw RecordTooLarge("key of " + std::to_string(record.key.size()) +
                         " bytes exceeds key_max " + std::to_string(key_max));
  }
  if (record.value.size() > value_max) {
    throw RecordTooLarge("value of " + std::to_string(record.value.size()) +
                         " bytes exceeds value_max " + std::to_string(value_max));
  }
  std::fill(slot.begin(), slot.end(), std::uint8_t{0});
  slot[kFlagOffset] = static_cast<std::uint8_t>(record.flag);
  store_le<std::uint64_t>(slot.data() + kSeqOffset, record.seq);
  store_le<std::uint16_t>(slot.data() + kKeyLenOffset, static_cast<std::uint16_t>(record.key.size()));
  store_le<std::uint16_t>(slot.data() + kValueLenOffset,
                          static_cast<std::uint16_t>(record.value.size()));
  std::memcpy(slot.data() + kKeyOffset, record.key.data(), record.key.size());
  std::memcpy(slot.data() + value_offset(), record.value.data(), record.value.size());
}

Record RecordLayout::decode(std::span<const std::uint8_t> slot) const {
  if (slot.size() != slot_size()) throw FormatError("slot size does not match layout");
  Record r;
  std::uint8_t flag = slot[kFlagOffset];
  if (flag > 1) throw FormatError("invalid record flag");
  r.flag = static_cast<Flag>(flag);
  r.seq = load_le<std::uint64_t>(slot.data() + kSeqOffset);
  auto key_len = load_le<std::uint16_t>(slot.data() + kKeyLenOffset);
  auto value_len = load_le<std::uint16_t>(slot.data() + kValueLenOffset);
  if (key_len > key_max || value_len > value_max) throw FormatError("record lengths exceed layout");
  r.key.assign(reinterpret_cast<const char*>(slot.data() + kKeyOffset), key_len);
  r.value.assign(reinterpret_cast<const char*>(slot.data() + value_offset()), value_len);
  return r;
}

void RecordLayout::encode_filler(std::uint64_t seq, std::span<std::uint8_t> slot) const {
  std::fill(slot.begin(), slot.end(), std::uint8_t{0});
  slot[kFlagOffset] = static_cast<std::uint8_t>(Flag::Dummy);
  store_le<std::uint64_t>(slot.data() + kSeqOffset, seq);
}

std::vector<Record> RecordBuffer::records() const {
  std::vector<Record> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < count_; ++i) out.push_back(record(i));
  return out;
}

void RecordBuffer::push_back(const Record& record) {
  resize(count_ + 1);
  layout_.encode(record, slot(count_ - 1));
}

void RecordBuffer::push_filler(std::uint64_t seq) {
  resize(count_ + 1);
  layout_.encode_filler(seq, slot(count_ - 1));
}

void RecordBuffer::push_slot(std::span<const std::uint8_t> src) {
  if (src.size() != slot_size()) throw FormatError("slot size does not match layout");
  bytes_.insert(bytes_.end(), src.begin(), src.end());
  ++count_;
}

void RecordBuffer::append(const RecordBuffer& other, std::size_t first, std::size_t count) {
  auto src = other.bytes().subspan(first * slot_size(), count * slot_size());
  bytes_.insert(bytes_.end(), src.begin(), src.end());
  count_ += count;
}

void RecordBuffer::resize(std::size_t count) {
  bytes_.resize(count * slot_size(), 0);
  count_ = count;
}

RecordBuffer RecordBuffer::from_records(const RecordLayout& layout,
                                        std::span<const Record> records) {
  RecordBuffer buf(layout);
  buf.reserve(records.size());
  for (const auto& r : records) buf.push_back(r);
  return buf;
}

std::string encode_words(std::span<const std::int64_t> words) {
  std::string out(words.size() * 8, '\0');
  for (std::size_t i = 0; i < words.size(); ++i) {
    store_le<std::uint64_t>(reinterpret_cast<std::uint8_t*>(out.data()) + 8 * i,
                            static_cast<std::uint64_t>(words[i]));
  }
  return out;
}

std::vector<std::int64_t> decode_words(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw FormatError("value is not a whole number of words");
  std::vector<std::int64_t> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::int64_t>(
        load_le<std::uint64_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()) + 8 * i));
  }
  return out;
}

}  // namespace sgxmr::codec
