#include "sgxmr/mrcore.hpp"

#include <algorithm>
#include <exception>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sgxmr/error.hpp"

namespace sgxmr::mrcore {
namespace {

using codec::Record;
using codec::RecordBuffer;
using codec::RecordLayout;

// Output blocks draw nonces from the upper half of the job's counter space.
constexpr std::uint64_t kOutputNonceBase = 1ull << 62;

std::uint64_t ct_eq(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t d = a ^ b;
  std::uint64_t r = 1 ^ ((d | (0 - d)) >> 63);
  oprim::opaque(r);
  return r;
}

std::uint64_t is_filler_slot(std::span<const std::uint8_t> slot) {
  const std::uint64_t dummy = slot[RecordLayout::kFlagOffset] & 1u;
  const std::uint64_t key_len = codec::load_le<std::uint16_t>(slot.data() + RecordLayout::kKeyLenOffset);
  return dummy & ct_eq(key_len, 0);
}

void read_words(std::span<const std::uint8_t> slot, const RecordLayout& layout, std::span<std::int64_t> out) {
  const std::uint8_t* p = slot.data() + layout.value_offset();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::int64_t>(codec::load_le<std::uint64_t>(p + 8 * i));
  }
}

void write_words(std::span<std::uint8_t> slot, const RecordLayout& layout, std::span<const std::int64_t> in) {
  std::uint8_t* p = slot.data() + layout.value_offset();
  for (std::size_t i = 0; i < in.size(); ++i) {
    codec::store_le<std::uint64_t>(p + 8 * i, static_cast<std::uint64_t>(in[i]));
  }
}

// Salt that makes nonces differ between jobs that share a key: a digest of
// the input's header, block tags and the job seed.
Digest job_salt(const codec::BlockFile& input, std::uint64_t seed) {
  std::vector<std::uint8_t> material;
  auto header = input.header.serialize();
  material.insert(material.end(), header.begin(), header.end());
  for (const auto& b : input.blocks) {
    auto tag = b.tag();
    material.insert(material.end(), tag.begin(), tag.end());
  }
  std::uint8_t s[8];
  codec::store_le<std::uint64_t>(s, seed);
  material.insert(material.end(), s, s + 8);
  return sha256(material);
}

Digest intermediate_context(const codec::FileHeader& header, const Digest& salt) {
  std::vector<std::uint8_t> material;
  constexpr std::string_view kLabel = "sgxmr/intermediate";
  material.insert(material.end(), kLabel.begin(), kLabel.end());
  auto h = header.serialize();
  material.insert(material.end(), h.begin(), h.end());
  material.insert(material.end(), salt.begin(), salt.end());
  return sha256(material);
}

class Job {
 public:
  Job(const JobConfig& config, const codec::BlockFile& input, const UserFunctions& udf,
      boundary::BlockDevice& device, trace::Recorder& recorder, const Key& key,
      boundary::PageSimulator* pages)
      : config_(config),
        input_(input),
        udf_(udf),
        device_(device),
        recorder_(recorder),
        key_(key),
        pages_(config.trace_pages ? pages : nullptr),
        layout_(job_layout(config, udf)),
        stored_words_(udf.aggregator.stored_words(udf.value_words)),
        salt_(job_salt(input, config.seed)),
        nonce_domain_(codec::load_le<std::uint32_t>(salt_.data())),
        codec_(layout_, config.block_size,
               codec::BlockSealer(key, intermediate_context(header_for_layout(), salt_), nonce_domain_)),
        buffer_(layout_) {}

  JobResult run() {
    stats_.input_blocks = input_.header.num_blocks;
    device_.load(input_.blocks);
    map_phase();
    const auto sorted = sort_phase();
    auto outputs = reduce_phase(sorted);
    JobResult result;
    result.output = output_phase(outputs);
    result.observations = std::move(observations_);
    result.stats = std::move(stats_);
    return result;
  }

 private:
  codec::FileHeader header_for_layout() const {
    codec::FileHeader h;
    h.block_size = config_.block_size;
    h.record_mode = codec::RecordMode::Fixed;
    h.record_len = static_cast<std::uint32_t>(layout_.slot_size());
    return h;
  }

  oprim::SortOptions sort_options(std::string buffer) const {
    oprim::SortOptions o;
    o.mode = config_.protect_swap ? oprim::SwapMode::Oblivious : oprim::SwapMode::Branching;
    o.pages = pages_;
    o.buffer = std::move(buffer);
    return o;
  }

  void note_enclave_bytes(std::uint64_t bytes) {
    stats_.peak_enclave_bytes = std::max(stats_.peak_enclave_bytes, bytes);
  }

  trace::Phase spill_phase() const { return config_.combiner ? trace::Phase::Combine : trace::Phase::Map; }

  void emit(std::string_view key, std::span<const std::int64_t> value) {
    if (key.empty()) throw UdfError("map emitted an empty key");
    if (key.size() > layout_.key_max) {
      throw UdfError("map emitted a key of " + std::to_string(key.size()) + " bytes; key_max is " +
                     std::to_string(layout_.key_max));
    }
    if (value.size() != udf_.value_words) {
      throw UdfError("map emitted " + std::to_string(value.size()) + " value words; expected " +
                     std::to_string(udf_.value_words));
    }
    const auto lifted = udf_.aggregator.lift(value, stored_words_);
    buffer_.push_back(Record{std::string(key), codec::encode_words(lifted), codec::Flag::Real, next_seq_++});
    if (pages_) {
      const auto& region = pages_->register_buffer("map_buffer", map_buffer_bytes());
      const std::size_t ss = layout_.slot_size();
      boundary::PageTap{pages_, region}.touch_range((buffer_.size() - 1) * ss, ss, trace::Op::Write);
    }
    ++stats_.map_outputs;
    if (buffer_.size() >= config_.map_buffer_records) {
      try {
        flush();
      } catch (...) {
        // Unwinds through user code; map_phase rethrows it unwrapped.
        engine_error_ = std::current_exception();
        throw;
      }
    }
  }

  std::size_t map_buffer_bytes() const {
    // Room for the buffer plus injected dummies, padded for the network.
    return oprim::pad_pow2(2 * static_cast<std::size_t>(config_.map_buffer_records)) * layout_.slot_size();
  }

  void map_phase() {
    recorder_.set_phase(trace::Phase::Map);
    spill_first_ = device_.size();
    const Digest input_context = input_.header.digest();
    const Emit emit_fn = [this](std::string_view k, std::span<const std::int64_t> v) { emit(k, v); };
    std::uint64_t input_seq = 0;
    for (std::uint64_t b = 0; b < input_.header.num_blocks; ++b) {
      recorder_.set_phase(trace::Phase::Map);
      const auto block = device_.read_block(b);
      const auto plaintext = codec::open_block(block, b, key_, input_context);
      const auto payloads = codec::unpack_block(plaintext, input_.header.record_mode, input_.header.record_len);
      note_enclave_bytes(config_.block_size + map_buffer_bytes());
      for (const auto& payload : payloads) {
        Record in{std::string(), payload, codec::Flag::Real, input_seq++};
        ++stats_.input_records;
        try {
          udf_.map(in, emit_fn);
        } catch (const UdfError&) {
          if (engine_error_) std::rethrow_exception(engine_error_);
          throw;
        } catch (...) {
          if (engine_error_) std::rethrow_exception(engine_error_);
          std::throw_with_nested(UdfError("map failed on input record " + std::to_string(in.seq)));
        }
      }
    }
    if (!buffer_.empty()) flush();

    spill_count_ = device_.size() - spill_first_;
    if (config_.protect_sort) {
      // Pad the spill to a power of two so the block network needs no
      // further padding.
      recorder_.set_phase(spill_phase());
      const std::uint64_t padded = oprim::pad_pow2(spill_count_);
      RecordBuffer fillers(layout_);
      for (std::size_t i = 0; i < codec_.records_per_block(); ++i) fillers.push_filler(next_seq_++);
      for (std::uint64_t i = spill_count_; i < padded; ++i) {
        const std::uint64_t index = spill_first_ + i;
        device_.write_block(index, codec_.seal(fillers, 0, index));
      }
      spill_count_ = padded;
    }
    stats_.spill_blocks = spill_count_;
  }

  void flush() {
    const std::uint64_t flush_index = stats_.flushes++;
    recorder_.set_phase(spill_phase());
    oprim::bitonic_sort_records(buffer_, sort_options("map_buffer"));

    std::set<std::string> keys_in_flush;
    if (config_.collect_key_stats) {
      for (const auto& r : buffer_.records()) keys_in_flush.insert(r.key);
      for (const auto& k : keys_in_flush) ++stats_.key_flushes[k];
    }

    if (config_.combiner) {
      auto rng = flush_rng(config_.seed, flush_index);
      stats_.injected_dummies +=
          combine_buffer(buffer_, udf_.aggregator, config_.dummy_rate, rng, next_seq_, sort_options("map_buffer"));
      if (config_.collect_key_stats) {
        for (const auto& r : buffer_.records()) {
          if (r.is_dummy() && !r.is_filler()) ++stats_.key_dummies[r.key];
        }
      }
    }
    note_enclave_bytes(config_.block_size + oprim::pad_pow2(buffer_.size()) * layout_.slot_size());

    const std::size_t m = codec_.records_per_block();
    while (buffer_.size() % m != 0) buffer_.push_filler(next_seq_++);
    for (std::size_t first = 0; first < buffer_.size(); first += m) {
      const std::uint64_t index = device_.size();
      device_.write_block(index, codec_.seal(buffer_, first, index));
    }
    buffer_.clear();
  }

  oprim::BlockRange sort_phase() {
    recorder_.set_phase(trace::Phase::Sort);
    const std::size_t merge_bytes = oprim::pad_pow2(2 * codec_.records_per_block()) * layout_.slot_size();
    note_enclave_bytes(2 * static_cast<std::uint64_t>(config_.block_size) + merge_bytes);
    oprim::BlockRange range{spill_first_, spill_count_};
    if (config_.protect_sort) {
      oprim::bitonic_sort_blocks(device_, spill_first_, spill_count_, codec_, sort_options("block_merge"));
    } else {
      range = oprim::merge_sort_blocks(device_, spill_first_, spill_count_, codec_);
    }
    stats_.sorted_blocks = range.count;
    return range;
  }

  RecordBuffer reduce_phase(const oprim::BlockRange& range) {
    recorder_.set_phase(trace::Phase::Reduce);
    RecordBuffer outputs(layout_);
    const auto& agg = udf_.aggregator;

    bool in_group = false;
    bool group_has_real = false;
    std::string group_key;
    std::vector<std::int64_t> acc(stored_words_);
    std::vector<std::int64_t> value(stored_words_);
    std::uint64_t group_records = 0;
    std::uint64_t pending = 0;  // consumed by dummy-only groups

    auto close_group = [&] {
      if (!in_group) return;
      if (group_has_real) {
        outputs.push_back(Record{group_key, codec::encode_words(acc), codec::Flag::Real, outputs.size()});
        observations_.push_back(ReduceObservation{observations_.size(), group_key, pending + group_records});
        pending = 0;
      } else {
        pending += group_records;
      }
      in_group = false;
    };

    for (std::uint64_t b = range.first; b < range.first + range.count; ++b) {
      const auto slots = codec_.open(device_.read_block(b));
      for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto slot = slots.slot(i);
        if (is_filler_slot(slot)) continue;
        const auto rec = layout_.decode(slot);
        if (!in_group || rec.key != group_key) {
          close_group();
          in_group = true;
          group_has_real = false;
          group_key = rec.key;
          group_records = 0;
          acc = agg.identity(stored_words_);
        }
        read_words(slot, layout_, value);
        agg.merge(acc, value, acc);
        ++group_records;
        group_has_real = group_has_real || !rec.is_dummy();
      }
      note_enclave_bytes(config_.block_size + outputs.byte_size());
    }
    close_group();
    stats_.output_records = outputs.size();
    return outputs;
  }

  codec::BlockFile output_phase(RecordBuffer& outputs) {
    recorder_.set_phase(trace::Phase::Output);
    const std::size_t m = codec_.records_per_block();
    while (outputs.size() % m != 0) outputs.push_filler(next_seq_++);
    const std::uint64_t num_blocks = outputs.size() / m;

    codec::BlockFile file;
    file.header = codec_.header(num_blocks);
    codec::BlockSealer sealer(key_, file.header.digest(), nonce_domain_, kOutputNonceBase);
    std::vector<std::uint8_t> plaintext(config_.block_size - codec::kBlockOverhead);
    const std::size_t ss = layout_.slot_size();
    const std::uint64_t out_first = device_.size();
    for (std::uint64_t i = 0; i < num_blocks; ++i) {
      std::fill(plaintext.begin(), plaintext.end(), std::uint8_t{0});
      codec::store_le<std::uint32_t>(plaintext.data(), static_cast<std::uint32_t>(m));
      auto src = outputs.bytes().subspan(i * m * ss, m * ss);
      std::copy(src.begin(), src.end(), plaintext.begin() + codec::kCountSize);
      auto block = sealer.seal(plaintext, i);
      device_.write_block(out_first + i, block);
      file.blocks.push_back(std::move(block));
    }
    stats_.output_blocks = num_blocks;
    return file;
  }

  const JobConfig& config_;
  const codec::BlockFile& input_;
  const UserFunctions& udf_;
  boundary::BlockDevice& device_;
  trace::Recorder& recorder_;
  Key key_;
  boundary::PageSimulator* pages_;
  RecordLayout layout_;
  std::size_t stored_words_;
  Digest salt_;
  std::uint32_t nonce_domain_;
  codec::SlotBlockCodec codec_;
  RecordBuffer buffer_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t spill_first_ = 0;
  std::uint64_t spill_count_ = 0;
  JobStats stats_;
  std::vector<ReduceObservation> observations_;
  std::exception_ptr engine_error_;
};

}  // namespace

void JobConfig::validate() const {
  codec::validate_block_size(block_size);
  if (!(dummy_rate >= 0.0 && dummy_rate <= 1.0)) throw std::invalid_argument("dummy_rate must be in [0, 1]");
  if (map_buffer_records == 0) throw std::invalid_argument("map_buffer_records must be positive");
  if (key_max == 0) throw std::invalid_argument("key_max must be positive");
}

std::string config_digest(const JobConfig& c, const UserFunctions& udf) {
  std::ostringstream ss;
  ss << "block_size=" << c.block_size << ";protect_sort=" << c.protect_sort
     << ";protect_swap=" << c.protect_swap << ";combiner=" << c.combiner
     << ";map_buffer_records=" << c.map_buffer_records << ";key_max=" << c.key_max
     << ";trace_pages=" << c.trace_pages << ";app=" << udf.name << ";aggregator=" << udf.aggregator.name()
     << ";value_words=" << udf.value_words;
  const auto text = ss.str();
  const auto d = sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return to_hex(std::span(d).first(16));
}

codec::RecordLayout job_layout(const JobConfig& config, const UserFunctions& udf) {
  RecordLayout layout;
  layout.key_max = config.key_max;
  layout.value_max = static_cast<std::uint16_t>(8 * udf.aggregator.stored_words(udf.value_words));
  return layout;
}

JobResult run_job(const JobConfig& config, const codec::BlockFile& input, const UserFunctions& udf,
                  boundary::BlockDevice& device, trace::Recorder& recorder, const Key& key,
                  boundary::PageSimulator* pages) {
  config.validate();
  if (udf.aggregator.kind == AggregatorKind::TopK && udf.aggregator.k == 0) {
    throw std::invalid_argument("TopK requires k >= 1");
  }
  if (!udf.map) throw std::invalid_argument("user functions have no map");
  if (device.size() != 0) throw std::invalid_argument("run_job needs an empty device");
  if (input.blocks.size() != input.header.num_blocks) throw FormatError("input block count does not match header");
  if (input.header.num_blocks > 0 && input.header.block_size != config.block_size) {
    throw InvalidBlockSize("input block size differs from job block size");
  }
  Job job(config, input, udf, device, recorder, key, pages);
  return job.run();
}

std::vector<std::pair<std::string, std::vector<std::int64_t>>> decode_output(
    const codec::BlockFile& output, const Key& key, const codec::RecordLayout& layout) {
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> out;
  for (const auto& payload : codec::decode_file(output, key)) {
    auto slot = std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size());
    auto rec = layout.decode(slot);
    if (rec.is_dummy()) continue;
    out.emplace_back(std::move(rec.key), codec::decode_words(rec.value));
  }
  return out;
}

std::mt19937_64 flush_rng(std::uint64_t seed, std::uint64_t flush_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(flush_index), static_cast<std::uint32_t>(flush_index >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t combine_buffer(RecordBuffer& buffer, const Aggregator& aggregator, double dummy_rate,
                             std::mt19937_64& rng, std::uint64_t& next_seq,
                             const oprim::SortOptions& sort_options) {
  const std::size_t n = buffer.size();
  if (n == 0) return 0;
  const RecordLayout& layout = buffer.layout();
  const std::size_t ss = layout.slot_size();
  const std::size_t words = layout.value_max / 8;

  boundary::PageTap tap;
  if (sort_options.pages) {
    tap.sim = sort_options.pages;
    tap.region = sort_options.pages->register_buffer(sort_options.buffer, n * ss);
  }

  // Merge runs of equal keys into their last slot; every step reads and
  // writes both slots whether or not they matched.
  std::vector<std::int64_t> va(words), vb(words), merged(words), out(words);
  std::vector<std::uint8_t> filler(ss);
  for (std::size_t i = 1; i < n; ++i) {
    auto a = buffer.slot(i - 1);
    auto b = buffer.slot(i);
    tap.touch_range((i - 1) * ss, ss, trace::Op::Read);
    tap.touch_range(i * ss, ss, trace::Op::Read);
    const std::uint64_t eq = oprim::osame_key(a, b, layout);
    read_words(a, layout, va);
    read_words(b, layout, vb);
    aggregator.merge(va, vb, merged);
    for (std::size_t w = 0; w < words; ++w) out[w] = oprim::oselect_i64(eq, merged[w], vb[w]);
    write_words(b, layout, out);
    // Dummy flag is 1: the merged record is real if either input was.
    const auto flag = static_cast<std::uint8_t>(oprim::oselect(eq, a[0] & b[0], b[0]));
    b[RecordLayout::kFlagOffset] = flag;

    layout.encode_filler(codec::load_le<std::uint64_t>(a.data() + RecordLayout::kSeqOffset), filler);
    oprim::ocopy(eq, a, filler);
    tap.touch_range((i - 1) * ss, ss, trace::Op::Write);
    tap.touch_range(i * ss, ss, trace::Op::Write);
  }

  std::uint64_t dummies = 0;
  if (dummy_rate > 0.0) {
    dummies = std::binomial_distribution<std::uint64_t>(n, dummy_rate)(rng);
  }
  std::uint64_t distinct = 0;
  for (std::size_t i = 0; i < n; ++i) distinct += 1 ^ is_filler_slot(buffer.slot(i));
  if (distinct == 0) dummies = 0;
  if (dummies > 0) {
    const auto identity = codec::encode_words(aggregator.identity(words));
    std::vector<std::uint8_t> dummy(ss);
    for (std::uint64_t d = 0; d < dummies; ++d) {
      const std::uint64_t pick = std::uniform_int_distribution<std::uint64_t>(0, distinct - 1)(rng);
      layout.encode(Record{std::string(), identity, codec::Flag::Dummy, next_seq++}, dummy);
      // Scan every slot, obliviously copying the key of the pick-th
      // distinct key into the dummy.
      std::uint64_t rank = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = buffer.slot(i);
        tap.touch_range(i * ss, ss, trace::Op::Read);
        const std::uint64_t live = 1 ^ is_filler_slot(src);
        const std::uint64_t hit = live & ct_eq(rank, pick);
        oprim::ocopy(hit, std::span(dummy).subspan(RecordLayout::kKeyLenOffset, 2),
                     src.subspan(RecordLayout::kKeyLenOffset, 2));
        oprim::ocopy(hit, std::span(dummy).subspan(RecordLayout::kKeyOffset, layout.key_max),
                     src.subspan(RecordLayout::kKeyOffset, layout.key_max));
        rank += live;
      }
      buffer.push_slot(dummy);
    }
  }
  oprim::bitonic_sort_records(buffer, sort_options);
  return dummies;
}

}  // namespace sgxmr::mrcore
