#include <algorithm>
#include <limits>
#include <stdexcept>

#include "sgxmr/mrcore.hpp"

namespace sgxmr::mrcore {
namespace {

constexpr std::int64_t kMin = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();

using oprim::ct_less_signed;

}  // namespace

std::size_t Aggregator::stored_words(std::size_t input_words) const {
  switch (kind) {
    case AggregatorKind::Count: return 1;
    case AggregatorKind::TopK: return k;
    default: return input_words;
  }
}

std::vector<std::int64_t> Aggregator::lift(std::span<const std::int64_t> emitted,
                                           std::size_t stored) const {
  switch (kind) {
    case AggregatorKind::Count: return {1};
    case AggregatorKind::TopK: {
      std::vector<std::int64_t> out(stored, kMin);
      if (!emitted.empty()) out[0] = emitted[0];
      return out;
    }
    default: return {emitted.begin(), emitted.end()};
  }
}

std::vector<std::int64_t> Aggregator::identity(std::size_t stored) const {
  switch (kind) {
    case AggregatorKind::Max:
    case AggregatorKind::TopK: return std::vector<std::int64_t>(stored, kMin);
    case AggregatorKind::Min: return std::vector<std::int64_t>(stored, kMax);
    default: return std::vector<std::int64_t>(stored, 0);
  }
}

void Aggregator::merge(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                       std::span<std::int64_t> out) const {
  switch (kind) {
    case AggregatorKind::Count:
    case AggregatorKind::Sum:
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::int64_t>(static_cast<std::uint64_t>(a[i]) + static_cast<std::uint64_t>(b[i]));
      }
      return;
    case AggregatorKind::Max:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = oprim::oselect_i64(ct_less_signed(a[i], b[i]), b[i], a[i]);
      return;
    case AggregatorKind::Min:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = oprim::oselect_i64(ct_less_signed(b[i], a[i]), b[i], a[i]);
      return;
    case AggregatorKind::TopK: {
      // Both inputs are descending; odd-even transposition over the 2k
      // concatenation with branch-free exchanges, then keep the first k.
      std::vector<std::int64_t> all(a.begin(), a.end());
      all.insert(all.end(), b.begin(), b.end());
      const std::size_t n = all.size();
      for (std::size_t round = 0; round < n; ++round) {
        for (std::size_t i = round % 2; i + 1 < n; i += 2) {
          const std::uint64_t swap = ct_less_signed(all[i], all[i + 1]);
          const std::int64_t hi = oprim::oselect_i64(swap, all[i + 1], all[i]);
          const std::int64_t lo = oprim::oselect_i64(swap, all[i], all[i + 1]);
          all[i] = hi;
          all[i + 1] = lo;
        }
      }
      std::copy_n(all.begin(), out.size(), out.begin());
      return;
    }
  }
}

std::string Aggregator::name() const {
  switch (kind) {
    case AggregatorKind::Count: return "count";
    case AggregatorKind::Sum: return "sum";
    case AggregatorKind::Max: return "max";
    case AggregatorKind::Min: return "min";
    case AggregatorKind::TopK: return "topk:" + std::to_string(k);
  }
  return "?";
}

Aggregator parse_aggregator(std::string_view text) {
  if (text == "count") return Aggregator::count();
  if (text == "sum") return Aggregator::sum();
  if (text == "max") return Aggregator::max();
  if (text == "min") return Aggregator::min();
  if (text.starts_with("topk:")) {
    const auto k = std::stoul(std::string(text.substr(5)));
    if (k == 0) throw std::invalid_argument("TopK requires k >= 1");
    return Aggregator::top_k(static_cast<std::uint32_t>(k));
  }
  throw std::invalid_argument("unknown aggregator '" + std::string(text) + "'");
}

}  // namespace sgxmr::mrcore
