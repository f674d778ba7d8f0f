#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <limits>
#include <optional>
#include <map>
#include <set>
#include <tuple>

#include "sgxmr/boundary.hpp"
#include "sgxmr/oprim.hpp"
#include "support.hpp"

using namespace sgxmr;
using namespace sgxmr::oprim;
using codec::Flag;
using codec::Record;
using codec::RecordBuffer;
using codec::RecordLayout;

namespace {

using Layer = std::set<std::tuple<std::size_t, std::size_t, Direction>>;

// Textbook recursive bitonic sorter. Each comparator is filed under the
// layer it belongs to: (log2 of the sorted run size, distance from the top
// of that run's merge).
void rec_merge(std::size_t lo, std::size_t n, Direction dir, std::size_t run_log, std::size_t depth,
               std::map<std::pair<std::size_t, std::size_t>, Layer>& layers) {
  if (n < 2) return;
  const std::size_t half = n / 2;
  for (std::size_t i = lo; i < lo + half; ++i) layers[{run_log, depth}].insert({i, i + half, dir});
  rec_merge(lo, half, dir, run_log, depth + 1, layers);
  rec_merge(lo + half, half, dir, run_log, depth + 1, layers);
}

void rec_sort(std::size_t lo, std::size_t n, Direction dir,
              std::map<std::pair<std::size_t, std::size_t>, Layer>& layers) {
  if (n < 2) return;
  rec_sort(lo, n / 2, Direction::Ascending, layers);
  rec_sort(lo + n / 2, n / 2, Direction::Descending, layers);
  rec_merge(lo, n, dir, static_cast<std::size_t>(std::countr_zero(n)), 0, layers);
}

std::vector<Layer> recursive_layers(std::size_t n) {
  std::map<std::pair<std::size_t, std::size_t>, Layer> layers;
  rec_sort(0, n, Direction::Ascending, layers);
  std::vector<Layer> out;
  for (auto& [k, v] : layers) out.push_back(v);
  return out;
}

std::vector<Layer> schedule_layers(std::size_t n) {
  const auto s = schedule(n);
  std::vector<Layer> out;
  for (std::size_t i = 0; i < s.steps.size(); i += n / 2) {
    Layer layer;
    for (std::size_t j = i; j < i + n / 2; ++j) layer.insert({s.steps[j].i, s.steps[j].j, s.steps[j].dir});
    out.push_back(layer);
  }
  return out;
}

// Flat reference order: fillers last, then key bytes, then seq.
bool oracle_less(const Record& a, const Record& b) {
  if (a.is_filler() != b.is_filler()) return b.is_filler();
  if (a.key != b.key) return a.key < b.key;
  return a.seq < b.seq;
}

RecordLayout small_layout() {
  RecordLayout l;
  l.key_max = 4;
  l.value_max = 8;
  return l;
}

Record keyed(const std::string& key, std::uint64_t seq, Flag flag = Flag::Real) {
  const std::int64_t v = static_cast<std::int64_t>(seq);
  return Record{key, codec::encode_words(std::span(&v, 1)), flag, seq};
}

trace::Trace page_trace(const std::vector<Record>& records, SwapMode mode) {
  trace::Recorder rec;
  boundary::PageSimulator sim(&rec);
  auto buf = RecordBuffer::from_records(RecordLayout{}, records);
  SortOptions opts;
  opts.mode = mode;
  opts.pages = &sim;
  bitonic_sort_records(buf, opts);
  return rec.events();
}

}  // namespace

TEST_CASE("oselect and comparisons") {
  CHECK(oselect(1, 10, 20) == 10);
  CHECK(oselect(0, 10, 20) == 20);
  std::mt19937_64 rng(1);
  const std::uint64_t edge[] = {0, 1, 2, (1ull << 63) - 1, 1ull << 63, (1ull << 63) + 1, ~0ull - 1, ~0ull};
  std::vector<std::uint64_t> values(std::begin(edge), std::end(edge));
  for (int i = 0; i < 2000; ++i) values.push_back(rng());
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values.size(); j += 1 + (i % 97)) {
      const std::uint64_t x = values[i], y = values[j];
      CHECK(ct_less(x, y) == (x < y ? 1u : 0u));
      const auto sx = static_cast<std::int64_t>(x), sy = static_cast<std::int64_t>(y);
      CHECK(ct_less_signed(sx, sy) == (sx < sy ? 1u : 0u));
    }
  }
}

TEST_CASE("oswap and ocopy act only when asked, on any length") {
  std::vector<std::uint8_t> a{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, b(11, 0xee);
  const auto a0 = a, b0 = b;
  oswap(0, a, b);
  CHECK(a == a0);
  CHECK(b == b0);
  oswap(1, a, b);
  CHECK(a == b0);
  CHECK(b == a0);
  ocopy(0, a, b);
  CHECK(a == b0);
  ocopy(1, a, b);
  CHECK(a == a0);
}

TEST_CASE("oless agrees with the reference order on random slots") {
  std::mt19937_64 rng(2);
  const auto layout = small_layout();
  for (int trial = 0; trial < 10000; ++trial) {
    auto make = [&] {
      Record r = keyed(testing::random_string(rng, 0, 4, "ab\x01\xff"), rng() % 4);
      const int kind = static_cast<int>(rng() % 4);
      if (kind == 0) r.key.clear();  // filler
      if (kind <= 1) r.flag = Flag::Dummy;
      if (r.key.empty() && r.flag == Flag::Real) r.key = "a";
      return r;
    };
    const Record a = make(), b = make();
    std::vector<std::uint8_t> sa(layout.slot_size()), sb(layout.slot_size());
    layout.encode(a, sa);
    layout.encode(b, sb);
    const bool strictly = oracle_less(a, b);
    CHECK(oless(sa, sb, layout) == (strictly ? 1u : 0u));
    CHECK(sort_key_less(a, b) == strictly);
  }
}

TEST_CASE("schedule(4) is the classic six-step network") {
  const auto s = schedule(4);
  const std::vector<CompareSwap> expect{
      {0, 1, Direction::Ascending}, {2, 3, Direction::Descending}, {0, 2, Direction::Ascending},
      {1, 3, Direction::Ascending}, {0, 1, Direction::Ascending},  {2, 3, Direction::Ascending}};
  CHECK(s.steps == expect);
  CHECK(schedule(1).steps.empty());
  CHECK(schedule(8).steps.size() == 24);
  CHECK_THROWS_AS(schedule(6), std::invalid_argument);
  CHECK_THROWS_AS(schedule(0), std::invalid_argument);
}

TEST_CASE("schedule matches the recursive construction layer by layer") {
  for (std::size_t n = 2; n <= 256; n *= 2) {
    CAPTURE(n);
    CHECK(schedule_layers(n) == recursive_layers(n));
  }
}

TEST_CASE("schedule length follows the closed form and steps are ordered") {
  for (std::size_t k = 0; k <= 12; ++k) {
    const std::size_t n = std::size_t{1} << k;
    const auto s = schedule(n);
    CHECK(s.steps.size() == (n / 2) * k * (k + 1) / 2);
    CHECK(schedule_length(n) == s.steps.size());
    for (const auto& st : s.steps) CHECK(st.i < st.j);
  }
  CHECK(schedule_length(5) == schedule_length(8));
  CHECK(schedule(16).steps == schedule(16).steps);
}

TEST_CASE("the network sorts every 0-1 input of size 16") {
  const auto s = schedule(16);
  for (std::uint32_t mask = 0; mask < (1u << 16); ++mask) {
    int v[16];
    for (int i = 0; i < 16; ++i) v[i] = (mask >> i) & 1;
    for (const auto& st : s.steps) {
      const bool out_of_order = st.dir == Direction::Ascending ? v[st.i] > v[st.j] : v[st.i] < v[st.j];
      if (out_of_order) std::swap(v[st.i], v[st.j]);
    }
    bool sorted = true;
    for (int i = 1; i < 16; ++i) sorted = sorted && v[i - 1] <= v[i];
    if (!sorted) FAIL("unsorted output for mask " << mask);
  }
}

TEST_CASE("ocompare_swap") {
  const Record a = keyed("a", 1), b = keyed("b", 2);
  auto [x, y] = ocompare_swap(a, b, Direction::Ascending);
  CHECK(x == a);
  CHECK(y == b);
  std::tie(x, y) = ocompare_swap(a, b, Direction::Descending);
  CHECK(x == b);
  CHECK(y == a);
  const Record same_late = keyed("k", 9), same_early = keyed("k", 3);
  std::tie(x, y) = ocompare_swap(same_late, same_early, Direction::Ascending);
  CHECK(x.seq == 3);
  CHECK(y.seq == 9);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const Record p = keyed(testing::random_string(rng, 1, 3, "abc"), rng() % 1000);
    const Record q = keyed(testing::random_string(rng, 1, 5, "abc"), rng() % 1000);
    const auto dir = rng() % 2 ? Direction::Ascending : Direction::Descending;
    auto [lo, hi] = ocompare_swap(p, q, dir);
    std::multiset<std::pair<std::string, std::uint64_t>> in{{p.key, p.seq}, {q.key, q.seq}};
    std::multiset<std::pair<std::string, std::uint64_t>> out{{lo.key, lo.seq}, {hi.key, hi.seq}};
    CHECK(in == out);
    const auto first = dir == Direction::Ascending ? lo : hi;
    const auto second = dir == Direction::Ascending ? hi : lo;
    CHECK_FALSE(sort_key_less(second, first));
  }
}

TEST_CASE("oblivious compare-swap writes both slots even when ordered") {
  trace::Recorder rec;
  boundary::PageSimulator sim(&rec);
  RecordLayout layout;
  layout.key_max = 4075;  // slot is exactly one page
  layout.value_max = 8;
  auto buf = RecordBuffer::from_records(layout, std::vector<Record>{keyed("a", 0), keyed("b", 1)});
  boundary::PageTap tap{&sim, sim.register_buffer("buf", 2 * layout.slot_size())};
  compare_swap_slots(buf, 0, 1, Direction::Ascending, SwapMode::Oblivious, tap);
  CHECK(rec.size() == 4);
  CHECK(buf.record(0).key == "a");
  rec.clear();
  compare_swap_slots(buf, 0, 1, Direction::Ascending, SwapMode::Branching, tap);
  CHECK(rec.size() == 2);  // reads only: the branching form skips the write
}

TEST_CASE("bitonic_sort_records equals the stable sort oracle") {
  std::mt19937_64 rng(4);
  for (std::size_t n : {0, 1, 2, 3, 7, 64, 255, 256, 1000}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto recs = testing::random_records(rng, n);
      auto buf = RecordBuffer::from_records(RecordLayout{}, recs);
      SortOptions opts;
      opts.mode = trial % 2 ? SwapMode::Oblivious : SwapMode::Branching;
      bitonic_sort_records(buf, opts);
      CHECK(buf.size() == n);
      CHECK(buf.records() == testing::oracle_sort(recs));
    }
  }
  auto sorted = testing::oracle_sort(testing::random_records(rng, 100));
  auto buf = RecordBuffer::from_records(RecordLayout{}, sorted);
  bitonic_sort_records(buf);
  CHECK(buf.records() == sorted);
}

TEST_CASE("fillers sort after keyed records, keyed dummies stay with their key") {
  std::vector<Record> recs{keyed("b", 1), Record{"", "", Flag::Dummy, 0}, keyed("a", 2), keyed("a", 5, Flag::Dummy)};
  auto buf = RecordBuffer::from_records(RecordLayout{}, recs);
  bitonic_sort_records(buf);
  const auto out = buf.records();
  CHECK(out[0].key == "a");
  CHECK(out[1].key == "a");
  CHECK(out[1].is_dummy());
  CHECK(out[2].key == "b");
  CHECK(out[3].is_filler());
}

TEST_CASE("page traces are input-independent only with the oblivious swap") {
  std::mt19937_64 rng(5);
  const auto base = page_trace(testing::random_records(rng, 256), SwapMode::Oblivious);
  CHECK_FALSE(base.empty());
  for (int i = 0; i < 5; ++i) {
    CHECK_FALSE(trace::diff(base, page_trace(testing::random_records(rng, 256), SwapMode::Oblivious)).has_value());
  }
  auto ascending = testing::oracle_sort(testing::random_records(rng, 256));
  auto descending = ascending;
  std::reverse(descending.begin(), descending.end());
  CHECK(trace::diff(page_trace(ascending, SwapMode::Branching), page_trace(descending, SwapMode::Branching))
            .has_value());
}

TEST_CASE("merge_split keeps the smaller half low") {
  std::mt19937_64 rng(6);
  for (std::size_t m : {1, 3, 8, 77}) {
    auto a = testing::oracle_sort(testing::random_records(rng, m));
    auto b = testing::oracle_sort(testing::random_records(rng, m));
    for (auto& r : b) r.seq += 10000;
    auto lo = RecordBuffer::from_records(RecordLayout{}, a);
    auto hi = RecordBuffer::from_records(RecordLayout{}, b);
    merge_split(lo, hi, Direction::Ascending);
    std::vector<Record> all(a);
    all.insert(all.end(), b.begin(), b.end());
    const auto expect = testing::oracle_sort(all);
    CHECK(lo.records() == std::vector<Record>(expect.begin(), expect.begin() + static_cast<long>(m)));
    CHECK(hi.records() == std::vector<Record>(expect.begin() + static_cast<long>(m), expect.end()));
  }
}

namespace {

struct BlockFixture {
  trace::Recorder rec;
  boundary::UntrustedStore store{4096, &rec};
  RecordLayout layout;
  codec::SlotBlockCodec codec;

  explicit BlockFixture(RecordLayout l = {})
      : layout(l), codec(l, 4096, codec::BlockSealer(Key{}, Digest{}, 9)) {}

  void put(const std::vector<Record>& recs) {
    const std::size_t m = codec.records_per_block();
    auto buf = RecordBuffer::from_records(layout, recs);
    for (std::size_t first = 0; first < buf.size(); first += m) {
      store.write_block(store.size(), codec.seal(buf, first, store.size()));
    }
  }
  std::vector<Record> get(std::uint64_t first, std::uint64_t count) {
    std::vector<Record> out;
    for (std::uint64_t i = first; i < first + count; ++i) {
      const auto recs = codec.open(store.read_block(i)).records();
      out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
  }
};

RecordLayout wide_layout() {
  RecordLayout l;
  l.key_max = 8;
  l.value_max = 2000;  // two slots per block
  return l;
}

}  // namespace

TEST_CASE("block sort: two blocks [9,7] and [3,5] become [3,5] and [7,9]") {
  BlockFixture f(wide_layout());
  REQUIRE(f.codec.records_per_block() == 2);
  f.put({keyed("9", 0), keyed("7", 1), keyed("3", 2), keyed("5", 3)});
  f.rec.clear();
  bitonic_sort_blocks(f.store, 0, 2, f.codec);
  CHECK(f.rec.size() == 4);
  const auto out = f.get(0, 2);
  CHECK(out[0].key == "3");
  CHECK(out[1].key == "5");
  CHECK(out[2].key == "7");
  CHECK(out[3].key == "9");
}

TEST_CASE("block sort of one block sorts it in place") {
  BlockFixture f;
  std::mt19937_64 rng(7);
  const auto recs = testing::random_records(rng, f.codec.records_per_block());
  f.put(recs);
  f.rec.clear();
  bitonic_sort_blocks(f.store, 0, 1, f.codec);
  REQUIRE(f.rec.size() == 2);
  CHECK(f.rec.events()[0].op == trace::Op::Read);
  CHECK(f.rec.events()[1].op == trace::Op::Write);
  CHECK(f.get(0, 1) == testing::oracle_sort(recs));
  f.rec.clear();
  bitonic_sort_blocks(f.store, 0, 0, f.codec);
  CHECK(f.rec.size() == 0);
}

TEST_CASE("block sort matches the oracle and its trace depends only on the count") {
  std::mt19937_64 rng(8);
  std::optional<trace::Trace> reference;
  for (std::uint64_t count : {3, 5, 16}) {
    reference.reset();
    for (int trial = 0; trial < 5; ++trial) {
      BlockFixture f;
      const std::size_t m = f.codec.records_per_block();
      const auto recs = testing::random_records(rng, count * m, 6, 4);
      f.put(recs);
      f.rec.clear();
      bitonic_sort_blocks(f.store, 0, count, f.codec);
      const std::uint64_t padded = pad_pow2(count);
      CHECK(f.rec.size() == (padded - count) + 4 * schedule_length(padded));
      auto out = f.get(0, count);
      CHECK(out == testing::oracle_sort(recs));
      if (!reference) {
        reference = f.rec.events();
      } else {
        CHECK_FALSE(trace::diff(*reference, f.rec.events()).has_value());
      }
    }
  }
}

TEST_CASE("merge sort sorts but leaks the input order") {
  auto run = [](const std::vector<std::string>& keys) {
    BlockFixture f(wide_layout());
    std::vector<Record> recs;
    // One real record per block, each block padded with a filler.
    for (std::size_t i = 0; i < keys.size(); ++i) {
      recs.push_back(keyed(keys[i], i));
      recs.push_back(Record{"", "", Flag::Dummy, 100 + i});
    }
    f.put(recs);
    f.rec.clear();
    const auto range = merge_sort_blocks(f.store, 0, keys.size(), f.codec);
    const auto events = f.rec.events();
    auto out = f.get(range.first, range.count);
    std::vector<std::string> real;
    for (const auto& r : out) {
      if (!r.is_filler()) real.push_back(r.key);
    }
    return std::make_pair(real, events);
  };
  const auto [sorted_a, trace_a] = run({"3", "1", "2", "4"});
  const auto [sorted_b, trace_b] = run({"4", "3", "2", "1"});
  const std::vector<std::string> expect_a{"1", "2", "3", "4"};
  CHECK(sorted_a == expect_a);
  CHECK(sorted_b == expect_a);
  CHECK(trace::diff(trace_a, trace_b).has_value());

  // The bitonic block sort on the same two inputs gives equal traces.
  auto bitonic = [](const std::vector<std::string>& keys) {
    BlockFixture f(wide_layout());
    std::vector<Record> recs;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      recs.push_back(keyed(keys[i], i));
      recs.push_back(Record{"", "", Flag::Dummy, 100 + i});
    }
    f.put(recs);
    f.rec.clear();
    bitonic_sort_blocks(f.store, 0, keys.size(), f.codec);
    return f.rec.events();
  };
  CHECK_FALSE(trace::diff(bitonic({"3", "1", "2", "4"}), bitonic({"4", "3", "2", "1"})).has_value());
}
