#pragma once

// Sample applications on the UserFunctions API, and the reducer-side
// group-size attack.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgxmr/mrcore.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr::apps {

// ---- WordCount ----

/// Splits on ASCII whitespace (NUL padding counts as whitespace), lowercases,
/// and strips non-alphanumerics from both ends. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view line);

/// map emits (word, 1) per token; aggregator Sum.
mrcore::UserFunctions wordcount_udf();

/// Decoded WordCount output: word -> count.
std::map<std::string, std::int64_t> wordcount_counts(const codec::BlockFile& output, const Key& key,
                                                     const mrcore::JobConfig& config);

// ---- KMeans ----

/// Coordinates are fixed point: value * kFixedScale, rounded.
inline constexpr std::int64_t kFixedScale = 1'000'000;
using Point = std::vector<std::int64_t>;

std::int64_t to_fixed(double value);
double from_fixed(std::int64_t value);

/// Parses "x,y,..." (surrounding whitespace and NUL padding ignored).
/// Throws FormatError on a malformed number or an empty line.
Point parse_point(std::string_view line);
/// Renders with six decimals, comma separated.
std::string format_point(const Point& point);

std::vector<Point> load_points_csv(const std::filesystem::path& path);
void save_points_csv(const std::filesystem::path& path, std::span<const Point> points);

/// Index of the closest centroid by exact squared Euclidean distance; ties
/// go to the lowest index. Throws DimensionMismatch.
std::size_t nearest_centroid(const Point& point, std::span<const Point> centroids);

/// Group key of a centroid id: eight zero-padded decimal digits.
std::string centroid_key(std::size_t cid);

/// map assigns each point to its nearest centroid and emits
/// (cid, [coordinates..., 1]); aggregator Sum.
mrcore::UserFunctions kmeans_udf(std::vector<Point> centroids);

/// New centroids from a round's output: llround(sum / count) per
/// coordinate; clusters with no points keep their previous centroid.
std::vector<Point> kmeans_update(std::span<const Point> previous, const codec::BlockFile& output, const Key& key,
                                 const mrcore::JobConfig& config);

/// One MapReduce round over an in-memory untrusted store.
std::vector<Point> kmeans_round(const mrcore::JobConfig& config, const codec::BlockFile& points,
                                std::span<const Point> centroids, const Key& key, trace::Recorder& recorder,
                                mrcore::JobResult* result = nullptr);

/// `iterations` rounds starting from `initial`.
std::vector<Point> kmeans(const mrcore::JobConfig& config, const codec::BlockFile& points,
                          std::span<const Point> initial, std::size_t iterations, const Key& key);

// ---- Group-size attack ----

struct GroupEstimate {
  std::uint64_t group = 0;
  std::string key;
  std::uint64_t estimate = 0;
};

/// Estimated size of each emitted group: reducer input records consumed
/// since the previous emission. Empty when the trace shows no reducer reads.
std::vector<GroupEstimate> estimate_group_sizes(std::span<const trace::AccessEvent> trace,
                                                std::span<const mrcore::ReduceObservation> observations);

/// Spearman rank correlation with average ranks for ties. nullopt when
/// fewer than two pairs or either side has no variance.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct AttackRow {
  std::string key;
  std::uint64_t truth = 0;
  std::uint64_t estimate = 0;
};

struct AttackReport {
  std::vector<GroupEstimate> estimates;
  /// The `top` most frequent truth keys that have an estimate, by
  /// descending truth count then key.
  std::vector<AttackRow> rows;
  std::optional<double> correlation;
  /// Estimated keys absent from the truth file.
  std::vector<std::string> missing_truth;
};

AttackReport group_size_attack(std::span<const trace::AccessEvent> trace,
                               std::span<const mrcore::ReduceObservation> observations,
                               const std::map<std::string, std::uint64_t>& truth, std::size_t top = 100);

/// CSV "group,key,consumed" with a header line.
void save_observations_csv(const std::filesystem::path& path, std::span<const mrcore::ReduceObservation> obs);
std::vector<mrcore::ReduceObservation> load_observations_csv(const std::filesystem::path& path);
/// CSV "key,count" with a header line.
void save_truth_csv(const std::filesystem::path& path, const std::map<std::string, std::uint64_t>& truth);
std::map<std::string, std::uint64_t> load_truth_csv(const std::filesystem::path& path);

/// Text lines of `words_per_line` tokens drawn i.i.d. from a Zipf(exponent)
/// law over `vocabulary` words; word r (0-based rank) has weight 1/(r+1)^s.
std::vector<std::string> zipf_corpus(std::size_t num_tokens, std::size_t vocabulary, double exponent,
                                     std::uint64_t seed, std::size_t words_per_line = 8);
/// The word for a rank: lowercase letters only.
std::string zipf_word(std::size_t rank);

}  // namespace sgxmr::apps
