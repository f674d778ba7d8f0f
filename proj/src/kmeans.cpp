#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "sgxmr/apps.hpp"
#include "sgxmr/boundary.hpp"
#include "sgxmr/error.hpp"

namespace sgxmr::apps {
namespace {

std::string_view trim(std::string_view s) {
  auto junk = [](char c) { return c == '\0' || c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t dimension_of(std::span<const Point> centroids) {
  if (centroids.empty()) throw std::invalid_argument("KMeans needs k >= 1 centroids");
  const std::size_t d = centroids[0].size();
  if (d == 0) throw DimensionMismatch("centroids have no coordinates");
  for (const auto& c : centroids) {
    if (c.size() != d) throw DimensionMismatch("centroids disagree on dimension");
  }
  return d;
}

}  // namespace

std::int64_t to_fixed(double value) {
  const double scaled = value * static_cast<double>(kFixedScale);
  if (!std::isfinite(scaled) || std::fabs(scaled) > 9.0e15) {
    throw FormatError("coordinate out of fixed-point range");
  }
  return std::llround(scaled);
}

double from_fixed(std::int64_t value) { return static_cast<double>(value) / static_cast<double>(kFixedScale); }

Point parse_point(std::string_view line) {
  line = trim(line);
  if (line.empty()) throw FormatError("empty point");
  Point point;
  while (true) {
    const auto comma = line.find(',');
    const auto field = trim(line.substr(0, comma));
    double v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw FormatError("bad coordinate '" + std::string(field) + "'");
    }
    point.push_back(to_fixed(v));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return point;
}

std::string format_point(const Point& point) {
  std::string out;
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (i) out += ',';
    const std::int64_t v = point[i];
    const std::uint64_t mag = v < 0 ? 0 - static_cast<std::uint64_t>(v) : static_cast<std::uint64_t>(v);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%llu.%06llu", v < 0 ? "-" : "",
                  static_cast<unsigned long long>(mag / kFixedScale),
                  static_cast<unsigned long long>(mag % kFixedScale));
    out += buf;
  }
  return out;
}

std::vector<Point> load_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Point> points;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    points.push_back(parse_point(line));
  }
  return points;
}

void save_points_csv(const std::filesystem::path& path, std::span<const Point> points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& p : points) out << format_point(p) << '\n';
}

std::size_t nearest_centroid(const Point& point, std::span<const Point> centroids) {
  const std::size_t d = dimension_of(centroids);
  if (point.size() != d) {
    throw DimensionMismatch("point has " + std::to_string(point.size()) + " coordinates; centroids have " +
                            std::to_string(d));
  }
  std::size_t best = 0;
  unsigned __int128 best_dist = 0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    unsigned __int128 dist = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const __int128 diff = static_cast<__int128>(point[i]) - centroids[c][i];
      dist += static_cast<unsigned __int128>(diff * diff);
    }
    if (c == 0 || dist < best_dist) {
      best = c;
      best_dist = dist;
    }
  }
  return best;
}

std::string centroid_key(std::size_t cid) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%08zu", cid);
  return buf;
}

mrcore::UserFunctions kmeans_udf(std::vector<Point> centroids) {
  const std::size_t d = dimension_of(centroids);
  mrcore::UserFunctions udf;
  udf.name = "kmeans";
  udf.aggregator = mrcore::Aggregator::sum();
  udf.value_words = d + 1;
  udf.map = [centroids = std::move(centroids), d](const codec::Record& input, const mrcore::Emit& emit) {
    const Point p = parse_point(input.value);
    const std::size_t cid = nearest_centroid(p, centroids);
    std::vector<std::int64_t> value(p);
    value.reserve(d + 1);
    value.push_back(1);
    emit(centroid_key(cid), value);
  };
  return udf;
}

std::vector<Point> kmeans_update(std::span<const Point> previous, const codec::BlockFile& output, const Key& key,
                                 const mrcore::JobConfig& config) {
  const auto udf = kmeans_udf(std::vector<Point>(previous.begin(), previous.end()));
  std::vector<Point> next(previous.begin(), previous.end());
  const std::size_t d = previous[0].size();
  for (const auto& [k, value] : mrcore::decode_output(output, key, mrcore::job_layout(config, udf))) {
    const std::size_t cid = std::stoul(k);
    if (cid >= next.size() || value.size() != d + 1) throw FormatError("unexpected KMeans output record");
    const std::int64_t count = value[d];
    if (count <= 0) continue;
    for (std::size_t i = 0; i < d; ++i) {
      next[cid][i] = std::llround(static_cast<double>(value[i]) / static_cast<double>(count));
    }
  }
  return next;
}

std::vector<Point> kmeans_round(const mrcore::JobConfig& config, const codec::BlockFile& points,
                                std::span<const Point> centroids, const Key& key, trace::Recorder& recorder,
                                mrcore::JobResult* result) {
  const auto udf = kmeans_udf(std::vector<Point>(centroids.begin(), centroids.end()));
  boundary::UntrustedStore store(config.block_size, &recorder);
  mrcore::JobResult run;
  try {
    run = mrcore::run_job(config, points, udf, store, recorder, key);
  } catch (const UdfError& e) {
    try {
      std::rethrow_if_nested(e);
    } catch (const DimensionMismatch&) {
      throw;
    } catch (...) {
    }
    throw;
  }
  auto next = kmeans_update(centroids, run.output, key, config);
  if (result) *result = std::move(run);
  return next;
}

std::vector<Point> kmeans(const mrcore::JobConfig& config, const codec::BlockFile& points,
                          std::span<const Point> initial, std::size_t iterations, const Key& key) {
  std::vector<Point> centroids(initial.begin(), initial.end());
  for (std::size_t i = 0; i < iterations; ++i) {
    trace::Recorder recorder;
    centroids = kmeans_round(config, points, centroids, key, recorder);
  }
  return centroids;
}

}  // namespace sgxmr::apps
