#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sgxmr/apps.hpp"
#include "sgxmr/error.hpp"

namespace sgxmr::apps {
namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

std::vector<GroupEstimate> estimate_group_sizes(std::span<const trace::AccessEvent> trace,
                                                std::span<const mrcore::ReduceObservation> observations) {
  const bool reduced = std::any_of(trace.begin(), trace.end(), [](const trace::AccessEvent& e) {
    return e.phase == trace::Phase::Reduce && e.space == trace::Space::UntrustedBlock && e.op == trace::Op::Read;
  });
  std::vector<GroupEstimate> out;
  if (!reduced) return out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(GroupEstimate{o.group, o.key, o.consumed});
  return out;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman needs equal-length inputs");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

AttackReport group_size_attack(std::span<const trace::AccessEvent> trace,
                               std::span<const mrcore::ReduceObservation> observations,
                               const std::map<std::string, std::uint64_t>& truth, std::size_t top) {
  AttackReport report;
  report.estimates = estimate_group_sizes(trace, observations);
  std::map<std::string, std::uint64_t> estimate_of;
  for (const auto& e : report.estimates) {
    estimate_of[e.key] += e.estimate;
    if (!truth.contains(e.key)) report.missing_truth.push_back(e.key);
  }

  std::vector<std::pair<std::string, std::uint64_t>> ranked(truth.begin(), truth.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [key, count] : ranked) {
    if (report.rows.size() == top) break;
    const auto it = estimate_of.find(key);
    if (it == estimate_of.end()) continue;
    report.rows.push_back(AttackRow{key, count, it->second});
  }

  std::vector<double> xs, ys;
  for (const auto& r : report.rows) {
    xs.push_back(static_cast<double>(r.truth));
    ys.push_back(static_cast<double>(r.estimate));
  }
  report.correlation = spearman(xs, ys);
  return report;
}

void save_observations_csv(const std::filesystem::path& path, std::span<const mrcore::ReduceObservation> obs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "group,key,consumed\n";
  for (const auto& o : obs) out << o.group << ',' << o.key << ',' << o.consumed << '\n';
}

std::vector<mrcore::ReduceObservation> load_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<mrcore::ReduceObservation> obs;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (header) {
      header = false;
      if (line == "group,key,consumed") continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw FormatError("bad observations line '" + line + "'");
    obs.push_back(mrcore::ReduceObservation{std::stoull(f[0]), f[1], std::stoull(f[2])});
  }
  return obs;
}

void save_truth_csv(const std::filesystem::path& path, const std::map<std::string, std::uint64_t>& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "key,count\n";
  for (const auto& [k, c] : truth) out << k << ',' << c << '\n';
}

std::map<std::string, std::uint64_t> load_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::uint64_t> truth;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (header) {
      header = false;
      if (line == "key,count") continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw FormatError("bad truth line '" + line + "'");
    truth[f[0]] += std::stoull(f[1]);
  }
  return truth;
}

std::string zipf_word(std::size_t rank) {
  std::string word;
  std::size_t r = rank;
  do {
    word.insert(word.begin(), static_cast<char>('a' + r % 26));
    r /= 26;
  } while (r > 0);
  return "w" + word;
}

std::vector<std::string> zipf_corpus(std::size_t num_tokens, std::size_t vocabulary, double exponent,
                                     std::uint64_t seed, std::size_t words_per_line) {
  if (vocabulary == 0 || words_per_line == 0) throw std::invalid_argument("empty vocabulary or line");
  std::vector<double> weights(vocabulary);
  for (std::size_t r = 0; r < vocabulary; ++r) weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());
  std::mt19937_64 rng(seed);
  std::vector<std::string> lines;
  std::string line;
  for (std::size_t t = 0; t < num_tokens; ++t) {
    if (!line.empty()) line += ' ';
    line += zipf_word(draw(rng));
    if ((t + 1) % words_per_line == 0) {
      lines.push_back(std::move(line));
      line.clear();
    }
  }
  if (!line.empty()) lines.push_back(std::move(line));
  return lines;
}

}  // namespace sgxmr::apps
