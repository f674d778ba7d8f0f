#include <cctype>

#include "sgxmr/apps.hpp"

namespace sgxmr::apps {
namespace {

bool is_space(char c) { return c == '\0' || std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t end = i;
    while (end < line.size() && !is_space(line[end])) ++end;
    std::size_t a = i, b = end;
    while (a < b && !is_alnum(line[a])) ++a;
    while (b > a && !is_alnum(line[b - 1])) --b;
    if (a < b) {
      std::string word(line.substr(a, b - a));
      for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(word));
    }
    i = end;
  }
  return out;
}

mrcore::UserFunctions wordcount_udf() {
  mrcore::UserFunctions udf;
  udf.name = "wordcount";
  udf.aggregator = mrcore::Aggregator::sum();
  udf.value_words = 1;
  udf.map = [](const codec::Record& input, const mrcore::Emit& emit) {
    static constexpr std::int64_t kOne[1] = {1};
    for (const auto& word : tokenize(input.value)) emit(word, kOne);
  };
  return udf;
}

std::map<std::string, std::int64_t> wordcount_counts(const codec::BlockFile& output, const Key& key,
                                                     const mrcore::JobConfig& config) {
  const auto udf = wordcount_udf();
  std::map<std::string, std::int64_t> counts;
  for (auto& [word, value] : mrcore::decode_output(output, key, mrcore::job_layout(config, udf))) {
    counts[word] += value.at(0);
  }
  return counts;
}

}  // namespace sgxmr::apps
