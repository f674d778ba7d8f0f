#include "sgxmr/trace.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sgxmr/error.hpp"

namespace sgxmr::trace {
namespace {

constexpr std::array<std::string_view, kPhaseCount> kPhaseNames = {
    "Encode", "Map", "Combine", "Sort", "Reduce", "Output", "Oram"};
constexpr std::array<std::string_view, 2> kSpaceNames = {"UntrustedBlock", "EnclavePage"};
constexpr std::array<std::string_view, 2> kOpNames = {"Read", "Write"};

template <typename E, std::size_t N>
E parse_name(const std::array<std::string_view, N>& names, std::string_view name, const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw FormatError(std::string("unknown ") + what + " '" + std::string(name) + "'");
  return static_cast<E>(it - names.begin());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace

std::string_view to_string(Phase phase) { return kPhaseNames[static_cast<std::size_t>(phase)]; }
std::string_view to_string(Space space) { return kSpaceNames[static_cast<std::size_t>(space)]; }
std::string_view to_string(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }
Phase parse_phase(std::string_view name) { return parse_name<Phase>(kPhaseNames, name, "phase"); }
Space parse_space(std::string_view name) { return parse_name<Space>(kSpaceNames, name, "space"); }
Op parse_op(std::string_view name) { return parse_name<Op>(kOpNames, name, "op"); }

std::optional<Divergence> diff(std::span<const AccessEvent> left, std::span<const AccessEvent> right) {
  const std::size_t common = std::min(left.size(), right.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (!left[i].same_access(right[i])) return Divergence{i, left[i], right[i]};
  }
  if (left.size() == right.size()) return std::nullopt;
  Divergence d{common, std::nullopt, std::nullopt};
  if (common < left.size()) d.left = left[common];
  if (common < right.size()) d.right = right[common];
  return d;
}

Trace filter_phase(std::span<const AccessEvent> events, Phase phase) {
  Trace out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [phase](const AccessEvent& e) { return e.phase == phase; });
  return out;
}

Trace filter_space(std::span<const AccessEvent> events, Space space) {
  Trace out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [space](const AccessEvent& e) { return e.space == space; });
  return out;
}

std::uint64_t Summary::boundary_block_transfers() const {
  std::uint64_t total = 0;
  for (std::size_t p = 0; p < kPhaseCount; ++p) {
    if (static_cast<Phase>(p) == Phase::Encode) continue;
    total += block[p].reads + block[p].writes;
  }
  return total;
}

Summary summarize(std::span<const AccessEvent> events) {
  Summary s;
  for (const auto& e : events) {
    auto& c = (e.space == Space::UntrustedBlock ? s.block : s.page)[static_cast<std::size_t>(e.phase)];
    (e.op == Op::Read ? c.reads : c.writes) += 1;
  }
  return s;
}

Shape shape_of(const codec::FileHeader& input, std::string config_digest, std::uint64_t seed,
               double dummy_rate) {
  Shape s;
  s.num_input_blocks = input.num_blocks;
  s.block_size = input.block_size;
  s.record_mode = input.record_mode;
  s.record_len = input.record_len;
  s.config_digest = std::move(config_digest);
  s.seed = seed;
  s.dummy_rate = dummy_rate;
  return s;
}

bool shapes_compatible(const Shape& a, const Shape& b, bool across_seeds) {
  if (!a.same_shape(b)) return false;
  return across_seeds || (a.seed == b.seed && a.dummy_rate == b.dummy_rate);
}

Verdict assert_oblivious(std::span<const Trace> traces, std::span<const Shape> shapes,
                         bool across_seeds) {
  if (traces.size() < 2) throw ShapeMismatch("at least two traces are required");
  if (shapes.size() != traces.size()) throw ShapeMismatch("one shape per trace is required");
  for (std::size_t i = 1; i < shapes.size(); ++i) {
    if (!shapes_compatible(shapes[0], shapes[i], across_seeds)) {
      throw ShapeMismatch("shape of run " + std::to_string(i) + " differs from run 0");
    }
  }
  // Exact equality is transitive, so comparing against run 0 covers every pair.
  for (std::size_t i = 1; i < traces.size(); ++i) {
    if (auto d = diff(traces[0], traces[i])) {
      return Verdict{VerdictKind::Leaky, d, 0, i};
    }
  }
  return Verdict{};
}

std::string to_json_line(const AccessEvent& e) {
  std::string line;
  line.reserve(96);
  line += "{\"tick\":";
  line += std::to_string(e.tick);
  line += ",\"phase\":\"";
  line += to_string(e.phase);
  line += "\",\"space\":\"";
  line += to_string(e.space);
  line += "\",\"op\":\"";
  line += to_string(e.op);
  line += "\",\"index\":";
  line += std::to_string(e.index);
  line += '}';
  return line;
}

AccessEvent parse_json_line(std::string_view line) {
  try {
    auto j = nlohmann::json::parse(line);
    AccessEvent e;
    e.tick = j.at("tick").get<std::uint64_t>();
    e.phase = parse_phase(j.at("phase").get<std::string>());
    e.space = parse_space(j.at("space").get<std::string>());
    e.op = parse_op(j.at("op").get<std::string>());
    e.index = j.at("index").get<std::uint64_t>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed trace line: ") + ex.what());
  }
}

std::string serialize(std::span<const AccessEvent> events) {
  std::string out;
  out.reserve(events.size() * 80);
  for (const auto& e : events) {
    out += to_json_line(e);
    out += '\n';
  }
  return out;
}

Trace parse(std::string_view text) {
  Trace out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(parse_json_line(line));
    pos = end + 1;
  }
  return out;
}

void save(const std::filesystem::path& path, std::span<const AccessEvent> events) {
  write_text(path, serialize(events));
}

Trace load(const std::filesystem::path& path) { return parse(read_text(path)); }

std::string shape_to_json(const Shape& s) {
  nlohmann::ordered_json j;
  j["num_input_blocks"] = s.num_input_blocks;
  j["block_size"] = s.block_size;
  j["record_mode"] = s.record_mode == codec::RecordMode::Fixed ? "fixed" : "variable";
  j["record_len"] = s.record_len;
  j["config_digest"] = s.config_digest;
  j["seed"] = s.seed;
  j["dummy_rate"] = s.dummy_rate;
  return j.dump();
}

Shape shape_from_json(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    Shape s;
    s.num_input_blocks = j.at("num_input_blocks").get<std::uint64_t>();
    s.block_size = j.at("block_size").get<std::uint32_t>();
    auto mode = j.at("record_mode").get<std::string>();
    if (mode != "fixed" && mode != "variable") throw FormatError("bad record_mode in shape");
    s.record_mode = mode == "fixed" ? codec::RecordMode::Fixed : codec::RecordMode::Variable;
    s.record_len = j.at("record_len").get<std::uint32_t>();
    s.config_digest = j.at("config_digest").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.dummy_rate = j.at("dummy_rate").get<double>();
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed shape: ") + ex.what());
  }
}

void save_shape(const std::filesystem::path& path, const Shape& shape) {
  write_text(path, shape_to_json(shape) + "\n");
}

Shape load_shape(const std::filesystem::path& path) { return shape_from_json(read_text(path)); }

std::filesystem::path shape_path_for(const std::filesystem::path& trace_path) {
  auto p = trace_path;
  p += ".shape.json";
  return p;
}

}  // namespace sgxmr::trace
