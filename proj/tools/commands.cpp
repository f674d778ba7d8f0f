#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "bench.hpp"
#include "sgxmr/apps.hpp"
#include "sgxmr/boundary.hpp"
#include "sgxmr/codec.hpp"
#include "sgxmr/error.hpp"
#include "sgxmr/mrcore.hpp"
#include "sgxmr/trace.hpp"

namespace sgxmr::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

/// Splits into lines; a final newline does not start an extra empty line.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

codec::RecordMode parse_record_mode(const std::string& s) {
  if (s == "fixed") return codec::RecordMode::Fixed;
  if (s == "variable") return codec::RecordMode::Variable;
  throw CLI::ValidationError("--record-mode", "must be fixed or variable");
}

// ---- encode / decode ----

struct EncodeArgs {
  std::string input, output, key_hex, record_mode = "fixed";
  std::uint32_t block_size = codec::kPageSize;
  std::uint32_t record_size = 64;
  std::uint32_t nonce_base = 0;
};

int cmd_encode(const EncodeArgs& a, std::ostream& out) {
  const Key key = parse_key_hex(a.key_hex);
  codec::EncodeParams params;
  params.block_size = a.block_size;
  params.record_mode = parse_record_mode(a.record_mode);
  params.record_len = params.record_mode == codec::RecordMode::Fixed ? a.record_size : 0;
  params.nonce_base = a.nonce_base;
  codec::validate_block_size(params.block_size);

  auto lines = split_lines(read_file(a.input));
  if (params.record_mode == codec::RecordMode::Fixed) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].size() > a.record_size) {
        throw RecordTooLarge("line " + std::to_string(i + 1) + " has " + std::to_string(lines[i].size()) +
                             " bytes; record size is " + std::to_string(a.record_size));
      }
      lines[i].resize(a.record_size, '\0');
    }
  }
  const auto file = codec::encode_file(lines, params, key);
  file.save(a.output);
  out << "encoded " << file.header.num_records << " records into " << file.header.num_blocks << " blocks\n";
  return kOk;
}

struct DecodeArgs {
  std::string input, output, key_hex, as = "lines";
  std::uint16_t key_max = 32;
};

int cmd_decode(const DecodeArgs& a) {
  const Key key = parse_key_hex(a.key_hex);
  const auto file = codec::BlockFile::load(a.input);
  const auto records = codec::decode_file(file, key);
  std::string text;
  if (a.as == "lines") {
    for (auto r : records) {
      if (file.header.record_mode == codec::RecordMode::Fixed) {
        while (!r.empty() && r.back() == '\0') r.pop_back();
      }
      text += r;
      text += '\n';
    }
  } else if (a.as == "records") {
    const std::size_t fixed = codec::RecordLayout::kKeyOffset + a.key_max;
    if (file.header.record_mode != codec::RecordMode::Fixed || file.header.record_len < fixed) {
      throw FormatError("file does not hold record slots with key_max " + std::to_string(a.key_max));
    }
    codec::RecordLayout layout;
    layout.key_max = a.key_max;
    layout.value_max = static_cast<std::uint16_t>(file.header.record_len - fixed);
    for (const auto& r : records) {
      const auto rec = layout.decode(std::span(reinterpret_cast<const std::uint8_t*>(r.data()), r.size()));
      if (rec.is_dummy()) continue;
      text += rec.key;
      text += '\t';
      const auto words = codec::decode_words(rec.value);
      for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) text += ',';
        text += std::to_string(words[i]);
      }
      text += '\n';
    }
  } else {
    throw CLI::ValidationError("--as", "must be lines or records");
  }
  write_file(a.output, text);
  return kOk;
}

// ---- run ----

struct RunArgs {
  std::string app = "wordcount", input, output, key_hex, protect = "all", combiner = "on";
  double dummy_rate = 0.0;
  std::uint64_t seed = 0;
  std::string trace_path, observables, truth_out;
  bool trace_pages = false;
  std::uint32_t map_buffer = 1024;
  std::uint16_t key_max = 32;
  std::string centroids, centroids_out;
  std::size_t iterations = 1;
};

mrcore::JobConfig run_config(const RunArgs& a, const codec::BlockFile& input) {
  mrcore::JobConfig c;
  c.block_size = input.header.block_size;
  if (a.protect == "all") {
    c.protect_sort = c.protect_swap = true;
  } else if (a.protect == "none") {
    c.protect_sort = c.protect_swap = false;
  } else if (a.protect == "sort-only") {
    c.protect_sort = true;
    c.protect_swap = false;
  } else {
    throw CLI::ValidationError("--protect", "must be all, none or sort-only");
  }
  if (a.combiner != "on" && a.combiner != "off") throw CLI::ValidationError("--combiner", "must be on or off");
  c.combiner = a.combiner == "on";
  c.dummy_rate = a.dummy_rate;
  c.seed = a.seed;
  c.map_buffer_records = a.map_buffer;
  c.key_max = a.key_max;
  c.trace_pages = a.trace_pages;
  return c;
}

json counts_json(const trace::Counts& c) { return json{{"reads", c.reads}, {"writes", c.writes}}; }

int cmd_run(const RunArgs& a, std::ostream& out) {
  const Key key = parse_key_hex(a.key_hex);
  const auto input = codec::BlockFile::load(a.input);
  const auto config = run_config(a, input);

  std::vector<apps::Point> centroids;
  mrcore::UserFunctions udf;
  if (a.app == "wordcount") {
    udf = apps::wordcount_udf();
  } else if (a.app == "kmeans") {
    if (a.centroids.empty()) throw CLI::RequiredError("--centroids is required for kmeans");
    centroids = apps::load_points_csv(a.centroids);
    udf = apps::kmeans_udf(centroids);
  } else {
    throw CLI::ValidationError("--app", "must be wordcount or kmeans");
  }

  trace::Recorder recorder;
  boundary::PageSimulator pages(&recorder);
  mrcore::JobResult result;
  std::uint64_t peak_untrusted = 0;
  const std::size_t rounds = a.app == "kmeans" ? a.iterations : 1;
  for (std::size_t round = 0; round < rounds; ++round) {
    if (a.app == "kmeans") udf = apps::kmeans_udf(centroids);
    boundary::UntrustedStore store(config.block_size, &recorder);
    result = mrcore::run_job(config, input, udf, store, recorder, key, &pages);
    peak_untrusted = std::max(peak_untrusted, store.peak_bytes());
    if (a.app == "kmeans") centroids = apps::kmeans_update(centroids, result.output, key, config);
  }

  result.output.save(a.output);
  const auto digest = mrcore::config_digest(config, udf);
  if (!a.trace_path.empty()) {
    trace::save(a.trace_path, recorder.events());
    trace::save_shape(trace::shape_path_for(a.trace_path),
                      trace::shape_of(input.header, digest, config.seed, config.dummy_rate));
  }
  if (!a.observables.empty()) apps::save_observations_csv(a.observables, result.observations);
  if (!a.truth_out.empty()) {
    if (a.app != "wordcount") throw CLI::ValidationError("--truth-out", "only applies to wordcount");
    std::map<std::string, std::uint64_t> truth;
    for (const auto& [k, v] : apps::wordcount_counts(result.output, key, config)) {
      truth[k] = static_cast<std::uint64_t>(v);
    }
    apps::save_truth_csv(a.truth_out, truth);
  }
  if (!a.centroids_out.empty()) apps::save_points_csv(a.centroids_out, centroids);

  const auto summary = trace::summarize(recorder.events());
  json phases = json::object();
  for (std::size_t p = 1; p < trace::kPhaseCount; ++p) {
    const auto phase = static_cast<trace::Phase>(p);
    if (phase == trace::Phase::Oram) continue;
    phases[std::string(trace::to_string(phase))] = counts_json(summary.blocks(phase));
  }
  const auto& s = result.stats;
  json j{{"app", a.app},
         {"config_digest", digest},
         {"input_blocks", s.input_blocks},
         {"input_records", s.input_records},
         {"map_outputs", s.map_outputs},
         {"flushes", s.flushes},
         {"injected_dummies", s.injected_dummies},
         {"spill_blocks", s.spill_blocks},
         {"output_blocks", s.output_blocks},
         {"output_records", s.output_records},
         {"phases", phases},
         {"boundary_block_transfers", summary.boundary_block_transfers()},
         {"peak_untrusted_bytes", peak_untrusted},
         {"peak_enclave_bytes", s.peak_enclave_bytes}};
  if (a.app == "kmeans") j["iterations"] = rounds;
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- trace ----

std::string describe(const std::optional<trace::AccessEvent>& e) {
  return e ? trace::to_json_line(*e) : std::string("<end of trace>");
}

int cmd_trace_diff(const std::string& left, const std::string& right, std::ostream& out) {
  const auto a = trace::load(left);
  const auto b = trace::load(right);
  const auto d = trace::diff(a, b);
  if (!d) {
    out << "IDENTICAL\n";
    return kOk;
  }
  out << "DIVERGE at event " << d->position << "\n  " << left << ": " << describe(d->left) << "\n  " << right
      << ": " << describe(d->right) << '\n';
  return kLeaky;
}

int cmd_trace_check(const std::string& dir, const std::string& phase, bool across_seeds, std::ostream& out) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<trace::Trace> traces;
  std::vector<trace::Shape> shapes;
  for (const auto& f : files) {
    const auto shape_path = trace::shape_path_for(f);
    if (!fs::exists(shape_path)) throw ShapeMismatch("no shape file for " + f.string());
    auto t = trace::load(f);
    if (!phase.empty()) t = trace::filter_phase(t, trace::parse_phase(phase));
    traces.push_back(std::move(t));
    shapes.push_back(trace::load_shape(shape_path));
  }
  const auto verdict = trace::assert_oblivious(traces, shapes, across_seeds);
  if (verdict.kind == trace::VerdictKind::Oblivious) {
    out << "OBLIVIOUS: " << traces.size() << " traces identical\n";
    return kOk;
  }
  const auto& d = *verdict.divergence;
  out << "LEAKY: " << files[verdict.left_run].filename().string() << " and "
      << files[verdict.right_run].filename().string() << " diverge at event " << d.position << "\n  "
      << describe(d.left) << "\n  " << describe(d.right) << '\n';
  return kLeaky;
}

// ---- attack ----

int cmd_attack(const std::string& trace_path, const std::string& obs_path, const std::string& truth_path,
               std::size_t top, std::ostream& out, std::ostream& err) {
  const auto t = trace::load(trace_path);
  const auto obs = apps::load_observations_csv(obs_path);
  const auto truth = apps::load_truth_csv(truth_path);
  const auto report = apps::group_size_attack(t, obs, truth, top);
  if (!report.missing_truth.empty()) {
    err << "warning: " << report.missing_truth.size()
        << " estimated keys are missing from the truth file and are excluded\n";
  }
  out << "# estimates\ngroup,key,estimate\n";
  for (const auto& e : report.estimates) out << e.group << ',' << e.key << ',' << e.estimate << '\n';
  out << "# spearman over top " << report.rows.size() << " keys: ";
  if (report.correlation) {
    std::ostringstream v;
    v.precision(6);
    v << std::fixed << *report.correlation;
    out << v.str() << '\n';
  } else {
    out << "NA\n";
  }
  out << "# truth estimate\n";
  for (const auto& r : report.rows) out << r.truth << ' ' << r.estimate << '\n';
  return kOk;
}

// ---- bench ----

int cmd_bench(const std::string& app, std::uint64_t records, const std::string& backend, std::size_t repeat,
              std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const Backend b = parse_backend(backend);
  std::ostringstream csv;
  csv << bench_csv_header() << '\n';
  for (std::size_t r = 0; r < repeat; ++r) csv << bench_csv_line(bench_once(app, records, b, seed)) << '\n';
  if (out_path.empty() || out_path == "csv" || out_path == "-") {
    out << csv.str();
  } else {
    write_file(out_path, csv.str());
  }
  return kOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const AuthenticationError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const RecordTooLarge*>(&e)) {
    return kIntegrity;
  }
  if (dynamic_cast<const UdfError*>(&e) || dynamic_cast<const DimensionMismatch*>(&e)) return kUserCode;
  if (dynamic_cast<const ShapeMismatch*>(&e)) return kShape;
  return kUsage;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Oblivious MapReduce over encrypted block files"};
  app.require_subcommand(1);
  int code = kOk;

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Encrypt a text file, one record per line");
  encode->add_option("--input", enc.input, "Plaintext file")->required();
  encode->add_option("--output", enc.output, "Block file to write")->required();
  encode->add_option("--block-size", enc.block_size, "Block size in bytes (multiple of 4096)");
  encode->add_option("--record-mode", enc.record_mode, "fixed or variable");
  encode->add_option("--record-size", enc.record_size, "Record size for fixed mode");
  encode->add_option("--key-hex", enc.key_hex, "AES-128 key, 32 hex digits")->required();
  encode->add_option("--nonce-base", enc.nonce_base, "Nonce domain for this file");

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Verify and decrypt a block file");
  decode->add_option("--input", dec.input, "Block file")->required();
  decode->add_option("--output", dec.output, "Plaintext file to write")->required();
  decode->add_option("--key-hex", dec.key_hex, "AES-128 key, 32 hex digits")->required();
  decode->add_option("--as", dec.as, "lines, or records for job output");
  decode->add_option("--key-max", dec.key_max, "Key width of job output records");

  RunArgs run;
  auto* runcmd = app.add_subcommand("run", "Run a MapReduce job");
  runcmd->add_option("--app", run.app, "wordcount or kmeans");
  runcmd->add_option("--input", run.input, "Input block file")->required();
  runcmd->add_option("--output", run.output, "Output block file")->required();
  runcmd->add_option("--key-hex", run.key_hex, "AES-128 key, 32 hex digits")->required();
  runcmd->add_option("--protect", run.protect, "all, none or sort-only");
  runcmd->add_option("--combiner", run.combiner, "on or off");
  runcmd->add_option("--dummy-rate", run.dummy_rate, "Dummy records per combined record");
  runcmd->add_option("--seed", run.seed, "Seed for dummy injection");
  runcmd->add_option("--trace", run.trace_path, "Write the access trace (JSONL) here");
  runcmd->add_flag("--trace-pages", run.trace_pages, "Also trace enclave page touches");
  runcmd->add_option("--observables", run.observables, "Write reducer observations (CSV)");
  runcmd->add_option("--truth-out", run.truth_out, "Write true word counts (CSV)");
  runcmd->add_option("--map-buffer", run.map_buffer, "Map buffer size in records");
  runcmd->add_option("--key-max", run.key_max, "Longest key in bytes");
  runcmd->add_option("--centroids", run.centroids, "Initial centroids (CSV), kmeans");
  runcmd->add_option("--iterations", run.iterations, "KMeans rounds");
  runcmd->add_option("--centroids-out", run.centroids_out, "Final centroids (CSV), kmeans");

  auto* tracecmd = app.add_subcommand("trace", "Compare and certify traces");
  tracecmd->require_subcommand(1);
  std::string diff_a, diff_b;
  auto* tdiff = tracecmd->add_subcommand("diff", "First divergence of two traces");
  tdiff->add_option("A", diff_a)->required();
  tdiff->add_option("B", diff_b)->required();
  std::string check_dir, check_phase;
  bool across_seeds = false;
  auto* tcheck = tracecmd->add_subcommand("check", "Certify that all traces in a directory are identical");
  tcheck->add_option("DIR", check_dir)->required();
  tcheck->add_option("--phase", check_phase, "Compare only this phase");
  tcheck->add_flag("--across-seeds", across_seeds, "Allow seed and dummy rate to differ");

  auto* attack = app.add_subcommand("attack", "Adversary experiments");
  attack->require_subcommand(1);
  std::string atk_trace, atk_obs, atk_truth;
  std::size_t atk_top = 100;
  auto* group_size = attack->add_subcommand("group-size", "Estimate group sizes from reducer behavior");
  group_size->add_option("--trace", atk_trace)->required();
  group_size->add_option("--observables", atk_obs)->required();
  group_size->add_option("--truth", atk_truth)->required();
  group_size->add_option("--top", atk_top, "Correlate over the most frequent truth keys");

  std::string bench_app = "wordcount", bench_backend = "sgxmr", bench_out = "csv";
  std::uint64_t bench_records = 4096, bench_seed = 1;
  std::size_t bench_repeat = 1;
  auto* bench = app.add_subcommand("bench", "Cost of a job on the oblivious pipeline or the ORAM baseline");
  bench->add_option("--app", bench_app, "wordcount or kmeans");
  bench->add_option("--records", bench_records, "Input records");
  bench->add_option("--backend", bench_backend, "sgxmr or oram");
  bench->add_option("--repeat", bench_repeat, "Repetitions");
  bench->add_option("--seed", bench_seed, "Corpus and key seed");
  bench->add_option("--out", bench_out, "csv (stdout) or a file path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int rc = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*encode) code = cmd_encode(enc, out);
    else if (*decode) code = cmd_decode(dec);
    else if (*runcmd) code = cmd_run(run, out);
    else if (*tdiff) code = cmd_trace_diff(diff_a, diff_b, out);
    else if (*tcheck) code = cmd_trace_check(check_dir, check_phase, across_seeds, out);
    else if (*group_size) code = cmd_attack(atk_trace, atk_obs, atk_truth, atk_top, out, err);
    else if (*bench) code = cmd_bench(bench_app, bench_records, bench_backend, bench_repeat, bench_seed, bench_out, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    try {
      std::rethrow_if_nested(e);
    } catch (const std::exception& inner) {
      err << "  caused by: " << inner.what() << '\n';
    } catch (...) {
    }
    return exit_code_for(e);
  }
  return code;
}

}  // namespace sgxmr::cli
