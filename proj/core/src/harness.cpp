// Copyright 2026 The DSNGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dsngd/harness.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsngd/random.hpp"

namespace dsngd::harness {

using json = nlohmann::json;
using lexyf::GroundTruth;
using lexyf::ModelSpec;
using lexyf::NaturalParams;
using optimizers::Algorithm;
using optimizers::RunTrace;
using optimizers::Schedule;
using optimizers::ScheduleKind;
using optimizers::TraceRow;

namespace {

std::string stat_name(lexyf::ClassStatKind kind) {
  switch (kind) {
    case lexyf::ClassStatKind::kMinimalStandard:
      return "minimal";
    case lexyf::ClassStatKind::kOneHot:
      return "onehot";
    case lexyf::ClassStatKind::kCustom:
      return "custom";
  }
  return "unknown";
}

std::string schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kConstant:
      return "const";
    case ScheduleKind::kInverseT:
      return "inv-t";
    case ScheduleKind::kInverseSqrtT:
      return "inv-sqrt";
  }
  return "unknown";
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
  return buf;
}

std::uint64_t parse_hex64(const std::string& text, const char* what) {
  if (text.size() < 3 || text[0] != '0' || text[1] != 'x') {
    throw Error(ErrorCode::kIo,
                std::string(what) + ": expected 0x-prefixed hash");
  }
  std::uint64_t v = 0;
  const auto res =
      std::from_chars(text.data() + 2, text.data() + text.size(), v, 16);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kIo, std::string(what) + ": bad hash " + text);
  }
  return v;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::kIo, "cannot open for writing: " + tmp);
    }
    out << content;
    if (!out.flush()) {
      throw Error(ErrorCode::kIo, "write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot move " + tmp + " to " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open for reading: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void validate(const ExperimentConfig& config) {
  std::string problems;
  const auto complain = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (config.s < 2) complain("s must be at least 2");
  if (config.m < 2) complain("m must be at least 2");
  if (config.steps < 0) complain("steps must be nonnegative");
  if (config.eval_every < 1) complain("eval-every must be at least 1");
  if (config.algorithms.empty()) complain("at least one algorithm required");
  if (!(config.kappa > 0.0)) complain("kappa must be positive");
  if (!(config.schedule.c > 0.0)) complain("schedule scale c must be positive");
  if (!(config.schedule.t0 >= 0.0)) complain("schedule offset t0 must be >= 0");
  if (config.schedule.kind != ScheduleKind::kConstant &&
      config.schedule.t0 <= 0.0) {
    complain("decaying schedules need t0 > 0 (step 0 divides by t0)");
  }
  if (config.stat == lexyf::ClassStatKind::kCustom) {
    complain("custom class statistics are a library feature, not a CLI one");
  }
  if (config.stat == lexyf::ClassStatKind::kOneHot) {
    for (Algorithm a : config.algorithms) {
      if (a == Algorithm::kSngdOracle) {
        complain("the sngd oracle cannot run one-hot specs (singular Fisher)");
      }
    }
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::kConfig, "invalid config: " + problems);
  }
}

ModelSpec spec_from_config(const ExperimentConfig& config) {
  switch (config.stat) {
    case lexyf::ClassStatKind::kOneHot:
      return ModelSpec::one_hot(config.s, config.m);
    case lexyf::ClassStatKind::kMinimalStandard:
      return ModelSpec::minimal_standard(config.s, config.m);
    case lexyf::ClassStatKind::kCustom:
      break;
  }
  throw Error(ErrorCode::kConfig,
              "spec_from_config: unsupported statistic kind");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  json j;
  j["s"] = config.s;
  j["m"] = config.m;
  j["stat"] = stat_name(config.stat);
  json algos = json::array();
  for (Algorithm a : config.algorithms) {
    algos.push_back(optimizers::algorithm_name(a));
  }
  j["algorithms"] = algos;
  j["schedule"] = {{"kind", schedule_name(config.schedule.kind)},
                   {"c", config.schedule.c},
                   {"t0", config.schedule.t0}};
  j["steps"] = config.steps;
  j["eval_every"] = config.eval_every;
  j["seed"] = config.seed;
  j["kappa"] = config.kappa;
  // Paths stay out: the hash identifies the experiment, not where it lives.
  return fnv1a(j.dump());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

GroundTruth load_ground_truth(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo,
                "ground truth " + path + ": JSON parse error: " + e.what());
  }
  try {
    const int s = j.at("s").get<int>();
    const int m = j.at("m").get<int>();
    const auto& cells = j.at("table");
    if (!cells.is_array() ||
        static_cast<int>(cells.size()) != m * s) {
      throw Error(ErrorCode::kIo, "ground truth " + path +
                                      ": table must hold m*s entries");
    }
    Eigen::MatrixXd table(m, s);
    for (int x = 0; x < m; ++x) {
      for (int y = 0; y < s; ++y) {
        table(x, y) = cells.at(x * s + y).get<double>();
      }
    }
    return GroundTruth::from_table(std::move(table));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo,
                "ground truth " + path + ": bad schema: " + e.what());
  }
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
  // Hand-rolled serialization so the byte stream is a pure function of the
  // table (fixed %.17g forms, fixed field order).
  std::string out = "{\"s\": " + std::to_string(truth.s()) +
                    ", \"m\": " + std::to_string(truth.m()) + ", \"table\": [";
  for (int x = 0; x < truth.m(); ++x) {
    for (int y = 0; y < truth.s(); ++y) {
      if (x != 0 || y != 0) out += ", ";
      out += format_double(truth.table()(x, y));
    }
  }
  out += "]}\n";
  write_file_atomic(path, out);
}

GeneratedTruth gen_ground_truth(int s, int m, GenMode mode,
                                std::uint64_t seed) {
  if (s < 2 || m < 2) {
    throw Error(ErrorCode::kConfig, "gen_ground_truth: need s, m >= 2");
  }
  Rng rng(seed);
  if (mode == GenMode::kInModel) {
    const ModelSpec spec = ModelSpec::minimal_standard(s, m);
    NaturalParams eta = NaturalParams::zero(spec);
    for (int i = 0; i < spec.alpha_dim(); ++i) {
      eta.alpha(i) = uniform(rng, -2.0, 2.0);
    }
    for (int i = 0; i < spec.s(); ++i) {
      for (int j = 0; j < spec.t(); ++j) {
        eta.beta(i, j) = uniform(rng, -2.0, 2.0);
      }
    }
    Eigen::MatrixXd table = lexyf::joint_table(spec, eta);
    // Exact renormalization guards the 1e-12 invariant against the
    // accumulated enumeration roundoff.
    table /= table.sum();
    return GeneratedTruth{GroundTruth::from_table(std::move(table)),
                          std::move(eta)};
  }

  // Dirichlet(1) over cells: normalized standard exponentials. The floor
  // keeps degenerate draws strictly positive.
  Eigen::MatrixXd table(m, s);
  for (int x = 0; x < m; ++x) {
    for (int y = 0; y < s; ++y) {
      table(x, y) = -std::log1p(-uniform01(rng)) + 1e-12;
    }
  }
  table /= table.sum();
  return GeneratedTruth{GroundTruth::from_table(std::move(table)),
                        std::nullopt};
}

void write_trace_csv(const RunTrace& trace, const std::string& path) {
  std::string out = "t,expected_nll,expected_kl,step_time_ns\n";
  for (const TraceRow& row : trace.rows) {
    out += std::to_string(row.t);
    out += ',';
    out += format_double(row.expected_nll);
    out += ',';
    out += format_double(row.expected_kl);
    out += ',';
    out += std::to_string(row.step_time_ns);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) ||
      line != "t,expected_nll,expected_kl,step_time_ns") {
    throw Error(ErrorCode::kIo, "trace " + path + ": bad header");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    TraceRow row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    const auto fail = [&](const char* what) -> Error {
      return Error(ErrorCode::kIo, "trace " + path + " line " +
                                       std::to_string(lineno) + ": " + what);
    };
    const auto take_comma = [&]() {
      if (p >= end || *p != ',') throw fail("expected comma");
      ++p;
    };
    auto r = std::from_chars(p, end, row.t);
    if (r.ec != std::errc()) throw fail("bad t");
    p = r.ptr;
    take_comma();
    r = std::from_chars(p, end, row.expected_nll);
    if (r.ec != std::errc()) throw fail("bad expected_nll");
    p = r.ptr;
    take_comma();
    r = std::from_chars(p, end, row.expected_kl);
    if (r.ec != std::errc()) throw fail("bad expected_kl");
    p = r.ptr;
    take_comma();
    r = std::from_chars(p, end, row.step_time_ns);
    if (r.ec != std::errc() || r.ptr != end) throw fail("bad step_time_ns");
    if (!rows.empty() && row.t <= rows.back().t) {
      throw fail("t not strictly increasing");
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sidecar_path(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(),
                       suffix) == 0) {
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".meta.json";
  }
  return csv_path + ".meta.json";
}

void write_trace_metadata(const ExperimentConfig& config,
                          const RunTrace& trace, const std::string& csv_path) {
  json j;
  j["algorithm"] = optimizers::algorithm_name(trace.algorithm);
  j["seed"] = trace.seed;
  j["config_hash"] = hex64(config_hash(config));
  j["stream_hash"] = hex64(trace.stream_hash);
  j["diverged"] = trace.diverged;
  j["steps_completed"] = trace.steps_completed;
  j["clamp_events"] = trace.clamp_events;
  j["config"] = {{"s", config.s},
                 {"m", config.m},
                 {"stat", stat_name(config.stat)},
                 {"schedule",
                  {{"kind", schedule_name(config.schedule.kind)},
                   {"c", config.schedule.c},
                   {"t0", config.schedule.t0}}},
                 {"steps", config.steps},
                 {"eval_every", config.eval_every},
                 {"kappa", config.kappa},
                 {"truth_path", config.truth_path}};
  write_file_atomic(sidecar_path(csv_path), j.dump(2) + "\n");
}

RunArtifacts run_experiment(const ExperimentConfig& config,
                            const GroundTruth& truth) {
  validate(config);
  const ModelSpec spec = spec_from_config(config);
  if (truth.m() != config.m || truth.s() != config.s) {
    throw Error(ErrorCode::kConfig,
                "run_experiment: ground truth is " + std::to_string(truth.m()) +
                    "x" + std::to_string(truth.s()) + ", config wants " +
                    std::to_string(config.m) + "x" + std::to_string(config.s));
  }
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::kIo,
                "cannot create output dir " + config.out_dir + ": " +
                    ec.message());
  }

  RunArtifacts artifacts;
  for (Algorithm algo : config.algorithms) {
    optimizers::RunOptions opts;
    opts.steps = config.steps;
    opts.eval_every = config.eval_every;
    opts.seed = config.seed;  // shared across algorithms: common streams
    opts.estimator.kappa = config.kappa;
    RunTrace trace = optimizers::run(spec, algo, config.schedule, truth, opts);

    const std::string csv_path =
        (std::filesystem::path(config.out_dir) /
         (optimizers::algorithm_name(algo) + ".csv"))
            .string();
    write_trace_csv(trace, csv_path);
    write_trace_metadata(config, trace, csv_path);
    artifacts.csv_paths.push_back(csv_path);
    artifacts.traces.push_back(std::move(trace));
  }
  return artifacts;
}

TraceSummary summarize_trace(const std::string& csv_path) {
  TraceSummary s;
  s.file = csv_path;
  const std::vector<TraceRow> rows = read_trace_csv(csv_path);
  if (rows.empty()) {
    throw Error(ErrorCode::kIo, "trace " + csv_path + ": no rows");
  }
  s.final_nll = rows.back().expected_nll;
  s.final_kl = rows.back().expected_kl;
  std::vector<std::int64_t> times;
  for (const TraceRow& row : rows) {
    if (row.step_time_ns > 0) times.push_back(row.step_time_ns);
  }
  if (!times.empty()) {
    auto mid = times.begin() + (times.size() - 1) / 2;
    std::nth_element(times.begin(), mid, times.end());
    s.median_step_ns = *mid;
  }

  json j;
  try {
    j = json::parse(read_file(sidecar_path(csv_path)));
    s.algorithm = j.at("algorithm").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.stream_hash = parse_hex64(j.at("stream_hash").get<std::string>(),
                                "stream_hash");
    s.config_hash = parse_hex64(j.at("config_hash").get<std::string>(),
                                "config_hash");
    s.diverged = j.at("diverged").get<bool>();
    s.steps_completed = j.at("steps_completed").get<std::int64_t>();
    s.clamp_events = j.at("clamp_events").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, "sidecar for " + csv_path +
                                    ": bad schema: " + e.what());
  }
  return s;
}

std::string compare_report(const std::vector<TraceSummary>& summaries,
                           bool* streams_match) {
  bool match = true;
  for (const TraceSummary& s : summaries) {
    if (s.stream_hash != summaries.front().stream_hash) {
      match = false;
    }
  }
  if (streams_match != nullptr) {
    *streams_match = match;
  }

  std::ostringstream out;
  out << "file,algorithm,steps,diverged,final_nll,final_kl,median_step_ns,"
         "clamp_events,stream_hash\n";
  for (const TraceSummary& s : summaries) {
    out << s.file << ',' << s.algorithm << ',' << s.steps_completed << ','
        << (s.diverged ? "yes" : "no") << ',' << format_double(s.final_nll)
        << ',' << format_double(s.final_kl) << ',' << s.median_step_ns << ','
        << s.clamp_events << ',' << hex64(s.stream_hash) << '\n';
  }
  out << (match ? "streams: consistent\n" : "streams: MISMATCH\n");
  return out.str();
}

}  // namespace dsngd::harness
