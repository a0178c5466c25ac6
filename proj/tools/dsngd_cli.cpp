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

// Command line for the DSNGD experiment harness.
//
//   dsngd gen     write a ground-truth JSON table
//   dsngd run     stream steps against a ground truth, write trace CSVs
//   dsngd check   run the invariant suites
//   dsngd bench   per-step cost ladder and slope fits
//   dsngd compare summarize traces and verify the shared-stream contract
//
// Exit codes: 0 success, 1 check/comparison failure, 2 configuration or I/O
// error, 3 divergence.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsngd/bench.hpp"
#include "dsngd/checks.hpp"
#include "dsngd/errors.hpp"
#include "dsngd/harness.hpp"
#include "dsngd/lexyf.hpp"
#include "dsngd/optimizers.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CliOptions {
  std::uint64_t seed = 0;
  int s = 2;
  int m = 2;
  std::string stat = "minimal";
  std::string mode = "table";
  std::vector<std::string> algos;
  std::int64_t steps = 0;
  std::int64_t eval_every = 1000;
  std::string schedule = "inv-t";
  double c = 1.0;
  double t0 = 10.0;
  double kappa = 1.0;
  std::string out;
  std::string truth;
  std::string scale = "quick";
  std::string sizes;
  std::vector<std::string> traces;
};

dsngd::optimizers::Schedule parse_schedule(const CliOptions& o) {
  dsngd::optimizers::Schedule sched;
  if (o.schedule == "const") {
    sched.kind = dsngd::optimizers::ScheduleKind::kConstant;
  } else if (o.schedule == "inv-t") {
    sched.kind = dsngd::optimizers::ScheduleKind::kInverseT;
  } else {
    sched.kind = dsngd::optimizers::ScheduleKind::kInverseSqrtT;
  }
  sched.c = o.c;
  sched.t0 = o.t0;
  return sched;
}

int run_gen(const CliOptions& o) {
  const dsngd::harness::GenMode mode = o.mode == "in-model"
                                           ? dsngd::harness::GenMode::kInModel
                                           : dsngd::harness::GenMode::kTable;
  const dsngd::harness::GeneratedTruth gen =
      dsngd::harness::gen_ground_truth(o.s, o.m, mode, o.seed);
  dsngd::harness::save_ground_truth(gen.truth, o.out);
  std::printf("wrote %s (s=%d m=%d mode=%s seed=%llu)\n", o.out.c_str(), o.s,
              o.m, o.mode.c_str(), static_cast<unsigned long long>(o.seed));
  return kExitOk;
}

int run_run(const CliOptions& o, bool s_given, bool m_given) {
  const dsngd::lexyf::GroundTruth truth =
      dsngd::harness::load_ground_truth(o.truth);
  if ((s_given && o.s != truth.s()) || (m_given && o.m != truth.m())) {
    throw dsngd::Error(dsngd::ErrorCode::kConfig,
                       "--s/--m disagree with the ground-truth table (" +
                           std::to_string(truth.s()) + "x" +
                           std::to_string(truth.m()) + ")");
  }

  dsngd::harness::ExperimentConfig config;
  config.s = truth.s();
  config.m = truth.m();
  config.stat = o.stat == "onehot"
                    ? dsngd::lexyf::ClassStatKind::kOneHot
                    : dsngd::lexyf::ClassStatKind::kMinimalStandard;
  std::vector<std::string> algos =
      o.algos.empty() ? std::vector<std::string>{"dsngd", "sgd"} : o.algos;
  for (const std::string& name : algos) {
    const auto algo = dsngd::optimizers::algorithm_from_name(name);
    if (!algo) {
      throw dsngd::Error(dsngd::ErrorCode::kConfig,
                         "unknown algorithm " + name);
    }
    if (std::find(config.algorithms.begin(), config.algorithms.end(), *algo) ==
        config.algorithms.end()) {
      config.algorithms.push_back(*algo);
    }
  }
  config.schedule = parse_schedule(o);
  config.steps = o.steps;
  config.eval_every = o.eval_every;
  config.seed = o.seed;
  config.kappa = o.kappa;
  config.truth_path = o.truth;
  config.out_dir = o.out;

  const dsngd::harness::RunArtifacts artifacts =
      dsngd::harness::run_experiment(config, truth);
  bool diverged = false;
  for (std::size_t i = 0; i < artifacts.traces.size(); ++i) {
    const dsngd::optimizers::RunTrace& tr = artifacts.traces[i];
    const dsngd::optimizers::TraceRow& last = tr.rows.back();
    std::printf("%s: %s steps=%lld final_nll=%.6f final_kl=%.6g clamps=%lld%s\n",
                dsngd::optimizers::algorithm_name(tr.algorithm).c_str(),
                artifacts.csv_paths[i].c_str(),
                static_cast<long long>(tr.steps_completed), last.expected_nll,
                last.expected_kl, static_cast<long long>(tr.clamp_events),
                tr.diverged ? " DIVERGED" : "");
    diverged = diverged || tr.diverged;
  }
  return diverged ? kExitDivergence : kExitOk;
}

int run_check(const CliOptions& o) {
  const dsngd::checks::Scale scale = o.scale == "full"
                                         ? dsngd::checks::Scale::kFull
                                         : dsngd::checks::Scale::kQuick;
  const std::vector<dsngd::checks::CheckResult> results =
      dsngd::checks::run_checks(scale, o.seed == 0 ? 2026 : o.seed);
  std::fputs(dsngd::checks::render_report(results).c_str(), stdout);
  return dsngd::checks::all_passed(results) ? kExitOk : kExitCheckFailure;
}

std::vector<std::pair<int, int>> parse_sizes(const std::string& text) {
  if (text.empty()) {
    return dsngd::bench::default_sizes();
  }
  std::vector<std::pair<int, int>> sizes;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const std::size_t colon = item.find(':');
    int s = 0;
    int m = 0;
    try {
      if (colon == std::string::npos) {
        throw std::invalid_argument("missing :");
      }
      s = std::stoi(item.substr(0, colon));
      m = std::stoi(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw dsngd::Error(dsngd::ErrorCode::kConfig,
                         "--sizes wants s:m[,s:m...], got '" + item + "'");
    }
    sizes.emplace_back(s, m);
    pos = comma == std::string::npos ? text.size() : comma + 1;
  }
  return sizes;
}

int run_bench_cmd(const CliOptions& o) {
  dsngd::bench::BenchOptions bopts;
  if (o.seed != 0) {
    bopts.seed = o.seed;
  }
  const dsngd::bench::BenchReport report =
      dsngd::bench::run_bench(parse_sizes(o.sizes), bopts);
  if (o.out.empty()) {
    std::fputs(report.csv().c_str(), stdout);
  } else {
    FILE* f = std::fopen(o.out.c_str(), "wb");
    if (f == nullptr) {
      throw dsngd::Error(dsngd::ErrorCode::kIo, "cannot write " + o.out);
    }
    const std::string csv = report.csv();
    std::fwrite(csv.data(), 1, csv.size(), f);
    std::fclose(f);
    std::printf("wrote %s\n", o.out.c_str());
  }
  std::fputs(report.summary().c_str(), stdout);
  return kExitOk;
}

int run_compare(const CliOptions& o) {
  std::vector<dsngd::harness::TraceSummary> summaries;
  summaries.reserve(o.traces.size());
  for (const std::string& path : o.traces) {
    summaries.push_back(dsngd::harness::summarize_trace(path));
  }
  bool streams_match = false;
  std::fputs(
      dsngd::harness::compare_report(summaries, &streams_match).c_str(),
      stdout);
  return streams_match ? kExitOk : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DSNGD experiment harness"};
  app.require_subcommand(1);
  CliOptions o;

  CLI::App* gen = app.add_subcommand("gen", "Write a ground-truth JSON table");
  gen->add_option("--seed", o.seed, "RNG seed");
  gen->add_option("--s", o.s, "number of classes")->required();
  gen->add_option("--m", o.m, "number of feature values")->required();
  gen->add_option("--mode", o.mode, "in-model | table (default table)")
      ->check(CLI::IsMember({"in-model", "table"}));
  gen->add_option("--out", o.out, "output JSON path")->required();

  CLI::App* run = app.add_subcommand(
      "run", "Run algorithms against a ground truth, write trace CSVs");
  run->add_option("--truth", o.truth, "ground-truth JSON path")->required();
  run->add_option("--out", o.out, "output directory")->required();
  CLI::Option* s_opt =
      run->add_option("--s", o.s, "expected class count (cross-checked)");
  CLI::Option* m_opt =
      run->add_option("--m", o.m, "expected feature count (cross-checked)");
  run->add_option("--stat", o.stat, "class statistic: minimal | onehot")
      ->check(CLI::IsMember({"minimal", "onehot"}));
  run->add_option("--algo", o.algos,
                  "algorithm (repeatable): sgd | dsngd | sngd")
      ->check(CLI::IsMember({"sgd", "dsngd", "sngd"}));
  run->add_option("--steps", o.steps, "number of steps")->required();
  run->add_option("--eval-every", o.eval_every, "evaluation interval");
  run->add_option("--schedule", o.schedule,
                  "step-size schedule: const | inv-t | inv-sqrt")
      ->check(CLI::IsMember({"const", "inv-t", "inv-sqrt"}));
  run->add_option("--c", o.c, "schedule scale");
  run->add_option("--t0", o.t0, "schedule offset");
  run->add_option("--kappa", o.kappa, "estimator prior weight");
  run->add_option("--seed", o.seed, "RNG seed (shared across algorithms)");

  CLI::App* check = app.add_subcommand("check", "Run the invariant suites");
  check->add_option("--scale", o.scale, "quick | full (default quick)")
      ->check(CLI::IsMember({"quick", "full"}));
  check->add_option("--seed", o.seed, "suite RNG seed");

  CLI::App* bench =
      app.add_subcommand("bench", "Per-step cost ladder and slope fits");
  bench->add_option("--sizes", o.sizes,
                    "ladder as s:m[,s:m...] (default built-in)");
  bench->add_option("--seed", o.seed, "RNG seed");
  bench->add_option("--out", o.out, "CSV output path (default stdout)");

  CLI::App* compare = app.add_subcommand(
      "compare", "Summarize traces; fails when sample streams differ");
  compare->add_option("traces", o.traces, "trace CSV paths")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) {
      return run_gen(o);
    }
    if (run->parsed()) {
      return run_run(o, s_opt->count() > 0, m_opt->count() > 0);
    }
    if (check->parsed()) {
      return run_check(o);
    }
    if (bench->parsed()) {
      return run_bench_cmd(o);
    }
    if (compare->parsed()) {
      return run_compare(o);
    }
  } catch (const dsngd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case dsngd::ErrorCode::kConfig:
      case dsngd::ErrorCode::kIo:
        return kExitConfig;
      case dsngd::ErrorCode::kDivergence:
        return kExitDivergence;
      default:
        return kExitCheckFailure;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckFailure;
  }
  return kExitConfig;
}
