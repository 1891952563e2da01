#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/stat.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ufl/core.hpp"
#include "ufl/estimators.hpp"
#include "ufl/harness.hpp"
#include "ufl/hashing.hpp"
#include "ufl/oracle.hpp"

using nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ordered_json to_json(const ufl::Instance& inst) { return {{"d", inst.d}, {"delta", inst.delta}, {"f", inst.f}}; }

ordered_json to_json(const ufl::EstimateReport& r) {
  ordered_json j;
  j["algo"] = r.algo;
  j["estimate"] = r.estimate;
  if (r.algo == "offline") j["mp_cost"] = r.mp_cost;
  j["seed"] = r.seed;
  j["m"] = r.m;
  j["samples"] = r.samples;
  j["failures"] = r.failures;
  j["unreliable"] = r.unreliable;
  j["space_bytes"] = r.space_bytes;
  if (r.algo == "one-pass") {
    j["T"] = r.T;
    j["c"] = r.c;
    j["gamma"] = r.gamma;
    j["lambda"] = r.lambda;
    j["K"] = r.K;
    j["fallback"] = r.fallback;
    auto& lv = j["levels"] = ordered_json::array();
    for (const auto& l : r.levels)
      lv.push_back({{"level", l.level}, {"z", l.z}, {"samples", l.samples}, {"failures", l.failures}, {"support", l.support}});
    if (!r.trace.empty()) {
      auto& tr = j["trace"] = ordered_json::array();
      for (const auto& t : r.trace)
        tr.push_back({{"level", t.level}, {"bucket", t.bucket}, {"c_hat", t.c_hat}, {"n_a", t.n_a}, {"accepted", t.accepted}});
    }
  }
  if (!r.sample_records.empty()) {
    std::size_t nil = 0;
    for (const auto& s : r.sample_records) nil += s.nil;
    j["nil_samples"] = nil;
  }
  return j;
}

bool is_regular_file(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode);
}

ufl::Stream load_stream(const std::string& path) {
  if (path == "-") return ufl::read_stream(std::cin);
  return ufl::read_stream_file(path);
}

void emit(const ordered_json& j, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << j.dump() << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << j.dump() << '\n';
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

// Wall-clock data is kept out of the report so reruns compare byte for byte.
void emit_timing(bool enabled, const std::string& command, const Timer& t) {
  if (!enabled) return;
  ordered_json j{{"type", "timing"}, {"command", command}, {"wall_seconds", t.seconds()},
                 {"timestamp", std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count()}};
  std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming estimators for Euclidean uniform facility location cost"};
  app.require_subcommand(1);
  bool timing = false;
  app.add_flag("--timing", timing, "Print wall time and a timestamp to stderr");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a stream file");
  std::string gen_kind = "uniform", gen_out = "-", gen_answer = "yes";
  ufl::GeneratorSpec spec;
  gen->add_option("--kind", gen_kind, "uniform | clustered | example_hard | bhm")->capture_default_str();
  gen->add_option("--n", spec.n, "Number of points (bhm: matching size)")->required();
  gen->add_option("--d", spec.d, "Dimension")->capture_default_str();
  auto* gen_delta = gen->add_option("--delta", spec.delta, "Grid side, a power of two (example_hard: 0 = smallest feasible)")->capture_default_str();
  gen->add_option("--f", spec.f, "Opening cost")->capture_default_str();
  gen->add_option("--k", spec.k, "Clusters")->capture_default_str();
  gen->add_option("--radius", spec.radius, "Cluster radius (0: delta/100)")->capture_default_str();
  gen->add_option("--answer", gen_answer, "bhm: yes | no")->capture_default_str();
  gen->add_option("--seed", spec.seed, "Seed")->capture_default_str();
  gen->add_flag("--shuffle", spec.shuffled, "Shuffle the insertion order");
  gen->add_option("--deletion-rate", spec.deletion_rate, "Fraction of inserted points later deleted")->capture_default_str();
  gen->add_option("-o,--output", gen_out, "Output file (- for stdout)")->capture_default_str();

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exact r_p values and the greedy facility solution");
  std::string orc_stream, orc_out = "-";
  orc->add_option("--stream", orc_stream, "Stream file (- for stdin)")->required();
  orc->add_option("-o,--output", orc_out, "Output file")->capture_default_str();

  // hash-verify
  auto* hv = app.add_subcommand("hash-verify", "Check diameter and consistency of a hash construction");
  std::string hv_kind = "face";
  int hv_d = 2;
  double hv_ell = 1, hv_gamma = 0;
  std::size_t hv_trials = 1000;
  std::uint64_t hv_seed = 0;
  hv->add_option("--construction", hv_kind, "grid | face | carve")->capture_default_str();
  hv->add_option("--d", hv_d, "Dimension")->capture_default_str();
  hv->add_option("--ell", hv_ell, "Diameter bound")->capture_default_str();
  hv->add_option("--gamma", hv_gamma, "Gap (0: construction default)")->capture_default_str();
  hv->add_option("--trials", hv_trials, "Sampled sets")->capture_default_str();
  hv->add_option("--seed", hv_seed, "Seed")->capture_default_str();

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate the facility location cost of a stream");
  std::string algo = "two-pass", est_stream, est_hash = "face", state_path, est_out = "-";
  std::uint64_t est_seed = 0;
  bool json = false, materialize = false;
  ufl::EstimatorOptions opt;
  est->add_option("--algo", algo, "two-pass | random-order | one-pass | offline")->capture_default_str();
  est->add_option("--stream", est_stream, "Stream file")->required();
  est->add_option("--hash", est_hash, "grid | face | carve")->capture_default_str();
  est->add_option("--gamma", opt.gamma, "Hash gap (0: construction default)")->capture_default_str();
  est->add_option("--m", opt.m, "Samples, or samplers per level for one-pass (0: default)")->capture_default_str();
  est->add_option("--T", opt.T, "One-pass counters per bucket (0: default)")->capture_default_str();
  est->add_option("--c", opt.c, "Tester threshold")->capture_default_str();
  est->add_option("--K", opt.K, "One-pass sparse-recovery capacity (0: off)")->capture_default_str();
  est->add_option("--retries", opt.retries, "Fresh attempts for a failed sampler")->capture_default_str();
  est->add_option("--seed", est_seed, "Seed")->capture_default_str();
  est->add_option("--state", state_path, "Two-pass sidecar file (default <stream>.pass1.json)");
  est->add_flag("--materialize", materialize, "Update every sketch cell instead of replaying the net vector");
  est->add_flag("--trace", opt.trace, "One-pass: record sampled buckets");
  est->add_flag("--json", json, "Print the full JSON report (default: the estimate only)");
  est->add_option("-o,--output", est_out, "Output file")->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "Run estimators against the oracle on generated instances");
  std::string bench_kind = "uniform", bench_algos = "offline,two-pass", bench_format = "json", bench_out = "-",
              bench_hash = "face";
  ufl::GeneratorSpec bspec;
  std::size_t reps = 5;
  std::uint64_t bench_seed = 0;
  int instances = 1;
  ufl::EstimatorOptions bopt;
  bench->add_option("--kind", bench_kind, "Generator kind")->capture_default_str();
  bench->add_option("--n", bspec.n, "Points")->required();
  bench->add_option("--d", bspec.d, "Dimension")->capture_default_str();
  bench->add_option("--delta", bspec.delta, "Grid side")->capture_default_str();
  bench->add_option("--f", bspec.f, "Opening cost")->capture_default_str();
  bench->add_option("--k", bspec.k, "Clusters")->capture_default_str();
  bench->add_option("--deletion-rate", bspec.deletion_rate, "Deletion rate")->capture_default_str();
  bench->add_option("--instances", instances, "Instances (generator seeds seed..seed+instances-1)")->capture_default_str();
  bench->add_option("--algos", bench_algos, "Comma-separated algorithms")->capture_default_str();
  bench->add_option("--reps", reps, "Repetitions per instance and algorithm")->capture_default_str();
  bench->add_option("--hash", bench_hash, "Hash for one-pass")->capture_default_str();
  bench->add_option("--gamma", bopt.gamma, "Hash gap")->capture_default_str();
  bench->add_option("--m", bopt.m, "Samples")->capture_default_str();
  bench->add_option("--T", bopt.T, "Counters")->capture_default_str();
  bench->add_option("--K", bopt.K, "Sparse-recovery capacity")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Seed")->capture_default_str();
  bench->add_option("--format", bench_format, "json | csv")->capture_default_str();
  bench->add_option("-o,--output", bench_out, "Output file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  Timer timer;
  try {
    if (*gen) {
      spec.kind = ufl::parse_gen_kind(gen_kind);
      if (spec.kind == ufl::GenKind::example_hard && gen_delta->count() == 0) spec.delta = 0;
      if (gen_answer != "yes" && gen_answer != "no") throw UsageError("--answer must be yes or no");
      spec.bhm_yes = gen_answer == "yes";
      ufl::Stream s = ufl::generate(spec);
      if (gen_out == "-") ufl::write_stream(std::cout, s);
      else ufl::write_stream_file(gen_out, s);
      emit_timing(timing, "gen", timer);
      return 0;
    }

    if (*orc) {
      ufl::Stream s = load_stream(orc_stream);
      auto rep = ufl::validate_stream(s.updates);
      if (!rep.ok) throw std::runtime_error("update " + std::to_string(rep.index) + ": " + rep.message);
      auto pts = ufl::live_points(s.updates);
      auto rp = ufl::compute_rp(pts, s.inst.f);
      if (orc_out != "-") std::ofstream(orc_out, std::ios::trunc);
      emit({{"type", "config"}, {"command", "oracle"}, {"instance", to_json(s.inst)}, {"n", pts.size()}}, orc_out);
      double total = 0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        total += rp[i];
        emit({{"type", "point"}, {"index", i}, {"point", pts[i]}, {"r_p", rp[i]}}, orc_out);
      }
      ufl::MpSolution mp;
      if (!pts.empty()) mp = ufl::mp_facilities(pts, s.inst.f, rp);
      for (const auto& fac : mp.facilities) emit({{"type", "facility"}, {"point", fac}}, orc_out);
      emit({{"type", "summary"}, {"sum_rp", total}, {"mp_cost", mp.cost}, {"facilities", mp.facilities.size()}}, orc_out);
      emit_timing(timing, "oracle", timer);
      return 0;
    }

    if (*hv) {
      auto kind = ufl::parse_hash_kind(hv_kind);
      auto h = ufl::make_hash(kind, hv_d, hv_ell, hv_gamma, hv_seed);
      auto r = ufl::verify_hash(*h, hv_trials, hv_seed);
      ordered_json j{{"type", "hash-verify"},
                     {"construction", hv_kind},
                     {"d", hv_d},
                     {"ell", r.ell},
                     {"gamma", r.gamma},
                     {"lambda", r.lambda},
                     {"trials", hv_trials},
                     {"seed", hv_seed},
                     {"max_diameter", r.max_diameter},
                     {"max_consistency", r.max_consistency},
                     {"max_enumerated", r.max_enumerated},
                     {"pairs_checked", r.pairs_checked},
                     {"sets_checked", r.sets_checked},
                     {"diameter_ok", r.max_diameter <= r.ell},
                     {"consistency_ok", static_cast<double>(r.max_consistency) <= r.lambda}};
      std::cout << j.dump() << '\n';
      emit_timing(timing, "hash-verify", timer);
      return j["diameter_ok"].get<bool>() && j["consistency_ok"].get<bool>() ? 0 : kExitRuntime;
    }

    if (*est) {
      opt.hash = ufl::parse_hash_kind(est_hash);
      opt.replay = !materialize;
      ufl::EstimateReport rep;
      ordered_json config{{"algo", algo},     {"stream", est_stream}, {"hash", est_hash}, {"gamma", opt.gamma},
                          {"m", opt.m},       {"T", opt.T},           {"c", opt.c},       {"K", opt.K},
                          {"retries", opt.retries}, {"seed", est_seed}, {"materialize", materialize}};
      if (algo == "two-pass") {
        if (est_stream == "-" || !is_regular_file(est_stream))
          throw UsageError("two-pass estimation reads the stream twice; pass a regular file, not a pipe");
        const std::string sidecar = state_path.empty() ? est_stream + ".pass1.json" : state_path;
        {
          ufl::Stream s = ufl::read_stream_file(est_stream);
          ufl::save_two_pass_state(sidecar, ufl::two_pass_first(s, opt.m, est_seed, opt));
        }
        ufl::Stream s = ufl::read_stream_file(est_stream);
        rep = ufl::two_pass_second(s, ufl::load_two_pass_state(sidecar));
      } else if (algo == "random-order" || algo == "one-pass" || algo == "offline") {
        rep = ufl::run_algo(algo, load_stream(est_stream), est_seed, opt);
      } else {
        throw UsageError("unknown --algo '" + algo + "'");
      }
      if (est_out != "-") std::ofstream(est_out, std::ios::trunc);
      if (json) emit({{"type", "estimate"}, {"config", config}, {"report", to_json(rep)}}, est_out);
      else {
        std::ostringstream os;
        os.precision(17);
        os << rep.estimate;
        if (est_out == "-") std::cout << os.str() << '\n';
        else std::ofstream(est_out) << os.str() << '\n';
      }
      emit_timing(timing, "estimate", timer);
      if (rep.unreliable) {
        std::cerr << "warning: more than 20% of the samplers failed; the estimate is unreliable\n";
        return kExitRuntime;
      }
      return 0;
    }

    if (*bench) {
      std::vector<std::string> algos;
      std::stringstream ss(bench_algos);
      for (std::string a; std::getline(ss, a, ',');)
        if (!a.empty()) algos.push_back(a);
      bspec.kind = ufl::parse_gen_kind(bench_kind);
      bopt.hash = ufl::parse_hash_kind(bench_hash);
      if (bench_format != "json" && bench_format != "csv") throw UsageError("--format must be json or csv");
      std::vector<ufl::GeneratorSpec> specs;
      for (int i = 0; i < instances; ++i) {
        ufl::GeneratorSpec g = bspec;
        g.seed = bench_seed + static_cast<std::uint64_t>(i);
        specs.push_back(g);
      }
      auto table = ufl::run_experiment(specs, algos, reps, bench_seed, bopt);
      std::ostringstream out;
      out.precision(10);
      // wall time is left out so tables compare byte for byte
      if (bench_format == "csv") {
        out << "instance,algo,seed,estimate,sum_rp,mp_cost,ratio,space_bytes,unreliable,fallback\n";
        for (const auto& r : table.rows)
          out << r.instance << ',' << r.algo << ',' << r.seed << ',' << r.estimate << ',' << r.sum_rp << ',' << r.mp_cost
              << ',' << r.ratio << ',' << r.space_bytes << ',' << r.unreliable << ',' << r.fallback << '\n';
      } else {
        ordered_json cfg{{"type", "config"}, {"command", "bench"}, {"kind", bench_kind}, {"n", bspec.n},
                         {"d", bspec.d},     {"delta", bspec.delta}, {"f", bspec.f},     {"instances", instances},
                         {"algos", algos},   {"reps", reps},         {"seed", bench_seed}, {"m", bopt.m}};
        out << cfg.dump() << '\n';
        for (const auto& r : table.rows)
          out << ordered_json{{"type", "row"},       {"instance", r.instance}, {"algo", r.algo},
                              {"seed", r.seed},       {"estimate", r.estimate}, {"sum_rp", r.sum_rp},
                              {"mp_cost", r.mp_cost}, {"ratio", r.ratio},       {"space_bytes", r.space_bytes},
                              {"unreliable", r.unreliable}, {"fallback", r.fallback}}
                     .dump()
              << '\n';
        for (const auto& s : table.summary)
          out << ordered_json{{"type", "summary"}, {"instance", s.instance}, {"algo", s.algo}, {"runs", s.runs},
                              {"q10", s.q10},       {"q50", s.q50},           {"q90", s.q90}, {"unreliable", s.unreliable}}
                     .dump()
              << '\n';
      }
      if (bench_out == "-") std::cout << out.str();
      else std::ofstream(bench_out, std::ios::binary) << out.str();
      emit_timing(timing, "bench", timer);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ufl::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
