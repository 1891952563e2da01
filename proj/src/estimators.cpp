#include "ufl/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ufl/oracle.hpp"
#include "ufl/prf.hpp"

namespace ufl {

namespace {

constexpr std::uint64_t kTagLevel = 0x6c76;
constexpr std::uint64_t kTagLevelSeed = 0x6c7365;
constexpr std::uint64_t kTagSample = 0x73616d70;
constexpr std::uint64_t kTagH = 0x68;
constexpr std::uint64_t kTagSampler = 0x4c30;
constexpr std::uint64_t kTagDistinct = 0x4443;
constexpr std::uint64_t kTagHash = 0x6873;
constexpr std::uint64_t kTagRecovery = 0x5352;

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t j, std::uint64_t attempt) {
  return Prf(seed)(j, attempt, kTagSample);
}

double sampling_ell(double f, int i) { return 0.1 * std::ldexp(f, -i); }
double one_pass_ell(double f, int i) { return std::ldexp(f, -i) / 10; }

// rough live size of an l0 sketch holding `support` keys
std::size_t space_proxy(const SketchConfig& c, double support) {
  double levels = std::ceil(std::log2(std::max(support, 1.0))) + 2;
  return static_cast<std::size_t>(c.reps * levels * c.buckets * 8.0 * (2 + c.key_width + c.payload_width));
}

SampleResult make_result(const TwoLevelResult& tr, const DistinctEstimate& D, int level) {
  SampleResult r;
  r.status = tr.status;
  r.level = level;
  if (tr.status != QueryStatus::ok) return r;
  r.point = key_point(tr.col);
  r.bucket_size = tr.row_sum;
  r.bucket_count = std::max(1.0, D.value);
  r.bucket_count_exact = D.exact;
  r.prob_estimate = std::min(1.0, std::ldexp(1.0, -level) / (r.bucket_count * static_cast<double>(tr.row_sum)));
  return r;
}

void check_stream(const Stream& s) {
  s.inst.validate();
  auto rep = validate_stream(s.updates);
  if (!rep.ok) throw std::invalid_argument("invalid stream at update " + std::to_string(rep.index) + ": " + rep.message);
}

double median_counter(const std::int64_t* c, int T) {
  std::vector<std::int64_t> v(c, c + T);
  std::nth_element(v.begin(), v.begin() + T / 2, v.end());
  return static_cast<double>(v[static_cast<std::size_t>(T / 2)]);
}

} // namespace

// ---------------------------------------------------------------- parameters

std::size_t default_m_sampling(const Instance& inst) {
  double dl = static_cast<double>(inst.L());
  return static_cast<std::size_t>(std::min(4096.0, 64.0 * std::ceil(dl * dl)));
}

std::size_t default_m_one_pass(double gamma, double lambda) {
  return static_cast<std::size_t>(std::min(8192.0, std::ceil(64.0 * gamma * gamma * lambda * lambda)));
}

int default_T(const Instance& inst) { return std::min(256, 8 * inst.L()); }

std::unique_ptr<ConsistentHash> make_level_hash(const Instance& inst, double ell, const EstimatorOptions& opt,
                                                std::uint64_t seed) {
  switch (opt.hash) {
  case HashKind::grid: return make_grid_hash(inst.d, ell);
  case HashKind::face: {
    double g = opt.gamma > 0 ? opt.gamma : face_gamma(inst.d);
    return make_face_hash(inst.d, ell, std::max(g, face_min_gamma(inst.d, ell)));
  }
  case HashKind::carve: return make_ball_carving_hash(inst.d, ell, opt.gamma > 0 ? opt.gamma : 8.0, seed);
  }
  throw std::invalid_argument("unknown hash kind");
}

LevelSeeds::LevelSeeds(std::uint64_t seed) {
  Prf p(seed);
  subsample = p(1);
  rows = p(2);
  cols = p(3);
  distinct = p(4);
}

SketchConfig level_row_config(std::uint64_t seed) { return l0_config(1, seed); }

SketchConfig level_col_config(const Instance& inst, std::uint64_t seed) {
  SketchConfig c = l0_config(inst.d, seed);
  c.levels = std::min(64, SketchConfig::levels_for(inst.L()));
  return c;
}

// ---------------------------------------------------------------- level sampler

LevelSampler::LevelSampler(const Instance& inst, int level, std::uint64_t seed, const EstimatorOptions& opt)
    : inst_(inst), level_(level), seeds_(seed), sub_{seeds_.subsample, 0, level},
      hash_(make_level_hash(inst, sampling_ell(inst.f, level), opt, seeds_.subsample ^ kTagHash)),
      two_(level_row_config(seeds_.rows), level_col_config(inst, seeds_.cols)), distinct_(1, seeds_.distinct) {
  if (level < 0 || level > inst.L()) throw std::invalid_argument("level outside 0..L");
}

void LevelSampler::update(const StreamUpdate& u) {
  if (!sub_.member(u.point)) return;
  Key row{hash_->bucket(u.point).key()};
  two_.update(row, point_key(u.point), u.sign);
  distinct_.update(row, u.sign);
}

SampleResult LevelSampler::query() const { return make_result(two_.query(), distinct_.estimate(), level_); }

std::size_t LevelSampler::space_bytes() const { return two_.space_bytes() + distinct_.sketch().space_bytes(); }

namespace {

// Live point set with per-level bucket keys cached; evaluates level samplers
// from the aggregated vector.
class ReplayContext {
public:
  ReplayContext(const Instance& inst, std::vector<GridPoint> pts, const EstimatorOptions& opt)
      : inst_(inst), pts_(std::move(pts)), opt_(opt) {
    dig_.reserve(pts_.size());
    for (const auto& p : pts_) dig_.push_back(digest(p));
  }

  std::size_t size() const { return pts_.size(); }

  SampleResult sample(int level, std::uint64_t seed, std::size_t* space = nullptr) {
    LevelSeeds s(seed);
    Prf sub(s.subsample);
    const std::uint64_t hseed = s.subsample ^ kTagHash;
    const std::vector<std::uint64_t>& bk = buckets(level, hseed);
    std::unordered_map<std::uint64_t, std::size_t> row_of;
    std::vector<RowEntry> rows;
    std::vector<Key> row_keys;
    for (std::size_t k = 0; k < pts_.size(); ++k) {
      if (level > 0 && geometric_level(sub, dig_[k], 0, level) < level) continue;
      auto [it, fresh] = row_of.try_emplace(bk[k], rows.size());
      if (fresh) {
        rows.push_back({Key{bk[k]}, {}});
        row_keys.push_back(Key{bk[k]});
      }
      rows[it->second].cols.emplace_back(point_key(pts_[k]), 1);
    }
    SketchConfig rc = level_row_config(s.rows), cc = level_col_config(inst_, s.cols);
    TwoLevelResult tr = two_level_replay(rc, cc, rows);
    DistinctEstimate D = distinct_replay(1, s.distinct, row_keys);
    if (space) {
      double per_row = rows.empty() ? 0 : 0.0;
      for (const auto& r : rows) per_row += static_cast<double>(r.cols.size()) / static_cast<double>(rows.size());
      std::size_t row_cells = static_cast<std::size_t>(rc.reps * (std::ceil(std::log2(std::max<double>(rows.size(), 1))) + 2));
      *space += space_proxy(rc, static_cast<double>(rows.size())) + row_cells * space_proxy(cc, per_row) +
                space_proxy(DistinctCounter::config(1, 0), static_cast<double>(rows.size()));
    }
    return make_result(tr, D, level);
  }

private:
  const std::vector<std::uint64_t>& buckets(int level, std::uint64_t hseed) {
    // only ball carving draws randomness for its buckets
    std::uint64_t key = opt_.hash == HashKind::carve ? hseed : 0;
    auto it = cache_.find({level, key});
    if (it != cache_.end()) return it->second;
    auto h = make_level_hash(inst_, sampling_ell(inst_.f, level), opt_, hseed);
    std::vector<RealPoint> real;
    real.reserve(pts_.size());
    for (const auto& p : pts_) real.push_back(to_real(p));
    std::vector<std::uint64_t> out;
    out.reserve(pts_.size());
    for (const auto& b : h->bucket_all(real)) out.push_back(b.key());
    if (cache_.size() > 64) cache_.clear();
    return cache_[{level, key}] = std::move(out);
  }

  Instance inst_;
  std::vector<GridPoint> pts_;
  std::vector<std::uint64_t> dig_;
  EstimatorOptions opt_;
  std::map<std::pair<int, std::uint64_t>, std::vector<std::uint64_t>> cache_;
};

SampleResult run_materialized(const Stream& s, int level, std::uint64_t seed, const EstimatorOptions& opt,
                              std::size_t* space = nullptr) {
  LevelSampler ls(s.inst, level, seed, opt);
  for (const auto& u : s.updates) ls.update(u);
  if (space) *space += ls.space_bytes();
  return ls.query();
}

} // namespace

SampleResult level_sample(const Stream& s, int i, std::uint64_t seed, const EstimatorOptions& opt) {
  check_stream(s);
  if (opt.replay) {
    ReplayContext ctx(s.inst, live_points(s.updates), opt);
    return ctx.sample(i, seed);
  }
  return run_materialized(s, i, seed, opt);
}

int effective_levels(const Instance& inst, std::size_t n) {
  int lg = 0;
  while (n >> (lg + 1)) ++lg;
  return std::max(1, std::min(inst.L(), lg + 1));
}

SampleResult importance_sample(const Stream& s, std::uint64_t seed, const EstimatorOptions& opt) {
  check_stream(s);
  auto pts = live_points(s.updates);
  if (pts.empty()) return {};
  int L = effective_levels(s.inst, pts.size());
  int i = 1 + static_cast<int>(Prf(seed)(kTagLevel) % static_cast<std::uint64_t>(L));
  std::uint64_t ls = Prf(seed)(kTagLevelSeed);
  if (opt.replay) {
    ReplayContext ctx(s.inst, std::move(pts), opt);
    return ctx.sample(i, ls);
  }
  return run_materialized(s, i, ls, opt);
}

// ---------------------------------------------------------------- two-pass

namespace {

// Draws m samples with retries; `n` is the live size that bounds the levels.
std::vector<SampleResult> draw_samples(const Stream& view, ReplayContext* ctx, std::size_t n, std::size_t m,
                                       std::uint64_t seed, const EstimatorOptions& opt, std::size_t& failures,
                                       std::size_t& space) {
  std::vector<SampleResult> out;
  out.reserve(m);
  failures = 0;
  if (n == 0) {
    out.assign(m, SampleResult{});
    return out;
  }
  const int L = effective_levels(view.inst, n);
  for (std::size_t j = 0; j < m; ++j) {
    SampleResult r;
    r.status = QueryStatus::fail;
    for (int a = 0; a <= opt.retries && r.status == QueryStatus::fail; ++a) {
      std::uint64_t ss = sample_seed(seed, j, static_cast<std::uint64_t>(a));
      int i = 1 + static_cast<int>(Prf(ss)(kTagLevel) % static_cast<std::uint64_t>(L));
      std::uint64_t ls = Prf(ss)(kTagLevelSeed);
      std::size_t* sp = j == 0 && a == 0 ? &space : nullptr;
      r = ctx ? ctx->sample(i, ls, sp) : run_materialized(view, i, ls, opt, sp);
    }
    if (r.status == QueryStatus::fail) ++failures;
    out.push_back(std::move(r));
  }
  // one sampler was measured; all m share its shape
  space *= m;
  return out;
}

EstimateReport finish_sampling(const std::string& algo, std::uint64_t seed, std::size_t m,
                               const std::vector<SampleResult>& samples, std::size_t failures,
                               const std::vector<double>& rhat, std::size_t space) {
  EstimateReport rep;
  rep.algo = algo;
  rep.seed = seed;
  rep.m = m;
  rep.samples = samples.size();
  rep.failures = failures;
  rep.unreliable = static_cast<double>(failures) > 0.2 * static_cast<double>(std::max<std::size_t>(m, 1));
  rep.space_bytes = space;
  double sum = 0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    SampleRecord rec;
    rec.nil = samples[j].nil();
    rec.level = samples[j].level;
    if (!rec.nil) {
      rec.point = samples[j].point;
      rec.prob = samples[j].prob_estimate;
      rec.rhat = rhat[j];
      rec.term = rec.rhat / rec.prob;
    }
    sum += rec.term;
    rep.sample_records.push_back(std::move(rec));
  }
  rep.estimate = m > 0 ? sum / static_cast<double>(m) : 0;
  return rep;
}

} // namespace

TwoPassState two_pass_first(const Stream& s, std::size_t m, std::uint64_t seed, const EstimatorOptions& opt) {
  check_stream(s);
  TwoPassState st;
  st.inst = s.inst;
  st.seed = seed;
  st.m = m > 0 ? m : default_m_sampling(s.inst);
  auto pts = live_points(s.updates);
  const std::size_t n = pts.size();
  std::optional<ReplayContext> ctx;
  if (opt.replay) ctx.emplace(s.inst, std::move(pts), opt);
  st.samples = draw_samples(s, ctx ? &*ctx : nullptr, n, st.m, seed, opt, st.failures, st.space_bytes);
  return st;
}

EstimateReport two_pass_second(const Stream& s, const TwoPassState& st) {
  check_stream(s);
  if (!(s.inst.d == st.inst.d && s.inst.delta == st.inst.delta && s.inst.f == st.inst.f))
    throw std::invalid_argument("pass-1 state belongs to a different instance");
  if (st.samples.size() != st.m) throw std::invalid_argument("pass-1 state is incomplete");
  // one ball counter per distinct sampled point, all fed by the second pass
  std::map<GridPoint, BallCounter> counters;
  for (const auto& r : st.samples)
    if (!r.nil()) counters.try_emplace(r.point, r.point, s.inst.f, s.inst.L());
  for (const auto& u : s.updates)
    for (auto& [p, bc] : counters) bc.update(u.point, u.sign);
  std::vector<double> rhat(st.samples.size(), 0);
  for (std::size_t j = 0; j < st.samples.size(); ++j)
    if (!st.samples[j].nil()) rhat[j] = counters.at(st.samples[j].point).estimate();
  std::size_t space = st.space_bytes + counters.size() * 8 * static_cast<std::size_t>(std::min(s.inst.L(), 1000) + 1);
  return finish_sampling("two-pass", st.seed, st.m, st.samples, st.failures, rhat, space);
}

EstimateReport two_pass_estimate(const Stream& s, std::size_t m, std::uint64_t seed, const EstimatorOptions& opt) {
  return two_pass_second(s, two_pass_first(s, m, seed, opt));
}

void save_two_pass_state(const std::string& path, const TwoPassState& st) {
  nlohmann::json j;
  j["format"] = "ufl-two-pass-state";
  j["version"] = 1;
  j["instance"] = {{"d", st.inst.d}, {"delta", st.inst.delta}, {"f", st.inst.f}};
  j["seed"] = st.seed;
  j["m"] = st.m;
  j["failures"] = st.failures;
  j["space_bytes"] = st.space_bytes;
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const auto& r : st.samples)
    arr.push_back({{"status", to_string(r.status)},
                   {"point", r.point},
                   {"prob", r.prob_estimate},
                   {"level", r.level},
                   {"bucket_size", r.bucket_size},
                   {"bucket_count", r.bucket_count},
                   {"exact", r.bucket_count_exact}});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump() << '\n';
}

TwoPassState load_two_pass_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pass-1 state not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt pass-1 state " + path + ": " + e.what());
  }
  if (j.value("format", "") != "ufl-two-pass-state" || j.value("version", 0) != 1)
    throw std::runtime_error("unsupported pass-1 state " + path);
  TwoPassState st;
  st.inst.d = j["instance"]["d"];
  st.inst.delta = j["instance"]["delta"];
  st.inst.f = j["instance"]["f"];
  st.seed = j["seed"];
  st.m = j["m"];
  st.failures = j["failures"];
  st.space_bytes = j["space_bytes"];
  for (const auto& e : j["samples"]) {
    SampleResult r;
    std::string status = e["status"];
    r.status = status == "ok" ? QueryStatus::ok : status == "fail" ? QueryStatus::fail : QueryStatus::empty;
    r.point = e["point"].get<GridPoint>();
    r.prob_estimate = e["prob"];
    r.level = e["level"];
    r.bucket_size = e["bucket_size"];
    r.bucket_count = e["bucket_count"];
    r.bucket_count_exact = e["exact"];
    st.samples.push_back(std::move(r));
  }
  return st;
}

// ---------------------------------------------------------------- random order

EstimateReport random_order_estimate(const Stream& s, std::size_t m, std::uint64_t seed, const EstimatorOptions& opt) {
  check_stream(s);
  for (const auto& u : s.updates)
    if (u.sign < 0) throw std::invalid_argument("random-order estimator needs an insertion-only stream");
  if (m == 0) m = default_m_sampling(s.inst);
  const std::size_t N = s.updates.size(), half = (N + 1) / 2;
  Stream J{s.inst, {s.updates.begin(), s.updates.begin() + static_cast<std::ptrdiff_t>(half)}};
  std::vector<GridPoint> jp;
  for (const auto& u : J.updates) jp.push_back(u.point);
  std::sort(jp.begin(), jp.end());
  const std::size_t n = jp.size();
  std::optional<ReplayContext> ctx;
  if (opt.replay) ctx.emplace(s.inst, std::move(jp), opt);
  std::size_t failures = 0, space = 0;
  auto samples = draw_samples(J, ctx ? &*ctx : nullptr, n, m, seed, opt, failures, space);
  // r on K, with the sampled point itself counted once
  std::map<GridPoint, BallCounter> counters;
  for (const auto& r : samples)
    if (!r.nil() && !counters.count(r.point)) counters.try_emplace(r.point, r.point, s.inst.f, s.inst.L()).first->second.update(r.point, +1);
  for (std::size_t k = half; k < N; ++k)
    for (auto& [p, bc] : counters) bc.update(s.updates[k].point, +1);
  std::vector<double> rhat(samples.size(), 0);
  for (std::size_t j = 0; j < samples.size(); ++j)
    if (!samples[j].nil()) rhat[j] = counters.at(samples[j].point).estimate();
  space += counters.size() * 8 * static_cast<std::size_t>(std::min(s.inst.L(), 1000) + 1);
  return finish_sampling("random-order", seed, m, samples, failures, rhat, space);
}

// ---------------------------------------------------------------- one pass

std::unique_ptr<ConsistentHash> one_pass_level_hash(const Instance& inst, std::uint64_t seed, int i,
                                                    const EstimatorOptions& opt) {
  return make_level_hash(inst, one_pass_ell(inst.f, i), opt, Prf(seed)(kTagHash, static_cast<std::uint64_t>(i)));
}

std::vector<BucketId> enumerate_enlarged_buckets(const GridPoint& p, const ConsistentHash& phi, double eps) {
  return phi.enlarged(to_real(p), eps / 2);
}

namespace {

struct OnePassParams {
  double gamma = 0, lambda = 0;
  std::size_t m = 0;
  int T = 0;
  std::uint64_t hseed = 0;
};

OnePassParams one_pass_params(const Instance& inst, std::uint64_t seed, const EstimatorOptions& opt) {
  OnePassParams p;
  auto h = one_pass_level_hash(inst, seed, 0, opt);
  if (opt.hash != HashKind::face && opt.hash != HashKind::grid && !h->has_enumeration())
    throw std::invalid_argument("one-pass estimator needs a hash with structured enumeration (face or grid)");
  p.gamma = h->params().gamma;
  p.lambda = h->params().lambda;
  p.m = opt.m > 0 ? opt.m : default_m_one_pass(p.gamma, p.lambda);
  p.T = opt.T > 0 ? opt.T : default_T(inst);
  p.hseed = Prf(seed)(kTagH);
  return p;
}

SketchConfig sampler_config(int T, std::uint64_t seed, int i, std::size_t j) {
  return l0_with_data_config(1, T, Prf(seed)(kTagSampler, static_cast<std::uint64_t>(i), j));
}

std::uint64_t distinct_seed(std::uint64_t seed, int i) { return Prf(seed)(kTagDistinct, static_cast<std::uint64_t>(i)); }

// Accumulates one level of the query procedure.
struct LevelAccumulator {
  int level;
  double f, c;
  int T;
  bool trace;
  double support = 0;
  double sum = 0;
  std::size_t ok = 0, failures = 0;
  std::map<std::uint64_t, TraceEntry> seen;

  void add(QueryStatus st, const Payload* payload, std::uint64_t bucket_digest) {
    if (st == QueryStatus::fail) {
      ++failures;
      return;
    }
    ++ok;
    if (st == QueryStatus::empty) return;
    const std::int64_t n_a = (*payload)[0];
    const double chat = median_counter(payload->data() + 1, T);
    const bool accepted = n_a != 0 && chat <= c;
    if (accepted) sum += support * static_cast<double>(n_a) * f;
    if (trace) seen.try_emplace(bucket_digest, TraceEntry{level, bucket_digest, chat, n_a, accepted});
  }

  LevelReport report(EstimateReport& rep) const {
    for (const auto& kv : seen) rep.trace.push_back(kv.second);
    return {level, ok > 0 ? sum / static_cast<double>(ok) : 0.0, ok + failures, failures, support};
  }
};

EstimateReport one_pass_header(const OnePassParams& p, std::uint64_t seed, const EstimatorOptions& opt) {
  EstimateReport rep;
  rep.algo = "one-pass";
  rep.seed = seed;
  rep.m = p.m;
  rep.T = p.T;
  rep.c = opt.c;
  rep.gamma = p.gamma;
  rep.lambda = p.lambda;
  rep.K = opt.K;
  return rep;
}

bool try_fallback(const SparseRecovery& sr, const Instance& inst, EstimateReport& rep) {
  auto rec = sr.recover();
  if (!rec) return false;
  std::vector<GridPoint> pts;
  for (const auto& [k, v] : *rec) {
    if (v != 1) return false;
    pts.push_back(key_point(k));
  }
  std::sort(pts.begin(), pts.end());
  rep.fallback = true;
  rep.estimate = pts.empty() ? 0 : mp_solve(pts, inst.f).cost;
  return true;
}

void finish_one_pass(EstimateReport& rep) {
  rep.estimate = 0;
  std::size_t total = 0;
  for (const auto& l : rep.levels) {
    rep.estimate += l.z;
    rep.samples += l.samples;
    rep.failures += l.failures;
    total += l.samples;
  }
  rep.unreliable = static_cast<double>(rep.failures) > 0.2 * static_cast<double>(std::max<std::size_t>(total, 1));
}

} // namespace

struct OnePassSketch::Level {
  std::unique_ptr<ConsistentHash> hash;
  double eps = 0;
  std::vector<L0Sketch> samplers;
  DistinctCounter distinct;
  std::map<std::uint64_t, std::uint64_t> digests; // bucket key -> BucketId digest, for traces
};

OnePassSketch::OnePassSketch(const Instance& inst, std::uint64_t seed, const EstimatorOptions& opt)
    : inst_(inst), seed_(seed), opt_(opt) {
  inst.validate();
  OnePassParams p = one_pass_params(inst, seed, opt);
  gamma_ = p.gamma;
  lambda_ = p.lambda;
  m_ = p.m;
  T_ = p.T;
  if (opt.K > 0) recovery_.emplace(opt.K, inst.d, Prf(seed)(kTagRecovery));
}

OnePassSketch::~OnePassSketch() = default;
OnePassSketch::OnePassSketch(OnePassSketch&&) noexcept = default;

OnePassSketch::Level& OnePassSketch::level(int i) {
  if (static_cast<int>(levels_.size()) <= i) levels_.resize(static_cast<std::size_t>(i) + 1);
  auto& slot = levels_[static_cast<std::size_t>(i)];
  if (!slot) {
    slot = std::make_unique<Level>(Level{one_pass_level_hash(inst_, seed_, i, opt_),
                                         0, {}, DistinctCounter(1, distinct_seed(seed_, i), 1 + T_), {}});
    slot->eps = slot->hash->params().eps();
    slot->samplers.reserve(m_);
    for (std::size_t j = 0; j < m_; ++j) slot->samplers.emplace_back(sampler_config(T_, seed_, i, j));
  }
  return *slot;
}

void OnePassSketch::update(const StreamUpdate& u) {
  if (!inst_.contains(u.point)) throw std::invalid_argument("point outside the instance grid");
  if (recovery_) recovery_->update(point_key(u.point), u.sign);
  const int L = inst_.L();
  std::vector<int> depth(static_cast<std::size_t>(T_) + 1);
  int top = 0;
  for (int t = 0; t <= T_; ++t) top = std::max(top, depth[static_cast<std::size_t>(t)] = subsample_depth(Prf(seed_)(kTagH), static_cast<std::uint64_t>(t), u.point, L));
  Payload v(static_cast<std::size_t>(T_) + 1);
  for (int i = 0; i <= top; ++i) {
    Level& lv = level(i);
    if (depth[0] >= i) {
      BucketId b = lv.hash->bucket(u.point);
      std::fill(v.begin(), v.end(), 0);
      v[0] = u.sign;
      lv.digests.try_emplace(b.key(), b.digest());
      for (auto& s : lv.samplers) s.update(Key{b.key()}, v);
      lv.distinct.update(Key{b.key()}, v);
    }
    bool any = false;
    v[0] = 0;
    for (int t = 1; t <= T_; ++t) any |= (v[static_cast<std::size_t>(t)] = depth[static_cast<std::size_t>(t)] >= i ? u.sign : 0) != 0;
    if (!any) continue;
    for (const auto& b : enumerate_enlarged_buckets(u.point, *lv.hash, lv.eps)) {
      lv.digests.try_emplace(b.key(), b.digest());
      for (auto& s : lv.samplers) s.update(Key{b.key()}, v);
      lv.distinct.update(Key{b.key()}, v);
    }
  }
}

EstimateReport OnePassSketch::query() const {
  OnePassParams p{gamma_, lambda_, m_, T_, 0};
  EstimateReport rep = one_pass_header(p, seed_, opt_);
  rep.space_bytes = space_bytes();
  if (recovery_ && try_fallback(*recovery_, inst_, rep)) return rep;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const auto& lv = levels_[i];
    if (!lv) continue;
    LevelAccumulator acc{static_cast<int>(i), inst_.f, opt_.c, T_, opt_.trace, lv->distinct.estimate().value, 0, 0, 0, {}};
    for (const auto& s : lv->samplers) {
      L0Result r = s.query();
      std::uint64_t dg = r.status == QueryStatus::ok ? lv->digests.at(r.key[0]) : 0;
      acc.add(r.status, &r.payload, dg);
    }
    rep.levels.push_back(acc.report(rep));
  }
  finish_one_pass(rep);
  return rep;
}

std::size_t OnePassSketch::space_bytes() const {
  std::size_t s = recovery_ ? recovery_->space_bytes() : 0;
  for (const auto& lv : levels_) {
    if (!lv) continue;
    for (const auto& sk : lv->samplers) s += sk.space_bytes();
    s += lv->distinct.sketch().space_bytes();
  }
  return s;
}

EstimateReport one_pass_estimate(const Stream& s, std::uint64_t seed, const EstimatorOptions& opt) {
  check_stream(s);
  if (!opt.replay) {
    OnePassSketch sk(s.inst, seed, opt);
    for (const auto& u : s.updates) sk.update(u);
    return sk.query();
  }
  const Instance& inst = s.inst;
  OnePassParams p = one_pass_params(inst, seed, opt);
  EstimateReport rep = one_pass_header(p, seed, opt);
  std::size_t space = 0;
  if (opt.K > 0) {
    SparseRecovery sr(opt.K, inst.d, Prf(seed)(kTagRecovery));
    for (const auto& u : s.updates) sr.update(point_key(u.point), u.sign);
    space += sr.space_bytes();
    if (try_fallback(sr, inst, rep)) {
      rep.space_bytes = space;
      return rep;
    }
  }
  const auto pts = live_points(s.updates);
  const int L = inst.L();
  const int T = p.T;
  // depth[k][t]: the deepest level at which h^(t) keeps point k
  std::vector<std::vector<int>> depth(pts.size(), std::vector<int>(static_cast<std::size_t>(T) + 1));
  std::vector<int> top(pts.size(), 0);
  int max_level = -1;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (int t = 0; t <= T; ++t)
      top[k] = std::max(top[k], depth[k][static_cast<std::size_t>(t)] = subsample_depth(p.hseed, static_cast<std::uint64_t>(t), pts[k], L));
    max_level = std::max(max_level, top[k]);
  }
  std::vector<RealPoint> real;
  for (const auto& q : pts) real.push_back(to_real(q));
  for (int i = 0; i <= max_level; ++i) {
    auto h = one_pass_level_hash(inst, seed, i, opt);
    const double eps = h->params().eps();
    // X_i: bucket key -> (frequency, counters)
    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, Payload>> X;
    auto entry = [&](const BucketId& b) -> Payload& {
      auto [it, fresh] = X.try_emplace(b.key());
      if (fresh) it->second = {b.digest(), Payload(static_cast<std::size_t>(T) + 1, 0)};
      return it->second.second;
    };
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (top[k] < i) continue;
      if (depth[k][0] >= i) entry(h->bucket(real[k]))[0] += 1;
      bool any = false;
      for (int t = 1; t <= T && !any; ++t) any = depth[k][static_cast<std::size_t>(t)] >= i;
      if (!any) continue;
      for (const auto& b : h->enlarged(real[k], eps / 2)) {
        Payload& v = entry(b);
        for (int t = 1; t <= T; ++t) v[static_cast<std::size_t>(t)] += depth[k][static_cast<std::size_t>(t)] >= i ? 1 : 0;
      }
    }
    std::vector<std::uint64_t> order;
    order.reserve(X.size());
    for (const auto& kv : X) order.push_back(kv.first);
    std::sort(order.begin(), order.end());
    std::vector<Key> keys;
    keys.reserve(order.size());
    for (auto k : order) keys.push_back(Key{k});
    DistinctEstimate D = distinct_replay(1, distinct_seed(seed, i), keys);
    LevelAccumulator acc{i, inst.f, opt.c, T, opt.trace, D.value, 0, 0, 0, {}};
    for (std::size_t j = 0; j < p.m; ++j) {
      auto [st, idx] = l0_replay_pick(sampler_config(T, seed, i, j), keys);
      if (st == QueryStatus::ok) {
        const auto& e = X.at(order[idx]);
        acc.add(st, &e.second, e.first);
      } else {
        acc.add(st, nullptr, 0);
      }
    }
    rep.levels.push_back(acc.report(rep));
    space += p.m * space_proxy(sampler_config(T, 0, 0, 0), static_cast<double>(keys.size())) +
             space_proxy(DistinctCounter::config(1, 0, 1 + T), static_cast<double>(keys.size()));
  }
  rep.space_bytes = space;
  finish_one_pass(rep);
  return rep;
}

// ---------------------------------------------------------------- offline

EstimateReport offline_estimate(const Stream& s) {
  check_stream(s);
  EstimateReport rep;
  rep.algo = "offline";
  auto pts = live_points(s.updates);
  if (pts.empty()) return rep;
  auto rp = compute_rp(pts, s.inst.f);
  for (double r : rp) rep.estimate += r;
  rep.mp_cost = mp_facilities(pts, s.inst.f, rp).cost;
  return rep;
}

} // namespace ufl
