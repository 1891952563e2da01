#include "ufl/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace ufl {

Key point_key(const GridPoint& p) {
  Key k(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) k[i] = field::from_signed(p[i]);
  return k;
}

GridPoint key_point(const Key& k) {
  GridPoint p(k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    p[i] = k[i] > field::P / 2 ? -static_cast<std::int64_t>(field::P - k[i]) : static_cast<std::int64_t>(k[i]);
  return p;
}

int subsample_depth(std::uint64_t seed, std::uint64_t t, const GridPoint& p, int cap) {
  if (cap <= 0) return 0;
  Prf prf(seed);
  return geometric_level(prf, digest(p), t, cap);
}

std::string to_string(QueryStatus s) {
  switch (s) {
  case QueryStatus::ok: return "ok";
  case QueryStatus::empty: return "empty";
  case QueryStatus::fail: return "fail";
  }
  return "?";
}

// ---------------------------------------------------------------- hasher

SketchHasher::SketchHasher(const SketchConfig& cfg) : cfg_(cfg), prf_(cfg.seed) {
  if (cfg.levels < 1 || cfg.levels > 250 || cfg.buckets < 1 || cfg.reps < 1 || cfg.reps > 255 || cfg.key_width < 1 ||
      cfg.payload_width < 1)
    throw std::invalid_argument("invalid sketch configuration");
  for (int r = 0; r < cfg.reps; ++r) reps_.push_back(prf_.derive(static_cast<std::uint64_t>(r) + 1));
  for (int j = 0; j < cfg.payload_width; ++j) rho_.push_back(field::nonzero(prf_(0x72686fULL, static_cast<std::uint64_t>(j))));
}

int SketchHasher::level(int rep, std::uint64_t kd) const {
  return geometric_level(reps_[static_cast<std::size_t>(rep)], kd, 1, cfg_.levels - 1);
}

int SketchHasher::cell(int rep, int level, std::uint64_t kd) const {
  return static_cast<int>(reps_[static_cast<std::size_t>(rep)](kd, 2, static_cast<std::uint64_t>(level)) %
                          static_cast<std::uint64_t>(cfg_.buckets));
}

std::uint64_t SketchHasher::weight(std::uint64_t kd, std::span<const std::int64_t> v) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < v.size(); ++j) s = field::add(s, field::mul(rho_[j], field::from_signed(v[j])));
  return field::mul(beta(kd), s);
}

bool CellBlock::zero() const {
  return std::all_of(f.begin(), f.end(), [](std::uint64_t x) { return x == 0; }) &&
         std::all_of(s.begin(), s.end(), [](std::int64_t x) { return x == 0; });
}

// ---------------------------------------------------------------- binary io

namespace {

constexpr char kMagic[4] = {'U', 'F', 'L', 'S'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::string out;
  template <class T> void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
  }
  void bytes(const std::string& s) {
    put<std::uint64_t>(s.size());
    out += s;
  }
};

struct Reader {
  const std::string& in;
  std::size_t pos = 0;
  template <class T> T get() {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated sketch state");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string bytes() {
    auto n = get<std::uint64_t>();
    if (pos + n > in.size()) throw std::runtime_error("truncated sketch state");
    std::string s = in.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_header(Writer& w, std::uint8_t kind) {
  w.out.append(kMagic, 4);
  w.put(kVersion);
  w.put(kind);
}

void get_header(Reader& r, std::uint8_t kind) {
  if (r.in.size() < 9 || std::memcmp(r.in.data(), kMagic, 4) != 0) throw std::runtime_error("not a sketch state");
  r.pos = 4;
  if (r.get<std::uint32_t>() != kVersion) throw std::runtime_error("unsupported sketch state version");
  if (r.get<std::uint8_t>() != kind) throw std::runtime_error("sketch state has a different kind");
}

void put_config(Writer& w, const SketchConfig& c) {
  w.put<std::int32_t>(c.levels);
  w.put<std::int32_t>(c.buckets);
  w.put<std::int32_t>(c.reps);
  w.put<std::int32_t>(c.key_width);
  w.put<std::int32_t>(c.payload_width);
  w.put<std::uint64_t>(c.seed);
}

SketchConfig get_config(Reader& r) {
  SketchConfig c;
  c.levels = r.get<std::int32_t>();
  c.buckets = r.get<std::int32_t>();
  c.reps = r.get<std::int32_t>();
  c.key_width = r.get<std::int32_t>();
  c.payload_width = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  return c;
}

} // namespace

// ---------------------------------------------------------------- l0

L0Sketch::L0Sketch(const SketchConfig& cfg) : hasher_(cfg) {}

SketchConfig l0_config(int key_width, std::uint64_t seed) {
  SketchConfig c;
  c.key_width = key_width;
  c.seed = seed;
  return c;
}

SketchConfig l0_with_data_config(int key_width, int T, std::uint64_t seed) {
  SketchConfig c = l0_config(key_width, seed);
  c.payload_width = 1 + T;
  return c;
}

CellBlock& L0Sketch::block(int rep, int level) {
  auto [it, fresh] = blocks_.try_emplace(slot(rep, level));
  if (fresh) {
    const auto& c = config();
    it->second.f.assign(static_cast<std::size_t>(c.buckets) * static_cast<std::size_t>(2 + c.key_width), 0);
    it->second.s.assign(static_cast<std::size_t>(c.buckets) * static_cast<std::size_t>(c.payload_width), 0);
  }
  return it->second;
}

void L0Sketch::apply(int rep, int level, int c, std::uint64_t kd, const Key& k, std::uint64_t w,
                     std::span<const std::int64_t> v) {
  const auto& cfg = config();
  CellBlock& b = block(rep, level);
  std::uint64_t* f = &b.f[static_cast<std::size_t>(c) * static_cast<std::size_t>(2 + cfg.key_width)];
  f[0] = field::add(f[0], w);
  f[1] = field::add(f[1], field::mul(w, hasher_.check(kd)));
  for (int j = 0; j < cfg.key_width; ++j) f[2 + j] = field::add(f[2 + j], field::mul(w, k[static_cast<std::size_t>(j)]));
  std::int64_t* s = &b.s[static_cast<std::size_t>(c) * static_cast<std::size_t>(cfg.payload_width)];
  for (std::size_t j = 0; j < v.size(); ++j) s[j] += v[j];
}

void L0Sketch::update(const Key& k, std::span<const std::int64_t> delta) {
  const auto& cfg = config();
  if (static_cast<int>(k.size()) != cfg.key_width) throw std::invalid_argument("key width does not match the sketch");
  if (static_cast<int>(delta.size()) != cfg.payload_width)
    throw std::invalid_argument("payload width does not match the sketch");
  for (auto x : k)
    if (x >= field::P) throw std::invalid_argument("key limb outside the field");
  // keeps int64 payload sums exact for up to 2^32 updates
  for (auto x : delta)
    if (x > kMaxPayloadDelta || x < -kMaxPayloadDelta) throw std::overflow_error("payload update too large");
  const std::uint64_t kd = hasher_.key_digest(k);
  const std::uint64_t w = hasher_.weight(kd, delta);
  for (int r = 0; r < cfg.reps; ++r) {
    int top = hasher_.level(r, kd);
    for (int l = 0; l <= top; ++l) apply(r, l, hasher_.cell(r, l, kd), kd, k, w, delta);
  }
}

CellDecode L0Sketch::decode(int rep, int level, int c) const {
  CellDecode out;
  auto it = blocks_.find(slot(rep, level));
  if (it == blocks_.end()) return out;
  const auto& cfg = config();
  const std::uint64_t* f = &it->second.f[static_cast<std::size_t>(c) * static_cast<std::size_t>(2 + cfg.key_width)];
  const std::int64_t* s = &it->second.s[static_cast<std::size_t>(c) * static_cast<std::size_t>(cfg.payload_width)];
  out.nonzero = std::any_of(f, f + 2 + cfg.key_width, [](std::uint64_t x) { return x != 0; }) ||
                std::any_of(s, s + cfg.payload_width, [](std::int64_t x) { return x != 0; });
  if (!out.nonzero || f[0] == 0) return out;
  const std::uint64_t winv = field::inv(f[0]);
  out.key.resize(static_cast<std::size_t>(cfg.key_width));
  for (int j = 0; j < cfg.key_width; ++j) out.key[static_cast<std::size_t>(j)] = field::mul(f[2 + j], winv);
  out.payload.assign(s, s + cfg.payload_width);
  const std::uint64_t kd = hasher_.key_digest(out.key);
  out.ok = f[1] == field::mul(f[0], hasher_.check(kd)) && f[0] == hasher_.weight(kd, out.payload);
  return out;
}

int L0Sketch::deepest_level(int rep) const {
  int best = -1;
  auto lo = blocks_.lower_bound(slot(rep, 0));
  auto hi = blocks_.lower_bound(slot(rep + 1, 0));
  for (auto it = lo; it != hi; ++it)
    if (!it->second.zero()) best = static_cast<int>(it->first & 0xff);
  return best;
}

std::pair<int, bool> L0Sketch::occupancy(int rep, int level) const {
  int z = 0;
  bool all = true;
  if (!blocks_.count(slot(rep, level))) return {0, true};
  for (int c = 0; c < config().buckets; ++c) {
    CellDecode d = decode(rep, level, c);
    if (!d.nonzero) continue;
    ++z;
    all = all && d.ok;
  }
  return {z, all};
}

L0Result L0Sketch::query() const {
  const auto& cfg = config();
  for (int r = 0; r < cfg.reps; ++r) {
    int top = deepest_level(r);
    if (top < 0) return {};
    bool failed = false;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    L0Result res;
    for (int c = 0; c < cfg.buckets && !failed; ++c) {
      CellDecode d = decode(r, top, c);
      if (!d.nonzero) continue;
      if (!d.ok) {
        failed = true;
        break;
      }
      std::uint64_t pr = hasher_.priority(r, hasher_.key_digest(d.key));
      if (res.status != QueryStatus::ok || pr < best) {
        best = pr;
        res = {QueryStatus::ok, std::move(d.key), std::move(d.payload)};
      }
    }
    if (!failed && res.status == QueryStatus::ok) return res;
  }
  return {QueryStatus::fail, {}, {}};
}

void L0Sketch::merge(const L0Sketch& other) {
  if (!(config() == other.config())) throw std::invalid_argument("cannot merge sketches with different configurations");
  for (const auto& [s, b] : other.blocks_) {
    CellBlock& mine = block(static_cast<int>(s >> 8), static_cast<int>(s & 0xff));
    for (std::size_t i = 0; i < b.f.size(); ++i) mine.f[i] = field::add(mine.f[i], b.f[i]);
    for (std::size_t i = 0; i < b.s.size(); ++i) mine.s[i] += b.s[i];
  }
}

bool L0Sketch::is_zero() const {
  return std::all_of(blocks_.begin(), blocks_.end(), [](const auto& kv) { return kv.second.zero(); });
}

std::string L0Sketch::serialize() const {
  Writer w;
  put_header(w, 1);
  put_config(w, config());
  std::uint32_t n = 0;
  for (const auto& kv : blocks_) n += kv.second.zero() ? 0 : 1;
  w.put(n);
  for (const auto& [s, b] : blocks_) {
    if (b.zero()) continue;
    w.put(s);
    for (auto x : b.f) w.put(x);
    for (auto x : b.s) w.put(x);
  }
  return w.out;
}

L0Sketch L0Sketch::deserialize(const std::string& bytes) {
  Reader r{bytes};
  get_header(r, 1);
  L0Sketch sk(get_config(r));
  auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto s = r.get<std::uint32_t>();
    int rep = static_cast<int>(s >> 8), level = static_cast<int>(s & 0xff);
    if (rep >= sk.config().reps || level >= sk.config().levels) throw std::runtime_error("corrupt sketch state");
    CellBlock& b = sk.block(rep, level);
    for (auto& x : b.f) x = r.get<std::uint64_t>();
    for (auto& x : b.s) x = r.get<std::int64_t>();
  }
  if (r.pos != bytes.size()) throw std::runtime_error("trailing bytes in sketch state");
  return sk;
}

std::size_t L0Sketch::space_bytes() const {
  std::size_t s = 0;
  for (const auto& kv : blocks_) s += 8 * (kv.second.f.size() + kv.second.s.size());
  return s;
}

// ---------------------------------------------------------------- two-level

namespace {
SketchConfig with_width(SketchConfig c, int payload) {
  c.payload_width = payload;
  return c;
}
} // namespace

TwoLevelL0::TwoLevelL0(const SketchConfig& rows, const SketchConfig& cols)
    : rows_(with_width(rows, 1)), col_cfg_(with_width(cols, 1)), col_hasher_(col_cfg_) {}

void TwoLevelL0::update(const Key& row, const Key& col, std::int64_t delta) {
  const auto& cfg = rows_.config();
  if (static_cast<int>(row.size()) != cfg.key_width) throw std::invalid_argument("row key width does not match");
  const SketchHasher& h = rows_.hasher_;
  const std::uint64_t kd = h.key_digest(row);
  const std::uint64_t gcol = col_hasher_.beta(col_hasher_.key_digest(col));
  const std::uint64_t dv = field::from_signed(delta);
  // the row weight sees the column too, so a row stays visible whenever its vector is nonzero
  const std::uint64_t w = field::mul(h.beta(kd), field::add(field::mul(h.rho(0), dv), field::mul(gcol, dv)));
  for (int r = 0; r < cfg.reps; ++r) {
    int top = h.level(r, kd);
    for (int l = 0; l <= top; ++l) {
      int c = h.cell(r, l, kd);
      rows_.apply(r, l, c, kd, row, w, std::span<const std::int64_t>(&delta, 1));
      std::uint64_t id = static_cast<std::uint64_t>(rows_.slot(r, l)) << 32 | static_cast<std::uint32_t>(c);
      cols_.try_emplace(id, col_cfg_).first->second.update(col, delta);
    }
  }
}

TwoLevelResult TwoLevelL0::query() const {
  const auto& cfg = rows_.config();
  const SketchHasher& h = rows_.hasher_;
  for (int r = 0; r < cfg.reps; ++r) {
    int top = rows_.deepest_level(r);
    if (top < 0) return {};
    bool failed = false;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    int best_cell = -1;
    CellDecode chosen;
    for (int c = 0; c < cfg.buckets; ++c) {
      CellDecode d = rows_.decode(r, top, c);
      if (!d.nonzero) continue;
      // the weight mixes in column terms, so only the checksum is verified
      auto it = rows_.blocks_.find(rows_.slot(r, top));
      const std::uint64_t* f = &it->second.f[static_cast<std::size_t>(c) * static_cast<std::size_t>(2 + cfg.key_width)];
      bool ok = f[0] != 0 && f[1] == field::mul(f[0], h.check(h.key_digest(d.key)));
      if (!ok) {
        failed = true;
        break;
      }
      std::uint64_t pr = h.priority(r, h.key_digest(d.key));
      if (best_cell < 0 || pr < best) best = pr, best_cell = c, chosen = std::move(d);
    }
    if (failed || best_cell < 0) continue;
    std::uint64_t id = static_cast<std::uint64_t>(rows_.slot(r, top)) << 32 | static_cast<std::uint32_t>(best_cell);
    auto it = cols_.find(id);
    if (it == cols_.end()) return {QueryStatus::fail, {}, {}, 0};
    L0Result cr = it->second.query();
    if (cr.status != QueryStatus::ok) return {QueryStatus::fail, {}, {}, 0};
    return {QueryStatus::ok, std::move(chosen.key), std::move(cr.key), chosen.payload[0]};
  }
  return {QueryStatus::fail, {}, {}, 0};
}

void TwoLevelL0::merge(const TwoLevelL0& other) {
  if (!(col_cfg_ == other.col_cfg_)) throw std::invalid_argument("cannot merge sketches with different configurations");
  rows_.merge(other.rows_);
  for (const auto& [id, sk] : other.cols_) cols_.try_emplace(id, col_cfg_).first->second.merge(sk);
}

bool TwoLevelL0::is_zero() const {
  return rows_.is_zero() && std::all_of(cols_.begin(), cols_.end(), [](const auto& kv) { return kv.second.is_zero(); });
}

std::string TwoLevelL0::serialize() const {
  Writer w;
  put_header(w, 2);
  w.bytes(rows_.serialize());
  put_config(w, col_cfg_);
  std::uint32_t n = 0;
  for (const auto& kv : cols_) n += kv.second.is_zero() ? 0 : 1;
  w.put(n);
  for (const auto& [id, sk] : cols_) {
    if (sk.is_zero()) continue;
    w.put(id);
    w.bytes(sk.serialize());
  }
  return w.out;
}

TwoLevelL0 TwoLevelL0::deserialize(const std::string& bytes) {
  Reader r{bytes};
  get_header(r, 2);
  L0Sketch rows = L0Sketch::deserialize(r.bytes());
  SketchConfig cc = get_config(r);
  TwoLevelL0 out(rows.config(), cc);
  out.rows_ = std::move(rows);
  auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto id = r.get<std::uint64_t>();
    L0Sketch sk = L0Sketch::deserialize(r.bytes());
    if (!(sk.config() == cc)) throw std::runtime_error("corrupt sketch state");
    out.cols_.insert_or_assign(id, std::move(sk));
  }
  if (r.pos != bytes.size()) throw std::runtime_error("trailing bytes in sketch state");
  return out;
}

std::size_t TwoLevelL0::space_bytes() const {
  std::size_t s = rows_.space_bytes();
  for (const auto& kv : cols_) s += kv.second.space_bytes();
  return s;
}

// ---------------------------------------------------------------- distinct count

DistinctCounter::DistinctCounter(int key_width, std::uint64_t seed, int payload_width)
    : sk_(config(key_width, seed, payload_width)) {}

SketchConfig DistinctCounter::config(int key_width, std::uint64_t seed, int payload_width) {
  SketchConfig c;
  c.payload_width = payload_width;
  c.buckets = kBuckets;
  c.reps = kReps;
  c.key_width = key_width;
  c.seed = seed;
  return c;
}

DistinctEstimate distinct_from_occupancy(const std::vector<std::vector<std::pair<int, bool>>>& occ, int buckets) {
  for (const auto& rep : occ) {
    if (rep.empty() || rep[0].first == 0) return {0, true};
    if (rep[0].second) return {static_cast<double>(rep[0].first), true};
  }
  std::vector<double> est;
  for (const auto& rep : occ) {
    std::size_t l = 0;
    while (l + 1 < rep.size() && rep[l].first > 0.7 * buckets) ++l;
    double z = std::min<double>(rep[l].first, buckets - 0.5);
    est.push_back(std::ldexp(-buckets * std::log1p(-z / buckets), static_cast<int>(l)));
  }
  std::nth_element(est.begin(), est.begin() + static_cast<std::ptrdiff_t>(est.size() / 2), est.end());
  return {est[est.size() / 2] / DistinctCounter::kShrink, false};
}

DistinctEstimate DistinctCounter::estimate() const {
  const auto& c = sk_.config();
  std::vector<std::vector<std::pair<int, bool>>> occ(static_cast<std::size_t>(c.reps));
  for (int r = 0; r < c.reps; ++r) {
    int top = sk_.deepest_level(r);
    for (int l = 0; l <= std::max(top, 0); ++l) occ[static_cast<std::size_t>(r)].push_back(sk_.occupancy(r, l));
  }
  return distinct_from_occupancy(occ, c.buckets);
}

// ---------------------------------------------------------------- sparse recovery

SparseRecovery::SparseRecovery(std::size_t capacity, int key_width, std::uint64_t seed)
    : capacity_(capacity), key_width_(key_width), prf_(seed), per_table_(std::max<std::size_t>(1, (2 * capacity + 2) / 3 + 1)) {
  if (key_width < 1) throw std::invalid_argument("key width must be positive");
  if (capacity > 0) cells_.assign(3 * per_table_, Cell{0, 0, std::vector<std::uint64_t>(static_cast<std::size_t>(key_width), 0)});
}

std::size_t SparseRecovery::index(int h, std::uint64_t kd) const {
  return static_cast<std::size_t>(h) * per_table_ + static_cast<std::size_t>(prf_(kd, 7, static_cast<std::uint64_t>(h)) % per_table_);
}

void SparseRecovery::update(const Key& k, std::int64_t delta) {
  if (capacity_ == 0) return;
  if (static_cast<int>(k.size()) != key_width_) throw std::invalid_argument("key width does not match");
  const std::uint64_t kd = prf_.hash_words(k);
  const std::uint64_t dv = field::from_signed(delta);
  const std::uint64_t g = field::mul(dv, field::nonzero(prf_(kd, 8)));
  for (int h = 0; h < 3; ++h) {
    Cell& c = cells_[index(h, kd)];
    c.count += delta;
    c.fp = field::add(c.fp, g);
    for (int j = 0; j < key_width_; ++j)
      c.ks[static_cast<std::size_t>(j)] = field::add(c.ks[static_cast<std::size_t>(j)], field::mul(dv, k[static_cast<std::size_t>(j)]));
  }
}

std::optional<std::vector<std::pair<Key, std::int64_t>>> SparseRecovery::recover() const {
  if (capacity_ == 0) return std::nullopt;
  std::vector<Cell> cells = cells_;
  std::vector<std::pair<Key, std::int64_t>> out;
  auto pure = [&](const Cell& c, Key& key, std::uint64_t& kd) {
    if (c.count == 0) return false;
    const std::uint64_t cv = field::from_signed(c.count);
    const std::uint64_t inv = field::inv(cv);
    key.resize(static_cast<std::size_t>(key_width_));
    for (int j = 0; j < key_width_; ++j) key[static_cast<std::size_t>(j)] = field::mul(c.ks[static_cast<std::size_t>(j)], inv);
    kd = prf_.hash_words(key);
    return c.fp == field::mul(cv, field::nonzero(prf_(kd, 8)));
  };
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < cells.size(); ++i) queue.push_back(i);
  Key key;
  std::uint64_t kd = 0;
  while (!queue.empty()) {
    std::size_t i = queue.front();
    queue.pop_front();
    if (!pure(cells[i], key, kd)) continue;
    std::int64_t cnt = cells[i].count;
    const std::uint64_t dv = field::from_signed(cnt);
    const std::uint64_t g = field::mul(dv, field::nonzero(prf_(kd, 8)));
    for (int h = 0; h < 3; ++h) {
      std::size_t j = index(h, kd);
      Cell& c = cells[j];
      c.count -= cnt;
      c.fp = field::sub(c.fp, g);
      for (int t = 0; t < key_width_; ++t)
        c.ks[static_cast<std::size_t>(t)] = field::sub(c.ks[static_cast<std::size_t>(t)], field::mul(dv, key[static_cast<std::size_t>(t)]));
      queue.push_back(j);
    }
    out.emplace_back(key, cnt);
    if (out.size() > 3 * per_table_) return std::nullopt;
  }
  for (const auto& c : cells)
    if (c.count != 0 || c.fp != 0 || std::any_of(c.ks.begin(), c.ks.end(), [](std::uint64_t x) { return x != 0; }))
      return std::nullopt;
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t SparseRecovery::space_bytes() const {
  return cells_.size() * (16 + 8 * static_cast<std::size_t>(key_width_));
}

// ---------------------------------------------------------------- replay

namespace {

struct ReplayPick {
  QueryStatus status = QueryStatus::empty;
  std::size_t index = 0;
};

// The query rule of L0Sketch applied to a list of nonzero items.
ReplayPick replay_pick(const SketchHasher& h, const std::vector<std::uint64_t>& kds) {
  const auto& cfg = h.config();
  if (kds.empty()) return {};
  std::vector<int> lev(kds.size());
  std::vector<int> cells;
  for (int r = 0; r < cfg.reps; ++r) {
    int top = 0;
    for (std::size_t i = 0; i < kds.size(); ++i) top = std::max(top, lev[i] = h.level(r, kds[i]));
    cells.clear();
    bool failed = false;
    std::size_t best = 0;
    std::uint64_t best_pr = 0;
    bool have = false;
    for (std::size_t i = 0; i < kds.size(); ++i) {
      if (lev[i] != top) continue;
      int c = h.cell(r, top, kds[i]);
      if (std::find(cells.begin(), cells.end(), c) != cells.end()) {
        failed = true;
        break;
      }
      cells.push_back(c);
      std::uint64_t pr = h.priority(r, kds[i]);
      if (!have || pr < best_pr) best = i, best_pr = pr, have = true;
    }
    if (!failed) return {QueryStatus::ok, best};
  }
  return {QueryStatus::fail, 0};
}

} // namespace

L0Result l0_replay(const SketchConfig& cfg, const std::vector<std::pair<Key, Payload>>& support) {
  SketchHasher h(cfg);
  std::vector<std::uint64_t> kds;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const Payload& p = support[i].second;
    if (std::all_of(p.begin(), p.end(), [](std::int64_t x) { return x == 0; })) continue;
    kds.push_back(h.key_digest(support[i].first));
    idx.push_back(i);
  }
  ReplayPick pk = replay_pick(h, kds);
  if (pk.status != QueryStatus::ok) return {pk.status, {}, {}};
  const auto& item = support[idx[pk.index]];
  return {QueryStatus::ok, item.first, item.second};
}

std::pair<QueryStatus, std::size_t> l0_replay_pick(const SketchConfig& cfg, const std::vector<Key>& keys) {
  SketchHasher h(cfg);
  std::vector<std::uint64_t> kds;
  kds.reserve(keys.size());
  for (const auto& k : keys) kds.push_back(h.key_digest(k));
  ReplayPick pk = replay_pick(h, kds);
  return {pk.status, pk.index};
}

TwoLevelResult two_level_replay(const SketchConfig& rows, const SketchConfig& cols, const std::vector<RowEntry>& support) {
  SketchHasher rh(with_width(rows, 1));
  std::vector<std::uint64_t> kds;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const auto& c = support[i].cols;
    if (std::all_of(c.begin(), c.end(), [](const auto& e) { return e.second == 0; })) continue;
    kds.push_back(rh.key_digest(support[i].row));
    idx.push_back(i);
  }
  ReplayPick pk = replay_pick(rh, kds);
  if (pk.status != QueryStatus::ok) return {pk.status, {}, {}, 0};
  const RowEntry& row = support[idx[pk.index]];
  std::vector<std::pair<Key, Payload>> cs;
  std::int64_t sum = 0;
  for (const auto& [k, v] : row.cols) {
    sum += v;
    cs.push_back({k, Payload{v}});
  }
  L0Result cr = l0_replay(with_width(cols, 1), cs);
  if (cr.status != QueryStatus::ok) return {QueryStatus::fail, {}, {}, 0};
  return {QueryStatus::ok, row.row, std::move(cr.key), sum};
}

DistinctEstimate distinct_replay(int key_width, std::uint64_t seed, const std::vector<Key>& support) {
  SketchConfig cfg = DistinctCounter::config(key_width, seed);
  SketchHasher h(cfg);
  std::vector<std::uint64_t> kds;
  kds.reserve(support.size());
  for (const auto& k : support) kds.push_back(h.key_digest(k));
  std::vector<std::vector<std::pair<int, bool>>> occ(static_cast<std::size_t>(cfg.reps));
  std::vector<int> lev(kds.size());
  std::vector<std::uint8_t> hits(static_cast<std::size_t>(cfg.buckets));
  for (int r = 0; r < cfg.reps; ++r) {
    int top = 0;
    for (std::size_t i = 0; i < kds.size(); ++i) top = std::max(top, lev[i] = h.level(r, kds[i]));
    for (int l = 0; l <= top; ++l) {
      std::fill(hits.begin(), hits.end(), 0);
      int z = 0;
      bool all = true;
      for (std::size_t i = 0; i < kds.size(); ++i) {
        if (lev[i] < l) continue;
        auto& hc = hits[static_cast<std::size_t>(h.cell(r, l, kds[i]))];
        if (hc == 0) ++z;
        else all = false;
        hc = 1;
      }
      occ[static_cast<std::size_t>(r)].push_back({z, all});
      // the estimator stops at the first level with load <= 0.7, and exactness only looks at level 0
      if (z <= 0.7 * cfg.buckets && l > 0) break;
    }
  }
  return distinct_from_occupancy(occ, cfg.buckets);
}

} // namespace ufl
