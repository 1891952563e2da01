#include "ufl/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace ufl {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

void Instance::validate() const {
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  if (delta < 2 || (delta & (delta - 1)) != 0)
    throw std::invalid_argument("delta must be a power of two >= 2, got " + std::to_string(delta));
  if (!(f > 0.0) || !std::isfinite(f)) throw std::invalid_argument("opening cost f must be positive");
}

int Instance::log2_delta() const {
  int k = 0;
  while ((std::int64_t{1} << k) < delta) ++k;
  return k;
}

bool Instance::contains(const GridPoint& p) const {
  if (static_cast<int>(p.size()) != d) return false;
  return std::all_of(p.begin(), p.end(), [&](std::int64_t c) { return c >= 1 && c <= delta; });
}

namespace {

template <class A, class B>
double dist2(const A& a, const B& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch in distance");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += t * t;
  }
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

} // namespace

double squared_distance(const GridPoint& a, const GridPoint& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch in distance");
  // exact in 64-bit for the supported coordinate range
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::int64_t t = a[i] - b[i];
    s += t * t;
  }
  return static_cast<double>(s);
}

double distance(const GridPoint& a, const GridPoint& b) { return std::sqrt(squared_distance(a, b)); }
double distance(const RealPoint& a, const RealPoint& b) { return std::sqrt(dist2(a, b)); }
double distance(const GridPoint& a, const RealPoint& b) { return std::sqrt(dist2(a, b)); }
double distance(const RealPoint& a, const GridPoint& b) { return std::sqrt(dist2(a, b)); }

RealPoint to_real(const GridPoint& p) { return RealPoint(p.begin(), p.end()); }

StreamUpdate parse_update(std::string_view line, const Instance& inst, std::size_t line_no) {
  line = trim(line);
  if (line.empty()) throw ParseError(line_no, "empty update line");
  StreamUpdate u;
  if (line.front() == '+') u.sign = +1;
  else if (line.front() == '-') u.sign = -1;
  else throw ParseError(line_no, "update must start with '+' or '-'");
  line.remove_prefix(1);
  while (true) {
    line = trim(line);
    if (line.empty()) break;
    std::size_t end = line.find_first_of(" \t");
    std::string_view tok = line.substr(0, end);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw ParseError(line_no, "malformed coordinate '" + std::string(tok) + "'");
    u.point.push_back(v);
    if (end == std::string_view::npos) break;
    line.remove_prefix(end);
  }
  if (static_cast<int>(u.point.size()) != inst.d)
    throw ParseError(line_no, "expected " + std::to_string(inst.d) + " coordinates, got " +
                                  std::to_string(u.point.size()));
  for (std::int64_t c : u.point)
    if (c < 1 || c > inst.delta)
      throw ParseError(line_no, "coordinate " + std::to_string(c) + " outside [1, " +
                                    std::to_string(inst.delta) + "]");
  return u;
}

std::string format_update(const StreamUpdate& u) {
  std::string s(1, u.sign > 0 ? '+' : '-');
  for (std::int64_t c : u.point) {
    s.push_back(' ');
    s += std::to_string(c);
  }
  return s;
}

Instance parse_header(std::string_view line, std::size_t line_no) {
  line = trim(line);
  if (line.substr(0, 5) != "# ufl") throw ParseError(line_no, "missing '# ufl' header");
  std::istringstream in{std::string(line.substr(5))};
  Instance inst;
  bool have_d = false, have_delta = false, have_f = false;
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "bad header field '" + tok + "'");
    std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    try {
      if (key == "d") inst.d = std::stoi(val), have_d = true;
      else if (key == "delta") inst.delta = std::stoll(val), have_delta = true;
      else if (key == "f") inst.f = std::stod(val), have_f = true;
      else throw ParseError(line_no, "unknown header field '" + key + "'");
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "bad value in header field '" + tok + "'");
    }
  }
  if (!have_d || !have_delta || !have_f) throw ParseError(line_no, "header needs d, delta and f");
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  }
  return inst;
}

std::string format_header(const Instance& inst) {
  std::ostringstream out;
  out.precision(17);
  out << "# ufl d=" << inst.d << " delta=" << inst.delta << " f=" << inst.f;
  return out.str();
}

Stream read_stream(std::istream& in) {
  Stream s;
  std::string line;
  std::size_t no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    std::string_view t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      s.inst = parse_header(t, no);
      header = true;
      continue;
    }
    if (t.front() == '#') continue;
    s.updates.push_back(parse_update(t, s.inst, no));
  }
  if (!header) throw ParseError(no, "stream has no header");
  return s;
}

Stream read_stream_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stream file '" + path + "'");
  return read_stream(in);
}

void write_stream(std::ostream& out, const Stream& s) {
  out << format_header(s.inst) << '\n';
  for (const auto& u : s.updates) out << format_update(u) << '\n';
}

void write_stream_file(const std::string& path, const Stream& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stream file '" + path + "'");
  write_stream(out, s);
}

ValidationReport validate_stream(const std::vector<StreamUpdate>& updates) {
  std::map<GridPoint, int> mult;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    int& m = mult[updates[k].point];
    m += updates[k].sign;
    if (m < 0 || m > 1) {
      ValidationReport r;
      r.ok = false;
      r.index = k + 1;
      r.message = m < 0 ? "delete of a point that is not present" : "duplicate insert of a present point";
      return r;
    }
  }
  return {};
}

std::vector<GridPoint> live_points(const std::vector<StreamUpdate>& updates) {
  auto rep = validate_stream(updates);
  if (!rep.ok) throw std::invalid_argument("invalid stream at update " + std::to_string(rep.index) + ": " + rep.message);
  std::map<GridPoint, int> mult;
  for (const auto& u : updates) mult[u.point] += u.sign;
  std::vector<GridPoint> out;
  for (auto& [p, m] : mult)
    if (m == 1) out.push_back(p);
  return out;
}

std::vector<StreamUpdate> insertions(const std::vector<GridPoint>& pts) {
  std::vector<StreamUpdate> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back({+1, p});
  return out;
}

} // namespace ufl
