#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ufl {

using GridPoint = std::vector<std::int64_t>;
using RealPoint = std::vector<double>;

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct Instance {
  int d = 1;
  std::int64_t delta = 2;
  double f = 1.0;

  // Throws std::invalid_argument unless d >= 1, delta is a power of two and f > 0.
  void validate() const;
  int log2_delta() const;
  int L() const { return d * log2_delta(); }
  bool contains(const GridPoint& p) const;
};

struct StreamUpdate {
  int sign = +1; // +1 insert, -1 delete
  GridPoint point;

  bool operator==(const StreamUpdate&) const = default;
};

struct Stream {
  Instance inst;
  std::vector<StreamUpdate> updates;
};

double distance(const GridPoint& a, const GridPoint& b);
double distance(const RealPoint& a, const RealPoint& b);
double distance(const GridPoint& a, const RealPoint& b);
double distance(const RealPoint& a, const GridPoint& b);
double squared_distance(const GridPoint& a, const GridPoint& b);

RealPoint to_real(const GridPoint& p);

StreamUpdate parse_update(std::string_view line, const Instance& inst, std::size_t line_no = 0);
std::string format_update(const StreamUpdate& u);

Instance parse_header(std::string_view line, std::size_t line_no = 1);
std::string format_header(const Instance& inst);

Stream read_stream(std::istream& in);
Stream read_stream_file(const std::string& path);
void write_stream(std::ostream& out, const Stream& s);
void write_stream_file(const std::string& path, const Stream& s);

struct ValidationReport {
  bool ok = true;
  std::size_t index = 0; // 1-based position of the first offending update
  std::string message;
};

ValidationReport validate_stream(const std::vector<StreamUpdate>& updates);

// Net point set after all updates, sorted lexicographically. Throws on invalid streams.
std::vector<GridPoint> live_points(const std::vector<StreamUpdate>& updates);

std::vector<StreamUpdate> insertions(const std::vector<GridPoint>& pts);

} // namespace ufl
