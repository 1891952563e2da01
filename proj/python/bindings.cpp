#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ufl/core.hpp"
#include "ufl/estimators.hpp"
#include "ufl/harness.hpp"
#include "ufl/oracle.hpp"

namespace py = pybind11;
using namespace ufl;

namespace {

EstimatorOptions make_options(const std::string& hash, double gamma, std::size_t m, int T, double c, std::size_t K,
                              bool replay) {
  EstimatorOptions o;
  o.hash = parse_hash_kind(hash);
  o.gamma = gamma;
  o.m = m;
  o.T = T;
  o.c = c;
  o.K = K;
  o.replay = replay;
  return o;
}

} // namespace

PYBIND11_MODULE(_ufl, m) {
  m.doc() = "Streaming estimators for Euclidean uniform facility location cost";

  py::class_<Instance>(m, "Instance")
      .def(py::init([](int d, std::int64_t delta, double f) {
             Instance i{d, delta, f};
             i.validate();
             return i;
           }),
           py::arg("d"), py::arg("delta"), py::arg("f"))
      .def_readonly("d", &Instance::d)
      .def_readonly("delta", &Instance::delta)
      .def_readonly("f", &Instance::f)
      .def_property_readonly("L", &Instance::L)
      .def("contains", &Instance::contains)
      .def("__repr__", [](const Instance& i) { return format_header(i); });

  py::class_<Stream>(m, "Stream")
      .def(py::init([](const Instance& inst, const std::vector<std::pair<int, GridPoint>>& ups) {
             Stream s{inst, {}};
             for (const auto& [sign, p] : ups) s.updates.push_back({sign, p});
             return s;
           }),
           py::arg("instance"), py::arg("updates"))
      .def_readonly("instance", &Stream::inst)
      .def_property_readonly("updates",
                             [](const Stream& s) {
                               std::vector<std::pair<int, GridPoint>> out;
                               for (const auto& u : s.updates) out.emplace_back(u.sign, u.point);
                               return out;
                             })
      .def("live_points", [](const Stream& s) { return live_points(s.updates); })
      .def("__len__", [](const Stream& s) { return s.updates.size(); });

  m.def("read_stream", &read_stream_file, py::arg("path"));
  m.def("write_stream", &write_stream_file, py::arg("path"), py::arg("stream"));

  m.def("gen_uniform", &gen_uniform, py::arg("n"), py::arg("d"), py::arg("delta"), py::arg("f"), py::arg("seed") = 0);
  m.def("gen_clustered", &gen_clustered, py::arg("n"), py::arg("d"), py::arg("delta"), py::arg("f"), py::arg("k") = 5,
        py::arg("radius") = 0.0, py::arg("seed") = 0);
  m.def("gen_example_hard", [](std::size_t n, std::uint64_t seed) { return gen_example_hard(n, seed).stream; },
        py::arg("n"), py::arg("seed") = 0);
  m.def("gen_bhm", [](int n, bool yes, std::uint64_t seed) { return gen_bhm_instance(n, yes, seed).stream; },
        py::arg("n"), py::arg("yes"), py::arg("seed") = 0);
  m.def("bhm_candidate_optimum",
        [](int n, bool yes, std::uint64_t seed) { return bhm_candidate_optimum(gen_bhm_instance(n, yes, seed)); },
        py::arg("n"), py::arg("yes"), py::arg("seed") = 0);
  m.def("with_deletions", &with_deletions, py::arg("stream"), py::arg("rate"), py::arg("seed") = 0);
  m.def("shuffle_order", &shuffle_order, py::arg("stream"), py::arg("seed") = 0);

  m.def("compute_rp", &compute_rp, py::arg("points"), py::arg("f"));
  m.def("sum_rp", &sum_rp, py::arg("points"), py::arg("f"));
  m.def(
      "mp_solve",
      [](const std::vector<GridPoint>& P, double f) {
        auto s = mp_solve(P, f);
        return py::make_tuple(s.cost, s.facilities);
      },
      py::arg("points"), py::arg("f"), "Greedy facility solution as (cost, facilities).");

  py::class_<LevelReport>(m, "LevelReport")
      .def_readonly("level", &LevelReport::level)
      .def_readonly("z", &LevelReport::z)
      .def_readonly("samples", &LevelReport::samples)
      .def_readonly("failures", &LevelReport::failures)
      .def_readonly("support", &LevelReport::support);

  py::class_<EstimateReport>(m, "EstimateReport")
      .def_readonly("algo", &EstimateReport::algo)
      .def_readonly("estimate", &EstimateReport::estimate)
      .def_readonly("mp_cost", &EstimateReport::mp_cost)
      .def_readonly("seed", &EstimateReport::seed)
      .def_readonly("m", &EstimateReport::m)
      .def_readonly("T", &EstimateReport::T)
      .def_readonly("gamma", &EstimateReport::gamma)
      .def_readonly("lambda_", &EstimateReport::lambda)
      .def_readonly("samples", &EstimateReport::samples)
      .def_readonly("failures", &EstimateReport::failures)
      .def_readonly("fallback", &EstimateReport::fallback)
      .def_readonly("unreliable", &EstimateReport::unreliable)
      .def_readonly("space_bytes", &EstimateReport::space_bytes)
      .def_readonly("levels", &EstimateReport::levels);

  m.def(
      "two_pass_estimate",
      [](const Stream& s, std::size_t m_, std::uint64_t seed, const std::string& hash, bool replay) {
        return two_pass_estimate(s, m_, seed, make_options(hash, 0, m_, 0, 20, 0, replay));
      },
      py::arg("stream"), py::arg("m") = 0, py::arg("seed") = 0, py::arg("hash") = "face", py::arg("replay") = true);
  m.def(
      "random_order_estimate",
      [](const Stream& s, std::size_t m_, std::uint64_t seed, const std::string& hash, bool replay) {
        return random_order_estimate(s, m_, seed, make_options(hash, 0, m_, 0, 20, 0, replay));
      },
      py::arg("stream"), py::arg("m") = 0, py::arg("seed") = 0, py::arg("hash") = "face", py::arg("replay") = true);
  m.def(
      "one_pass_estimate",
      [](const Stream& s, std::uint64_t seed, double gamma, std::size_t m_, int T, double c, std::size_t K,
         const std::string& hash, bool replay) {
        return one_pass_estimate(s, seed, make_options(hash, gamma, m_, T, c, K, replay));
      },
      py::arg("stream"), py::arg("seed") = 0, py::arg("gamma") = 0.0, py::arg("m") = 0, py::arg("T") = 0,
      py::arg("c") = 20.0, py::arg("K") = 4096, py::arg("hash") = "face", py::arg("replay") = true);
  m.def("offline_estimate", &offline_estimate, py::arg("stream"));
}
