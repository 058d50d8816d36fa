#include "digitfrac/approx.hpp"
#include "digitfrac/cli.hpp"
#include "digitfrac/counting.hpp"
#include "digitfrac/digit_system.hpp"
#include "digitfrac/error.hpp"
#include "digitfrac/fourier.hpp"
#include "digitfrac/measure.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;

// Rationals cross the boundary as fractions.Fraction; ints and strings such
// as "1/3" or "0.25" are accepted on the way in.
namespace pybind11::detail {
template <>
struct type_caster<digitfrac::Rational> {
  PYBIND11_TYPE_CASTER(digitfrac::Rational, const_name("fractions.Fraction"));

  bool load(handle src, bool) {
    if (!src) return false;
    std::string text;
    if (py::isinstance<py::str>(src)) {
      text = src.cast<std::string>();
    } else if (py::isinstance<py::int_>(src) && !py::isinstance<py::bool_>(src)) {
      text = py::str(src).cast<std::string>();
    } else if (py::hasattr(src, "numerator") && py::hasattr(src, "denominator") &&
               !py::isinstance<py::float_>(src)) {
      text = py::str(src.attr("numerator")).cast<std::string>() + "/" +
             py::str(src.attr("denominator")).cast<std::string>();
    } else {
      return false;
    }
    try {
      value = digitfrac::parse_rational(text);
    } catch (const digitfrac::Error&) {
      return false;
    }
    return true;
  }

  static handle cast(const digitfrac::Rational& r, return_value_policy, handle) {
    static py::object fraction = py::module_::import("fractions").attr("Fraction");
    return fraction(py::int_(py::str(r.get_num().get_str())), py::int_(py::str(r.get_den().get_str())))
        .release();
  }
};
}  // namespace pybind11::detail

namespace {

using namespace digitfrac;

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict series_dict(const MeasureSeries& s) {
  py::dict d;
  d["n"] = s.n;
  d["term_lo"] = s.term_lo;
  d["term_hi"] = s.term_hi;
  d["partial_lo"] = s.partial_lo;
  d["partial_hi"] = s.partial_hi;
  d["exact"] = s.exact;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = DIGITFRAC_VERSION;

  // Leaked on purpose: the translator may run during interpreter shutdown.
  static PyObject* error = PyErr_NewException("digitfrac._core.DigitfracError", PyExc_ValueError, nullptr);
  m.attr("DigitfracError") = py::handle(error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error)(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error, exc.ptr());
    }
  });

  py::class_<DigitSystem>(m, "DigitSystem")
      .def(py::init([](int base, int dim, std::vector<Digit> digits, std::optional<std::vector<Rational>> weights) {
             DigitSystem sys = weights ? DigitSystem::weighted(base, dim, std::move(digits), std::move(*weights))
                                       : DigitSystem::uniform(base, dim, std::move(digits));
             validate(sys);
             return sys;
           }),
           py::arg("base"), py::arg("dim"), py::arg("digits"), py::arg("weights") = py::none())
      .def_readonly("base", &DigitSystem::base)
      .def_readonly("dim", &DigitSystem::dim)
      .def_readonly("digits", &DigitSystem::digits)
      .def_readonly("weights", &DigitSystem::weights)
      .def_property_readonly("is_split", &DigitSystem::is_split)
      .def("__len__", &DigitSystem::size)
      .def("__eq__", [](const DigitSystem& a, const DigitSystem& b) { return a == b; })
      .def("to_json", [](const DigitSystem& s) { return json_to_py(to_json(s)); })
      .def_static("from_json", [](const py::object& o) { return system_from_json(py_to_json(o)); })
      .def("hash", [](const DigitSystem& s) { return system_hash(s); })
      .def("__repr__", [](const DigitSystem& s) {
        return "DigitSystem(base=" + std::to_string(s.base) + ", dim=" + std::to_string(s.dim) +
               ", digits=" + std::to_string(s.size()) + ")";
      });

  m.def("cantor", &cantor_system);
  m.def("lebesgue", &lebesgue_system, py::arg("base"), py::arg("dim"));
  m.def("slab", &slab_system, py::arg("b"), py::arg("a"), py::arg("k"));
  m.def("product", &product_system, py::arg("factors"));
  m.def("load_system", [](const std::string& spec) { return cli::load_system(spec); }, py::arg("spec"));
  m.def("is_proper", [](const DigitSystem& s) { return validate(s).proper; });
  m.def("hausdorff_dimension", &hausdorff_dimension);

  m.def(
      "contains",
      [](const DigitSystem& s, const RationalVector& x) { return contains_rational(s, x); },
      py::arg("system"), py::arg("point"));

  m.def(
      "box_measure",
      [](const DigitSystem& s, RationalVector lo, RationalVector hi, bool closed) {
        Box box = closed ? Box::closed(std::move(lo), std::move(hi)) : Box::open(std::move(lo), std::move(hi));
        auto r = box_measure(s, box);
        return py::make_tuple(r.lower, r.upper, r.exact);
      },
      py::arg("system"), py::arg("lo"), py::arg("hi"), py::arg("closed") = true);

  m.def(
      "sample",
      [](const DigitSystem& s, int depth, std::uint64_t seed) { return sample(s, depth, seed).coords; },
      py::arg("system"), py::arg("depth"), py::arg("seed"));

  m.def(
      "mu_hat",
      [](const DigitSystem& s, std::vector<std::int64_t> xi, double tol) {
        auto r = mu_hat(s, xi, tol);
        return py::make_tuple(r.value, r.err);
      },
      py::arg("system"), py::arg("xi"), py::arg("tol") = 1e-12);

  m.def(
      "l1_partial_sum",
      [](const DigitSystem& s, int Q, double tol, int threads) {
        L1SumOptions o;
        o.threads = threads;
        CertifiedValue r;
        {
          py::gil_scoped_release release;
          r = l1_partial_sum(s, Q, tol, o);
        }
        return py::make_tuple(r.value, r.err);
      },
      py::arg("system"), py::arg("Q"), py::arg("tol_per_term") = 1e-12, py::arg("threads") = 1);

  m.def(
      "l1_lower_bound",
      [](const DigitSystem& s, int L, double grid, int threads) {
        L1BoundReport r;
        {
          py::gil_scoped_release release;
          r = l1_lower_bound(s, L, grid, threads);
        }
        return json_to_py(to_json(r));
      },
      py::arg("system"), py::arg("L"), py::arg("grid_step"), py::arg("threads") = 1);

  m.def(
      "count_near",
      [](const DigitSystem& s, std::int64_t Q, const std::string& delta, int threads) {
        CountOptions o;
        o.threads = threads;
        CountResult r;
        {
          py::gil_scoped_release release;
          r = count_near(s, CountQuery{Q, DeltaSpec::parse(delta).resolve(Q)}, o);
        }
        py::dict d;
        d["count"] = r.count;
        d["exact"] = r.exact;
        d["count_lo"] = r.count_lo;
        d["count_hi"] = r.count_hi;
        d["heuristic"] = r.heuristic;
        d["ratio"] = r.ratio;
        d["per_q"] = r.per_q;
        return d;
      },
      py::arg("system"), py::arg("Q"), py::arg("delta") = "0", py::arg("threads") = 1);

  m.def(
      "count_on",
      [](const DigitSystem& s, std::int64_t Q, int threads) {
        CountOptions o;
        o.threads = threads;
        return count_on(s, Q, o);
      },
      py::arg("system"), py::arg("Q"), py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());

  m.def("psi", [](const std::string& f, std::int64_t n) { return psi_exact(ApproxFunction::parse(f), n); },
        py::arg("family"), py::arg("n"));

  m.def(
      "khinchin_sum",
      [](const DigitSystem& s, const std::string& f, std::int64_t N, RationalVector y, int threads) {
        SumOptions o;
        o.threads = threads;
        MeasureSeries r;
        {
          py::gil_scoped_release release;
          r = khinchin_sum_mu(s, ApproxFunction::parse(f), y, N, o);
        }
        return series_dict(r);
      },
      py::arg("system"), py::arg("psi"), py::arg("N"), py::arg("y") = RationalVector{}, py::arg("threads") = 1);

  m.def(
      "gallagher_sum",
      [](const DigitSystem& s, const std::string& f, std::int64_t N, RationalVector y, int threads) {
        SumOptions o;
        o.threads = threads;
        GallagherSeries r;
        {
          py::gil_scoped_release release;
          r = gallagher_sum_mu(s, ApproxFunction::parse(f), y, N, o);
        }
        return py::make_tuple(series_dict(r.lower), series_dict(r.upper));
      },
      py::arg("system"), py::arg("psi"), py::arg("N"), py::arg("y") = RationalVector{}, py::arg("threads") = 1);

  m.def(
      "limsup_fraction",
      [](const DigitSystem& s, const std::string& f, std::int64_t N0, std::int64_t N1, std::int64_t samples,
         std::uint64_t seed, const std::string& mode, int threads) {
        LimsupEstimate r;
        {
          py::gil_scoped_release release;
          r = limsup_fraction(s, ApproxFunction::parse(f), {}, N0, N1, samples, seed, parse_mode(mode), threads);
        }
        py::dict d;
        d["hits"] = r.hits;
        d["samples"] = r.samples;
        d["fraction"] = r.fraction;
        d["ci"] = py::make_tuple(r.ci_lo, r.ci_hi);
        return d;
      },
      py::arg("system"), py::arg("psi"), py::arg("N0"), py::arg("N1"), py::arg("samples"), py::arg("seed") = 0,
      py::arg("mode") = "sim", py::arg("threads") = 1);

  m.def(
      "intrinsic_hits",
      [](const DigitSystem& s, const RationalVector& x, double tau, std::int64_t Q) {
        std::vector<std::pair<std::vector<std::int64_t>, std::int64_t>> out;
        for (const auto& h : intrinsic_hits(s, x, tau, Q)) out.emplace_back(h.a, h.n);
        return out;
      },
      py::arg("system"), py::arg("x"), py::arg("tau"), py::arg("Q"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "digitfrac");
        std::ostringstream out, err;
        int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
