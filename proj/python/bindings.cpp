#include "sfwc/compress/compress.hpp"
#include "sfwc/errors.hpp"
#include "sfwc/harness/config.hpp"
#include "sfwc/harness/experiment.hpp"
#include "sfwc/harness/gradcheck.hpp"
#include "sfwc/harness/select.hpp"
#include "sfwc/harness/verify.hpp"
#include "sfwc/numerics/linalg.hpp"
#include "sfwc/optim/steps.hpp"
#include "sfwc/regions/region.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace sfwc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array &a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    if (shape.empty())
        shape = {1};
    const double *p = a.data();
    return Tensor(shape, std::vector<double>(p, p + a.size()));
}

Array to_array(const Tensor &t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

py::object json_to_py(const Json &j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json py_to_json(const py::object &o) {
    if (py::isinstance<py::str>(o))
        return Json::parse(o.cast<std::string>());
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

RegionKind kind_from(const std::string &name) {
    auto k = parse_region_kind(name);
    if (!k)
        throw Error(Errc::ConfigError, "unknown region kind '" + name + "'");
    return *k;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stochastic Frank-Wolfe training with compression-aware feasible regions";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    py::class_<FeasibleRegion>(m, "FeasibleRegion")
        .def_static("l2_ball", [](const Shape &s, double tau) { return FeasibleRegion::l2_ball(s, tau); },
                    py::arg("shape"), py::arg("tau"))
        .def_static("k_sparse_polytope", &FeasibleRegion::k_sparse_polytope, py::arg("shape"), py::arg("k"),
                    py::arg("tau"))
        .def_static("k_support", &FeasibleRegion::k_support, py::arg("shape"), py::arg("k"), py::arg("tau"))
        .def_static("group_k_support", &FeasibleRegion::group_k_support, py::arg("shape"), py::arg("groups"),
                    py::arg("k"), py::arg("tau"))
        .def_static("spectral_k_support", &FeasibleRegion::spectral_k_support, py::arg("shape"), py::arg("k"),
                    py::arg("tau"))
        .def_property_readonly("kind", [](const FeasibleRegion &r) { return std::string(region_kind_name(r.kind())); })
        .def_property_readonly("tau", &FeasibleRegion::tau)
        .def_property_readonly("k", &FeasibleRegion::k)
        .def_property_readonly("shape", &FeasibleRegion::shape)
        .def_property_readonly("groups", &FeasibleRegion::groups)
        .def_property_readonly("diameter", &FeasibleRegion::diameter)
        .def("with_tau", &FeasibleRegion::with_tau)
        .def("__repr__", [](const FeasibleRegion &r) {
            return "FeasibleRegion(" + std::string(region_kind_name(r.kind())) + ", shape=" + shape_string(r.shape()) +
                   ", k=" + std::to_string(r.k()) + ", tau=" + format_number(r.tau()) + ")";
        });

    m.def("lmo", [](const FeasibleRegion &r, const Array &g) { return to_array(lmo(r, to_tensor(g))); },
          py::arg("region"), py::arg("g"), "argmin over the region of <v, g>");
    m.def("gauge", [](const FeasibleRegion &r, const Array &x) { return gauge(r, to_tensor(x)); }, py::arg("region"),
          py::arg("x"));
    m.def("k_support_norm",
          [](const Array &x, std::size_t k) { return k_support_norm(to_tensor(x).data(), k); }, py::arg("x"),
          py::arg("k"));
    m.def("radius_from_diameter",
          [](const std::string &kind, double d, std::size_t k) { return radius_from_diameter(kind_from(kind), d, k); },
          py::arg("kind"), py::arg("diameter"), py::arg("k"));
    m.def("ensure_feasible",
          [](const FeasibleRegion &r, const Array &x) { return to_array(ensure_feasible(r, to_tensor(x))); });
    m.def("brute_force_lmo_value",
          [](const FeasibleRegion &r, const Array &g) { return brute_force_lmo_value(r, to_tensor(g)); });

    m.def("svd_full", [](const Array &a) {
        const SvdFactors f = svd_full(to_tensor(a));
        return py::make_tuple(to_array(f.u), f.sigma, to_array(f.v));
    });
    m.def(
        "svd_topk",
        [](const Array &a, std::size_t k, double tol, std::size_t max_iter) {
            PowerIterationOptions o;
            o.tol = tol;
            o.max_iter = max_iter;
            const SvdFactors f = svd_topk(to_tensor(a), k, o);
            return py::make_tuple(to_array(f.u), f.sigma, to_array(f.v));
        },
        py::arg("a"), py::arg("k"), py::arg("tol") = 1e-8, py::arg("max_iter") = 500);
    m.def("svt", [](const Array &a, double threshold) { return to_array(svt(to_tensor(a), threshold)); });

    m.def("theorem_schedule", [](double M, double G, double D, double h0, double beta, std::size_t T) {
        const TheoremSchedule s = theorem_schedule({M, G, D, h0, beta, T});
        return py::make_tuple(s.eta, s.batch);
    });
    m.def("theorem_bound", [](double M, double G, double D, double h0, double beta, std::size_t T) {
        return theorem_bound({M, G, D, h0, beta, T});
    });

    m.def("budget_count", &budget_count, py::arg("fraction"), py::arg("total"));
    m.def("rank_for_reduction", &rank_for_reduction, py::arg("n"), py::arg("m"), py::arg("reduction"));

    m.def(
        "verify_lmo",
        [](const std::string &kind, const Shape &shape, std::size_t k, std::size_t trials, std::size_t group_size,
           std::uint64_t seed) {
            LmoCase c{kind_from(kind), shape, k, group_size, trials, seed};
            const LmoReport r = verify_lmo(c);
            return py::dict(py::arg("label") = r.label(), py::arg("max_gap") = r.max_gap,
                            py::arg("max_infeasibility") = r.max_infeasibility, py::arg("trials") = r.trials,
                            py::arg("passed") = r.pass);
        },
        py::arg("kind"), py::arg("shape"), py::arg("k"), py::arg("trials") = 1000, py::arg("group_size") = 2,
        py::arg("seed") = 0);

    m.def(
        "check_convergence",
        [](std::size_t seeds, std::vector<std::size_t> horizons) {
            ConvergenceCheckOptions o;
            o.seeds = seeds;
            o.horizons = std::move(horizons);
            const ConvergenceReport r = convergence_check(o);
            py::list hs;
            for (const auto &h : r.horizons)
                hs.append(py::dict(py::arg("horizon") = h.horizon, py::arg("eta") = h.eta, py::arg("bound") = h.bound,
                                   py::arg("measured_mean") = h.measured_mean,
                                   py::arg("within_bound") = h.within_bound));
            return py::dict(py::arg("ratio") = r.ratio, py::arg("passed") = r.pass, py::arg("horizons") = hs,
                            py::arg("smoothness") = r.smoothness, py::arg("lipschitz") = r.lipschitz,
                            py::arg("initial_gap") = r.initial_gap, py::arg("diameter") = r.diameter);
        },
        py::arg("seeds") = 20, py::arg("horizons") = std::vector<std::size_t>{100, 400});

    m.def("gradcheck", [](std::uint64_t seed) {
        py::list out;
        for (const auto &r : builtin_gradchecks(seed))
            out.append(py::dict(py::arg("name") = r.name, py::arg("max_rel_error") = r.max_rel_error,
                                py::arg("tolerance") = r.tolerance, py::arg("passed") = r.pass));
        return out;
    }, py::arg("seed") = 0);

    m.def("parse_config", [](const py::object &doc) { return json_to_py(parse_config(py_to_json(doc)).raw); },
          "validate a config (dict or JSON text); raises sfwc.Error on schema violations");
    m.def("expand_grid", [](const py::object &doc) {
        py::list out;
        for (const auto &c : expand_grid(py_to_json(doc)))
            out.append(py::make_tuple(c.id, json_to_py(c.doc)));
        return out;
    });

    m.def(
        "run_experiment",
        [](const py::object &doc, const std::filesystem::path &out, std::vector<std::uint64_t> seeds) {
            const ExperimentConfig config = parse_config(py_to_json(doc));
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(config, out, seeds);
            }
            py::list summaries;
            for (const auto &run : r.runs)
                summaries.append(json_to_py(seed_summary(run)));
            return py::make_tuple(r.dir, summaries);
        },
        py::arg("config"), py::arg("out"), py::arg("seeds") = std::vector<std::uint64_t>{},
        "train every seed, run the compression sweep and write the cell directory");

    m.def(
        "run_sweep",
        [](const py::object &doc, const std::filesystem::path &out, std::vector<std::uint64_t> seeds,
           std::size_t threads) {
            const Json j = py_to_json(doc);
            std::vector<ExperimentResult> results;
            {
                py::gil_scoped_release release;
                results = run_sweep(j, out, seeds, threads);
            }
            std::vector<std::filesystem::path> dirs;
            for (const auto &r : results)
                dirs.push_back(r.dir);
            return dirs;
        },
        py::arg("config"), py::arg("out"), py::arg("seeds") = std::vector<std::uint64_t>{}, py::arg("threads") = 1);

    m.def(
        "select",
        [](const std::filesystem::path &sweep_dir, std::optional<double> reference, double threshold,
           const std::string &filter_metric) {
            const SweepScan scan = scan_sweep(sweep_dir);
            const auto &dense = filter_metric == "test" ? scan.dense_test : scan.dense_train;
            double ref = 0.0;
            if (reference)
                ref = *reference;
            else
                for (const auto &[id, acc] : dense)
                    ref = std::max(ref, acc);
            return json_to_py(selection_json(grid_select(scan.rows, dense, ref, threshold), ref, threshold,
                                             filter_metric));
        },
        py::arg("sweep_dir"), py::arg("reference") = py::none(), py::arg("threshold") = 0.05,
        py::arg("filter_metric") = "train");

    m.def("read_snapshot", [](const std::filesystem::path &bin, const std::filesystem::path &manifest) {
        py::dict out;
        for (const auto &t : read_snapshot(bin, manifest))
            out[py::str(t.name)] = to_array(t.value);
        return out;
    });
}
