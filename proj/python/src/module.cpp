#include "wienerlab/chaos.hpp"
#include "wienerlab/gaussian.hpp"
#include "wienerlab/measure.hpp"
#include "wienerlab/runner.hpp"
#include "wienerlab/transport.hpp"

#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace wienerlab;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix pool_matrix(const SamplePool& pool) {
    return Eigen::Map<const RowMatrix>(pool.data().data(), pool.size(), pool.dim());
}

SamplePool pool_from_matrix(const RowMatrix& x) {
    return SamplePool(std::vector<double>(x.data(), x.data() + x.size()), x.cols());
}

PointCloud make_cloud(const Matrix& points, const std::optional<Vector>& weights) {
    return weights ? PointCloud(points, *weights) : PointCloud(points);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Wiener-space experiments: chaos calculus, changes of measure, inequalities, transport";
    m.attr("__version__") = version();
    m.attr("schema_version") = kReportSchemaVersion;

    // Gaussian pools

    m.def("sample_pool",
          [](std::uint64_t seed, std::size_t n, std::size_t dim, std::uint32_t stream) {
              return pool_matrix(SamplePool(seed, n, dim, stream));
          },
          "seed"_a, "n_samples"_a, "dim"_a, "stream"_a = 0,
          "n_samples x dim standard normal coordinates from the counter-based generator");
    m.def("pool_to_csv",
          [](const RowMatrix& x) {
              std::ostringstream os;
              pool_from_matrix(x).write_csv(os);
              return os.str();
          },
          "rows"_a);
    m.def("pool_from_csv",
          [](const std::string& text) {
              std::istringstream is(text);
              return pool_matrix(SamplePool::read_csv(is));
          },
          "text"_a);

    // Chaos calculus

    m.def("hermite", &hermite, "n"_a, "x"_a, "Probabilists' Hermite polynomial");

    py::class_<ChaosExpansion>(m, "ChaosExpansion")
        .def(py::init<std::size_t>(), "dim"_a)
        .def_static("constant", &ChaosExpansion::constant, "dim"_a, "c"_a)
        .def_static(
            "first_order", [](const std::vector<double>& h) { return ChaosExpansion::first_order(h); }, "h"_a)
        .def_static(
            "wick_power",
            [](const std::vector<double>& h, std::size_t n) {
                return ChaosExpansion::multiple_integral(SymmetricKernel::tensor_power(h, n));
            },
            "h"_a, "n"_a, "I_n(h^{(x)n})")
        .def_static(
            "from_json", [](const std::string& s) { return chaos_from_json(nlohmann::json::parse(s)); }, "text"_a)
        .def("to_json", [](const ChaosExpansion& f) { return nlohmann::json(f).dump(); })
        .def_property_readonly("dim", &ChaosExpansion::dim)
        .def_property_readonly("max_order", &ChaosExpansion::max_order)
        .def("mean", &ChaosExpansion::mean)
        .def("variance", &ChaosExpansion::variance)
        .def("l2_norm_sq", &ChaosExpansion::l2_norm_sq)
        .def(
            "evaluate",
            [](const ChaosExpansion& f, const RowMatrix& x) {
                if (static_cast<std::size_t>(x.cols()) != f.dim()) throw py::value_error("column count != dim");
                const CompiledExpansion c(f);
                Vector out(x.rows());
                for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = c({x.row(i).data(), f.dim()});
                return out;
            },
            "rows"_a, "Pointwise values on each row of coordinates")
        .def("multiply", &multiply, "other"_a, "order_cap"_a = kDefaultOrderCap)
        .def("number_op", &number_op)
        .def("ou_semigroup", &ou_semigroup, "t"_a)
        .def("divergence_of_derivative", [](const ChaosExpansion& f) { return divergence(derivative(f)); })
        .def("expectation_product", &expectation_product, "other"_a)
        .def(py::self + py::self)
        .def(py::self - py::self)
        .def(double() * py::self)
        .def(py::self == py::self)
        .def("__repr__", [](const ChaosExpansion& f) {
            return "<ChaosExpansion dim=" + std::to_string(f.dim()) + " max_order=" + std::to_string(f.max_order()) +
                   ">";
        });

    // Changes of measure

    m.def("det2", &det2, "a"_a, "Carleman-Fredholm determinant det2(I + A)");
    m.def("det2_product_residual", &det2_product_residual, "a"_a, "b"_a);

    // Transport

    py::class_<TransportPlan>(m, "TransportPlan")
        .def_readonly("cost", &TransportPlan::cost)
        .def_readonly("optimality_residual", &TransportPlan::optimality_residual)
        .def_readonly("marginal_error", &TransportPlan::marginal_error)
        .def_readonly("solver", &TransportPlan::solver)
        .def_readonly("u", &TransportPlan::u)
        .def_readonly("v", &TransportPlan::v)
        .def("dense", &TransportPlan::dense)
        .def("triplets",
             [](const TransportPlan& p) {
                 std::vector<std::tuple<std::size_t, std::size_t, double>> out;
                 out.reserve(p.entries.size());
                 for (const auto& e : p.entries) out.emplace_back(e.i, e.j, e.mass);
                 return out;
             })
        .def("to_csv",
             [](const TransportPlan& p) {
                 std::ostringstream os;
                 p.write_csv(os);
                 return os.str();
             })
        .def("cyclic_monotonicity_residual", &cyclic_monotonicity_residual, "cycle_len"_a, "trials"_a,
             "seed"_a = 0)
        .def("cyclic_monotonicity_residual_exhaustive", &cyclic_monotonicity_residual_exhaustive,
             "max_len"_a = 4);

    m.def(
        "solve_ot",
        [](const Matrix& source, const Matrix& target, std::optional<Vector> source_weights,
           std::optional<Vector> target_weights, bool entropic, double epsilon) {
            SolveOptions opt;
            opt.entropic = entropic;
            opt.epsilon = epsilon;
            return solve_discrete_ot(make_cloud(source, source_weights), make_cloud(target, target_weights), opt);
        },
        "source"_a, "target"_a, "source_weights"_a = py::none(), "target_weights"_a = py::none(),
        "entropic"_a = false, "epsilon"_a = 1e-2, "Optimal plan for squared Euclidean cost");

    m.def("monge_ampere_residual", &monge_ampere_residual, "cov_target"_a, "points"_a);
    m.def("brenier_map", [](const Matrix& cov) { return gaussian_brenier(cov).a; }, "cov_target"_a,
          "Matrix A of the Brenier map x -> A x onto N(0, cov)");

    // Experiments

    m.def("list_experiments", [] {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& e : list_experiments()) {
            out.push_back({{"name", e.name}, {"theorem", e.theorem}, {"summary", e.summary}, {"defaults", e.defaults}});
        }
        return out.dump();
    });
    m.def(
        "run",
        [](const std::string& config, std::optional<std::filesystem::path> out_dir) {
            const auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(config));
            RunReport report;
            {
                py::gil_scoped_release release;
                report = run(cfg, out_dir);
            }
            return nlohmann::json(report).dump();
        },
        "config_json"_a, "out_dir"_a = py::none());

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
