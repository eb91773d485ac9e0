#include "deepfa/config.hpp"
#include "deepfa/dataset.hpp"
#include "deepfa/error.hpp"
#include "deepfa/experiment.hpp"
#include "deepfa/metrics.hpp"
#include "deepfa/opf_oracle.hpp"
#include "deepfa/opf_semi.hpp"
#include "deepfa/report.hpp"
#include "deepfa/tsne.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace deepfa;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.values().begin(), m.values().end(), out.mutable_data());
    return out;
}

std::vector<int> to_ints(const IntArray& a) {
    if (a.ndim() != 1) throw DimensionError("expected a 1-D label array");
    return std::vector<int>(a.data(), a.data() + a.size());
}

// Labels 0..K-1 with K = max + 1; ids are row numbers.
Dataset make_dataset(const DoubleArray& x, const IntArray& y) {
    Dataset ds;
    ds.features = to_matrix(x);
    ds.labels = to_ints(y);
    int k = 0;
    for (int l : ds.labels) k = std::max(k, l + 1);
    for (int c = 0; c < k; ++c) ds.class_names.push_back(std::to_string(c));
    for (std::size_t i = 0; i < ds.labels.size(); ++i) ds.ids.push_back(std::to_string(i));
    ds.validate();
    return ds;
}

opf::SeedSet make_seeds(const std::vector<std::size_t>& idx, const IntArray& labels, int num_classes) {
    opf::SeedSet s;
    s.indices = idx;
    s.labels = to_ints(labels);
    s.num_classes = num_classes;
    return s;
}

py::dict aggregate_dict(const metrics::AggregateRecord& a) {
    py::dict d;
    d["accuracy"] = py::make_tuple(a.accuracy.mean, a.accuracy.std);
    d["kappa"] = py::make_tuple(a.kappa.mean, a.kappa.std);
    d["propagation_accuracy"] = a.propagation_accuracy
                                    ? py::object(py::make_tuple(a.propagation_accuracy->mean,
                                                                a.propagation_accuracy->std))
                                    : py::object(py::none());
    d["partition_count"] = a.partition_count;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Projection-guided label propagation for deep feature annotation.";

    static py::exception<Error> base(m, "DeepfaError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    m.def(
        "split",
        [](const IntArray& labels, double x, double test_frac, std::uint64_t seed) {
            Dataset ds;
            ds.labels = to_ints(labels);
            int k = 0;
            for (int l : ds.labels) k = std::max(k, l + 1);
            for (int c = 0; c < k; ++c) ds.class_names.push_back(std::to_string(c));
            for (std::size_t i = 0; i < ds.labels.size(); ++i) ds.ids.push_back(std::to_string(i));
            ds.features = Matrix(ds.labels.size(), 0);
            const auto a = stratified_split(ds, SplitSpec{x, test_frac, seed});
            py::array_t<std::uint8_t> membership(static_cast<py::ssize_t>(a.membership.size()));
            auto* out = membership.mutable_data();
            for (std::size_t i = 0; i < a.membership.size(); ++i) out[i] = static_cast<std::uint8_t>(a.membership[i]);
            return py::make_tuple(membership,
                                  py::make_tuple(a.counts.supervised, a.counts.unsupervised, a.counts.test));
        },
        py::arg("labels"), py::arg("x"), py::arg("test_frac") = 0.30, py::arg("seed") = 0,
        "Stratified split. Returns (membership with 0=S 1=U 2=T, (|S|, |U|, |T|)).");

    m.def(
        "tsne_embed",
        [](const DoubleArray& x, double perplexity, int iterations, std::uint64_t seed, int threads) {
            tsne::TsneParams p;
            p.perplexity = perplexity;
            p.iterations = iterations;
            p.seed = seed;
            p.threads = threads;
            tsne::Embedding e;
            const Matrix mx = to_matrix(x);
            {
                py::gil_scoped_release release;
                e = tsne::embed(mx, p);
            }
            py::array_t<double> loss(static_cast<py::ssize_t>(e.loss.size()));
            for (std::size_t i = 0; i < e.loss.size(); ++i) loss.mutable_data()[i] = e.loss[i].kl;
            return py::make_tuple(to_array(e.y), loss);
        },
        py::arg("x"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000, py::arg("seed") = 0,
        py::arg("threads") = 1, "Exact t-SNE to 2-D. Returns (embedding, KL per iteration).");

    m.def(
        "propagate",
        [](const DoubleArray& points, const std::vector<std::size_t>& seed_indices, const IntArray& seed_labels,
           int num_classes) {
            const auto seeds = make_seeds(seed_indices, seed_labels, num_classes);
            const auto f = opf::propagate_labels(to_matrix(points), seeds);
            std::vector<bool> supervised(f.size(), false);
            for (auto i : seeds.indices) supervised[i] = true;
            py::dict d;
            d["assigned_label"] = py::array(py::cast(f.assigned_label));
            d["cost"] = py::array(py::cast(f.cost));
            d["confidence"] = py::array(py::cast(opf::confidence(f.class_costs, f.assigned_label, supervised)));
            d["class_costs"] = to_array(f.class_costs);
            std::vector<long long> pred;
            for (auto p : f.predecessor) pred.push_back(p == opf::kNoPredecessor ? -1 : static_cast<long long>(p));
            d["predecessor"] = py::array(py::cast(pred));
            return d;
        },
        py::arg("points"), py::arg("seed_indices"), py::arg("seed_labels"), py::arg("num_classes"),
        "Minimum-bottleneck label propagation from seeds.");

    m.def(
        "minimax_costs",
        [](const DoubleArray& points, const std::vector<std::size_t>& seed_indices, const IntArray& seed_labels,
           int num_classes) {
            return to_array(opf::oracle::minimax_costs(to_matrix(points),
                                                       make_seeds(seed_indices, seed_labels, num_classes)));
        },
        py::arg("points"), py::arg("seed_indices"), py::arg("seed_labels"), py::arg("num_classes"),
        "Reference per-class bottleneck costs by Floyd-Warshall (n <= 256).");

    m.def(
        "accuracy", [](const IntArray& p, const IntArray& t) { return metrics::accuracy(to_ints(p), to_ints(t)); },
        py::arg("predicted"), py::arg("truth"));
    m.def(
        "cohens_kappa",
        [](const IntArray& p, const IntArray& t) { return metrics::cohens_kappa(to_ints(p), to_ints(t)); },
        py::arg("predicted"), py::arg("truth"));

    m.def(
        "run_experiment",
        [](const DoubleArray& x, const IntArray& y, const std::string& mode, double frac, py::dict overrides) {
            const auto ds = make_dataset(x, y);
            ExperimentConfig cfg;
            cfg.mode = parse_mode(mode);
            cfg.split.x = frac;
            auto json_mod = py::module_::import("json");
            const auto text = json_mod.attr("dumps")(overrides).cast<std::string>();
            apply_config_json(nlohmann::json::parse(text), cfg);
            RunResult run;
            {
                py::gil_scoped_release release;
                run = run_experiment(ds, cfg);
            }
            py::list iters;
            for (const auto& a : run.aggregates) iters.append(aggregate_dict(a));
            py::dict d;
            d["iterations"] = iters;
            d["error"] = run.first_error() ? py::object(py::str(*run.first_error())) : py::object(py::none());
            return d;
        },
        py::arg("x"), py::arg("labels"), py::arg("mode") = "deepfa-loop", py::arg("frac") = 0.01,
        py::arg("config") = py::dict(),
        "Run one experiment; `config` uses the JSON configuration keys. Returns per-iteration aggregates.");

    m.def(
        "render_scatter",
        [](const DoubleArray& points, const std::vector<double>& confidence) {
            return report::render_scatter(to_matrix(points), report::confidence_fills(confidence),
                                          report::PlotStyle{});
        },
        py::arg("points"), py::arg("confidence"), "SVG scatter coloured red (0) to green (1).");
}
