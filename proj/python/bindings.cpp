#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "hdc/entropy.hpp"
#include "hdc/linalg.hpp"
#include "hdc/losses.hpp"
#include "hdc/metrics.hpp"
#include "hdc/ops.hpp"
#include "hdc/synth.hpp"
#include "hdc/verify.hpp"

namespace py = pybind11;
using namespace hdc;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

linalg::Matrix to_matrix(const F64& a) {
    if (a.ndim() != 2) {
        throw ContractError("expected a 2-d array");
    }
    linalg::Matrix m(Shape{std::size_t(a.shape(0)), std::size_t(a.shape(1))});
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::array_t<double> to_numpy(const Tensor<double>& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> out(shape);
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

metrics::BinaryMask to_mask(const U8& a) {
    if (a.ndim() != 2) {
        throw ContractError("expected a 2-d mask");
    }
    metrics::BinaryMask m(a.shape(0), a.shape(1));
    const auto* p = a.data();
    for (py::ssize_t y = 0; y < a.shape(0); ++y) {
        for (py::ssize_t x = 0; x < a.shape(1); ++x) {
            if (p[y * a.shape(1) + x]) {
                m.set(y, x);
            }
        }
    }
    return m;
}

linalg::KernelSpec kernel_spec(const linalg::Matrix& z, const std::string& kind, std::optional<double> bandwidth,
                               int degree, double offset) {
    if (kind == "rbf") return linalg::KernelSpec::rbf(bandwidth.value_or(linalg::median_bandwidth(z)));
    if (kind == "linear") return linalg::KernelSpec::linear();
    if (kind == "polynomial") return linalg::KernelSpec::polynomial(degree, offset);
    throw ContractError("unknown kernel '" + kind + "'");
}

linalg::GramMatrix normalized(const F64& k) {
    return linalg::trace_normalize(linalg::GramMatrix{to_matrix(k), false});
}

}  // namespace

PYBIND11_MODULE(_hdc, m) {
    m.doc() = "Core kernels of the hybrid-decoder segmentation toolkit";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def(
        "gram_matrix",
        [](const F64& z, const std::string& kernel, std::optional<double> bandwidth, int degree, double offset,
           bool normalize) {
            const auto feats = to_matrix(z);
            auto k = linalg::gram_matrix(feats, kernel_spec(feats, kernel, bandwidth, degree, offset));
            return to_numpy(normalize ? linalg::trace_normalize(k).entries : k.entries);
        },
        py::arg("features"), py::arg("kernel") = "rbf", py::arg("bandwidth") = py::none(), py::arg("degree") = 2,
        py::arg("offset") = 1.0, py::arg("normalize") = false,
        "Pairwise kernel matrix of a [b, d] batch; rbf bandwidth defaults to the median pairwise distance.");
    m.def("median_bandwidth", [](const F64& z) { return linalg::median_bandwidth(to_matrix(z)); });
    m.def(
        "renyi_entropy",
        [](const F64& k, double alpha) {
            return entropy::matrix_renyi_entropy(normalized(k), entropy::EntropyOrder(alpha));
        },
        py::arg("gram"), py::arg("alpha") = 2.0, "Matrix-based Renyi entropy (bits) of a PSD matrix after trace scaling.");
    m.def(
        "mutual_information",
        [](const F64& k1, const F64& k2, double alpha) {
            return entropy::matrix_mutual_information(normalized(k1), normalized(k2), entropy::EntropyOrder(alpha));
        },
        py::arg("k1"), py::arg("k2"), py::arg("alpha") = 2.0);
    m.def("eigenvalues", [](const F64& k) { return linalg::symmetric_eigenvalues(to_matrix(k)); });

    m.def(
        "cg_loss",
        [](const F64& zs, const F64& zt, int alpha, double eps) {
            ad::Tape<double> tape;
            const auto s = tape.leaf(to_matrix(zs));
            const auto t = tape.constant(to_matrix(zt));
            const auto loss = losses::cg_loss(
                losses::correlation_matrix(ad::standardize_columns(s), ad::standardize_columns(t)), alpha, eps);
            const auto g = tape.backward(loss);
            return py::make_tuple(loss.value().item(), to_numpy(g.at(s)));
        },
        py::arg("zs"), py::arg("zt"), py::arg("alpha") = 2, py::arg("eps") = 1e-8,
        "Cross-correlation loss and its gradient with respect to zs.");

    m.def("dice", [](const U8& a, const U8& b) { return metrics::dice(to_mask(a), to_mask(b)); });
    m.def(
        "hausdorff",
        [](const U8& a, const U8& b, double percentile) {
            const auto d = metrics::hausdorff(to_mask(a), to_mask(b), percentile);
            return py::make_tuple(d.value, d.degenerate);
        },
        py::arg("a"), py::arg("b"), py::arg("percentile") = 100.0, "(distance, degenerate) between boundaries.");
    m.def("asd", [](const U8& a, const U8& b) {
        const auto d = metrics::asd(to_mask(a), to_mask(b));
        return py::make_tuple(d.value, d.degenerate);
    });

    m.def(
        "generate_sample",
        [](std::uint64_t seed, std::uint64_t id, std::size_t h, std::size_t w, std::size_t classes) {
            synth::SynthParams p;
            p.classes = classes;
            const auto s = synth::generate_sample(seed, id, h, w, p);
            py::array_t<float> img({py::ssize_t(h), py::ssize_t(w)});
            py::array_t<std::uint8_t> mask({py::ssize_t(h), py::ssize_t(w)});
            std::copy(s.image.pixels.begin(), s.image.pixels.end(), img.mutable_data());
            std::copy(s.mask.labels.begin(), s.mask.labels.end(), mask.mutable_data());
            return py::make_tuple(img, mask);
        },
        py::arg("seed"), py::arg("id"), py::arg("height") = 64, py::arg("width") = 64, py::arg("classes") = 2);

    m.def(
        "run_property_suites",
        [](std::size_t gradient_seeds, std::size_t entropy_matrices, std::size_t metric_pairs, bool inject_cg) {
            verify::SuiteOptions opt{gradient_seeds, entropy_matrices, metric_pairs, inject_cg};
            std::vector<verify::CheckResult> results;
            {
                py::gil_scoped_release release;
                results = verify::run_property_suites(opt);
            }
            py::list out;
            for (const auto& r : results) {
                py::dict d;
                d["name"] = r.name;
                d["pass"] = r.pass;
                d["detail"] = r.detail;
                d["seconds"] = r.seconds;
                out.append(d);
            }
            return out;
        },
        py::arg("gradient_seeds") = 20, py::arg("entropy_matrices") = 100, py::arg("metric_pairs") = 1000,
        py::arg("inject_cg_sign_error") = false);
}
