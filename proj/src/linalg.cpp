#include "hdc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdc/ops.hpp"

namespace hdc::linalg {

Matrix identity(std::size_t n) {
    Matrix m(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) {
        m.at(i, i) = 1.0;
    }
    return m;
}

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows[0].size() : 0;
    Matrix m(Shape{r, c});
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c) {
            throw ContractError("matrix_from_rows: ragged rows");
        }
        std::copy(rows[i].begin(), rows[i].end(), m.data.begin() + i * c);
    }
    return m;
}

void KernelSpec::validate() const {
    if (kind == KernelKind::rbf && !(bandwidth > 0.0)) {
        throw ContractError("KernelSpec: rbf bandwidth must be > 0, got " + std::to_string(bandwidth));
    }
    if (kind == KernelKind::polynomial && degree < 1) {
        throw ContractError("KernelSpec: polynomial degree must be >= 1, got " + std::to_string(degree));
    }
}

double GramMatrix::trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < order(); ++i) {
        t += entries.at(i, i);
    }
    return t;
}

double kernel_value(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
    switch (spec.kind) {
        case KernelKind::rbf: {
            double d2 = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                d2 += (a[k] - b[k]) * (a[k] - b[k]);
            }
            return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
        }
        case KernelKind::linear:
        case KernelKind::polynomial: {
            double dot = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                dot += a[k] * b[k];
            }
            return spec.kind == KernelKind::linear ? dot : std::pow(dot + spec.offset, spec.degree);
        }
    }
    return 0.0;
}

namespace {
void require_features(const char* op, const Matrix& z) {
    if (z.rank() != 2 || z.shape[0] == 0 || z.shape[1] == 0) {
        throw ContractError(std::string(op) + ": expected a non-empty [b, d] batch, got " + shape_str(z.shape));
    }
    if (!all_finite(z)) {
        throw ContractError(std::string(op) + ": non-finite features");
    }
}
}  // namespace

GramMatrix gram_matrix(const Matrix& features, const KernelSpec& spec) {
    spec.validate();
    require_features("gram_matrix", features);
    const std::size_t b = features.shape[0], d = features.shape[1];
    GramMatrix g{Matrix(Shape{b, b}), false};
    for (std::size_t i = 0; i < b; ++i) {
        std::span<const double> zi(features.data.data() + i * d, d);
        for (std::size_t j = i; j < b; ++j) {
            std::span<const double> zj(features.data.data() + j * d, d);
            const double v = kernel_value(zi, zj, spec);
            g.entries.at(i, j) = v;
            g.entries.at(j, i) = v;
        }
    }
    return g;
}

double median_bandwidth(const Matrix& features) {
    require_features("median_bandwidth", features);
    const std::size_t b = features.shape[0], d = features.shape[1];
    if (b < 2) {
        throw ContractError("median_bandwidth: need at least 2 samples, got " + std::to_string(b));
    }
    std::vector<double> dist;
    dist.reserve(b * (b - 1) / 2);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = i + 1; j < b; ++j) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = features.at(i, k) - features.at(j, k);
                d2 += diff * diff;
            }
            dist.push_back(std::sqrt(d2));
        }
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t n = dist.size();
    const double med = n % 2 ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
    return med == 0.0 ? 1.0 : med;
}

GramMatrix trace_normalize(const GramMatrix& k) {
    const double t = k.trace();
    if (!(t > 0.0)) {
        throw NumericError("trace_normalize: trace must be positive, got " + std::to_string(t) +
                           " (degenerate batch)");
    }
    GramMatrix out{k.entries, true};
    for (double& v : out.entries.data) {
        v /= t;
    }
    return out;
}

GramMatrix hadamard(const GramMatrix& a, const GramMatrix& b) {
    if (a.entries.shape != b.entries.shape) {
        throw ContractError("hadamard: order mismatch " + shape_str(a.entries.shape) + " vs " +
                            shape_str(b.entries.shape));
    }
    GramMatrix prod{a.entries, false};
    for (std::size_t i = 0; i < prod.entries.numel(); ++i) {
        prod.entries.data[i] *= b.entries.data[i];
    }
    GramMatrix out = trace_normalize(prod);
    const auto ev = symmetric_eigenvalues(out.entries);
    if (!ev.empty() && ev.back() < -1e-8) {
        throw NumericError("hadamard: product not PSD, min eigenvalue " + std::to_string(ev.back()));
    }
    return out;
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rank() != 2 || m.shape[0] != m.shape[1]) {
        return false;
    }
    const std::size_t n = m.shape[0];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(m.at(i, j) - m.at(j, i)) > tol) {
                return false;
            }
        }
    }
    return true;
}

Eigensystem symmetric_eigensystem(const Matrix& m) {
    if (!is_symmetric(m, 1e-9)) {
        throw ContractError("symmetric_eigenvalues: input " + shape_str(m.shape) + " is not symmetric");
    }
    const std::size_t n = m.shape[0];
    Matrix a = m;
    Matrix v = identity(n);
    double fro = 0.0;
    for (double x : a.data) {
        fro += x * x;
    }
    const double tol = 1e-12 * std::max(1.0, std::sqrt(fro));
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) {
                    s += a.at(i, j) * a.at(i, j);
                }
            }
        }
        return std::sqrt(s);
    };

    int sweep = 0;
    for (; off_norm() >= tol; ++sweep) {
        if (sweep == 100) {
            throw NumericError("symmetric_eigenvalues: Jacobi did not converge in 100 sweeps");
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) {
                        continue;
                    }
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = a.at(p, k) = c * akp - s * akq;
                    a.at(k, q) = a.at(q, k) = s * akp + c * akq;
                }
                a.at(p, p) -= t * apq;
                a.at(q, q) += t * apq;
                a.at(p, q) = a.at(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a.at(i, i) > a.at(j, j); });
    Eigensystem es;
    es.sweeps = sweep;
    es.vectors = Matrix(Shape{n, n});
    for (std::size_t c = 0; c < n; ++c) {
        es.values.push_back(a.at(order[c], order[c]));
        for (std::size_t r = 0; r < n; ++r) {
            es.vectors.at(r, c) = v.at(r, order[c]);
        }
    }
    return es;
}

std::vector<double> symmetric_eigenvalues(const Matrix& m) {
    return symmetric_eigensystem(m).values;
}

}  // namespace hdc::linalg

namespace hdc::ad {

template <class T>
Var<T> gram(const Var<T>& features, const linalg::KernelSpec& spec) {
    spec.validate();
    const auto& s = features.shape();
    if (s.size() != 2 || s[0] == 0 || s[1] == 0) {
        throw ContractError("gram: expected a non-empty [b, d] batch, got " + shape_str(s));
    }
    const std::size_t b = s[0], d = s[1];
    const auto& z = features.value().data;
    // Inner products (linear/poly) or squared distances (rbf), kept for backward.
    std::vector<T> base(b * b);
    Tensor<T> out(Shape{b, b});
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = i; j < b; ++j) {
            T acc = 0;
            for (std::size_t k = 0; k < d; ++k) {
                if (spec.kind == linalg::KernelKind::rbf) {
                    const T diff = z[i * d + k] - z[j * d + k];
                    acc += diff * diff;
                } else {
                    acc += z[i * d + k] * z[j * d + k];
                }
            }
            T v = 0;
            switch (spec.kind) {
                case linalg::KernelKind::rbf:
                    v = std::exp(-acc / T(2.0 * spec.bandwidth * spec.bandwidth));
                    break;
                case linalg::KernelKind::linear:
                    v = acc;
                    break;
                case linalg::KernelKind::polynomial:
                    v = std::pow(acc + T(spec.offset), spec.degree);
                    break;
            }
            base[i * b + j] = base[j * b + i] = acc;
            out.data[i * b + j] = out.data[j * b + i] = v;
        }
    }
    Var<T> fv = features;
    return features.tape().record(
        std::move(out), {features}, [fv, spec, b, d, base](const Tensor<T>& g, const Tensor<T>& kmat) {
            Tensor<T>* gz = fv.tape().grad_sink(fv);
            if (!gz) {
                return;
            }
            const auto& z = fv.value().data;
            for (std::size_t i = 0; i < b; ++i) {
                for (std::size_t j = 0; j < b; ++j) {
                    const T sym = g.data[i * b + j] + g.data[j * b + i];
                    switch (spec.kind) {
                        case linalg::KernelKind::rbf: {
                            // d/dz_i exp(-|z_i - z_j|^2 / 2s^2) = K_ij (z_j - z_i) / s^2
                            const T w = sym * kmat.data[i * b + j] / T(spec.bandwidth * spec.bandwidth);
                            for (std::size_t k = 0; k < d; ++k) {
                                gz->data[i * d + k] += w * (z[j * d + k] - z[i * d + k]);
                            }
                            break;
                        }
                        case linalg::KernelKind::linear:
                            for (std::size_t k = 0; k < d; ++k) {
                                gz->data[i * d + k] += sym * z[j * d + k];
                            }
                            break;
                        case linalg::KernelKind::polynomial: {
                            const T w = sym * T(spec.degree) *
                                        std::pow(base[i * b + j] + T(spec.offset), spec.degree - 1);
                            for (std::size_t k = 0; k < d; ++k) {
                                gz->data[i * d + k] += w * z[j * d + k];
                            }
                            break;
                        }
                    }
                }
            }
        });
}

template <class T>
Var<T> trace_normalize(const Var<T>& k) {
    const Var<T> t = trace(k);
    if (!(t.value().item() > T(0))) {
        throw NumericError("trace_normalize: trace must be positive, got " + std::to_string(t.value().item()) +
                           " (degenerate batch)");
    }
    return div_by(k, t);
}

template <class T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) {
        throw ContractError("hadamard: order mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    return trace_normalize(mul(a, b));
}

template Var<float> gram(const Var<float>&, const linalg::KernelSpec&);
template Var<double> gram(const Var<double>&, const linalg::KernelSpec&);
template Var<float> trace_normalize(const Var<float>&);
template Var<double> trace_normalize(const Var<double>&);
template Var<float> hadamard(const Var<float>&, const Var<float>&);
template Var<double> hadamard(const Var<double>&, const Var<double>&);

}  // namespace hdc::ad
