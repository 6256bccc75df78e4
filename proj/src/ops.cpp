#include "hdc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <cblas.h>

namespace hdc::ad {

namespace {

template <class T>
void require_same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape()) {
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    }
}

template <class T>
void require_rank(const char* op, const Var<T>& a, std::size_t rank) {
    if (a.shape().size() != rank) {
        throw ContractError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                            shape_str(a.shape()));
    }
}

template <class T>
void require_square(const char* op, const Var<T>& a) {
    const auto& s = a.shape();
    if (s.size() != 2 || s[0] != s[1]) {
        throw ContractError(std::string(op) + ": expected a square matrix, got shape " + shape_str(s));
    }
}

template <class T>
std::uint64_t hash_mask(const std::vector<T>& x) {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        word = (word << 1) | (x[i] > T(0) ? 1u : 0u);
        if ((i & 63) == 63) {
            h = (h ^ word) * 0x100000001B3ULL;
            word = 0;
        }
    }
    return (h ^ word ^ x.size()) * 0x100000001B3ULL;
}

template <class T>
Var<T> unary(const Var<T>& a, Tensor<T> out, std::function<void(Tensor<T>&, const Tensor<T>&, const Tensor<T>&)> bw) {
    Var<T> av = a;
    return a.tape().record(std::move(out), {a}, [av, bw](const Tensor<T>& g, const Tensor<T>& y) {
        if (Tensor<T>* sink = av.tape().grad_sink(av)) {
            bw(*sink, g, y);
        }
    });
}

}  // namespace

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw ContractError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const auto& A = a.value().data;
    const auto& B = b.value().data;
    Tensor<T> out(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) {
                out.data[i * n + j] += aip * B[p * n + j];
            }
        }
    }
    return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](const Tensor<T>& g, const Tensor<T>&) {
        const auto& A = a.value().data;
        const auto& B = b.value().data;
        if (Tensor<T>* ga = a.tape().grad_sink(a)) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    T acc = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                        acc += g.data[i * n + j] * B[p * n + j];
                    }
                    ga->data[i * k + p] += acc;
                }
            }
        }
        if (Tensor<T>* gb = b.tape().grad_sink(b)) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const T aip = A[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) {
                        gb->data[p * n + j] += aip * g.data[i * n + j];
                    }
                }
            }
        }
    });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
    require_rank("transpose", a, 2);
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    Tensor<T> out(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out.data[j * r + i] = a.value().data[i * c + j];
        }
    }
    return unary<T>(a, std::move(out), [r, c](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga.data[i * c + j] += g.data[j * r + i];
            }
        }
    });
}

template <class T>
Var<T> trace(const Var<T>& a) {
    require_square("trace", a);
    const std::size_t n = a.shape()[0];
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a.value().data[i * n + i];
    }
    return unary<T>(a, Tensor<T>::scalar(acc), [n](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < n; ++i) {
            ga.data[i * n + i] += g.data[0];
        }
    });
}

template <class T>
Var<T> diagonal(const Var<T>& a) {
    require_square("diagonal", a);
    const std::size_t n = a.shape()[0];
    Tensor<T> out(Shape{n});
    for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = a.value().data[i * n + i];
    }
    return unary<T>(a, std::move(out), [n](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < n; ++i) {
            ga.data[i * n + i] += g.data[i];
        }
    });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    require_same_shape("add", a, b);
    Tensor<T> out = a.value();
    const auto& B = b.value().data;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] += B[i];
    }
    return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor<T>& g, const Tensor<T>&) {
        for (const Var<T>& v : {a, b}) {
            if (Tensor<T>* s = v.tape().grad_sink(v)) {
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    s->data[i] += g.data[i];
                }
            }
        }
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    require_same_shape("sub", a, b);
    Tensor<T> out = a.value();
    const auto& B = b.value().data;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] -= B[i];
    }
    return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor<T>& g, const Tensor<T>&) {
        if (Tensor<T>* s = a.tape().grad_sink(a)) {
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                s->data[i] += g.data[i];
            }
        }
        if (Tensor<T>* s = b.tape().grad_sink(b)) {
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                s->data[i] -= g.data[i];
            }
        }
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    require_same_shape("mul", a, b);
    Tensor<T> out = a.value();
    const auto& B = b.value().data;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] *= B[i];
    }
    return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor<T>& g, const Tensor<T>&) {
        if (Tensor<T>* s = a.tape().grad_sink(a)) {
            const auto& B = b.value().data;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                s->data[i] += g.data[i] * B[i];
            }
        }
        if (Tensor<T>* s = b.tape().grad_sink(b)) {
            const auto& A = a.value().data;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                s->data[i] += g.data[i] * A[i];
            }
        }
    });
}

template <class T>
Var<T> div_by(const Var<T>& a, const Var<T>& s) {
    if (s.value().numel() != 1) {
        throw ContractError("div_by: divisor must be scalar, got shape " + shape_str(s.shape()));
    }
    const T d = s.value().data[0];
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v /= d;
    }
    return a.tape().record(std::move(out), {a, s}, [a, s](const Tensor<T>& g, const Tensor<T>&) {
        const T d = s.value().data[0];
        if (Tensor<T>* ga = a.tape().grad_sink(a)) {
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga->data[i] += g.data[i] / d;
            }
        }
        if (Tensor<T>* gs = s.tape().grad_sink(s)) {
            const auto& A = a.value().data;
            T acc = 0;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                acc += g.data[i] * A[i];
            }
            gs->data[0] -= acc / (d * d);
        }
    });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v *= c;
    }
    return unary<T>(a, std::move(out), [c](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += c * g.data[i];
        }
    });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T c) {
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v += c;
    }
    return unary<T>(a, std::move(out), [](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i];
        }
    });
}

template <class T>
Var<T> relu(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = v > T(0) ? v : T(0);
    }
    a.tape().mix_fingerprint(hash_mask(a.value().data));
    Var<T> av = a;
    return unary<T>(a, std::move(out), [av](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        const auto& x = av.value().data;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += x[i] > T(0) ? g.data[i] : T(0);
        }
    });
}

template <class T>
Var<T> square(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v *= v;
    }
    Var<T> av = a;
    return unary<T>(a, std::move(out), [av](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        const auto& x = av.value().data;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += T(2) * x[i] * g.data[i];
        }
    });
}

namespace {
template <class T>
T ipow(T x, int n) {
    T r = 1;
    for (int i = 0; i < n; ++i) {
        r *= x;
    }
    return r;
}
}  // namespace

template <class T>
Var<T> pow_int(const Var<T>& a, int n) {
    if (n < 0) {
        throw ContractError("pow_int: exponent must be >= 0, got " + std::to_string(n));
    }
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = ipow(v, n);
    }
    Var<T> av = a;
    return unary<T>(a, std::move(out), [av, n](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        if (n == 0) {
            return;
        }
        const auto& x = av.value().data;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += T(n) * ipow(x[i], n - 1) * g.data[i];
        }
    });
}

template <class T>
Var<T> log(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = std::log(v);
    }
    Var<T> av = a;
    return unary<T>(a, std::move(out), [av](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        const auto& x = av.value().data;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i] / x[i];
        }
    });
}

template <class T>
Var<T> log2(const Var<T>& a) {
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = std::log2(v);
    }
    Var<T> av = a;
    return unary<T>(a, std::move(out), [av](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        const auto& x = av.value().data;
        const T inv_ln2 = T(1) / std::numbers::ln2_v<T>;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i] * inv_ln2 / x[i];
        }
    });
}

template <class T>
Var<T> sum(const Var<T>& a) {
    T acc = 0;
    for (T v : a.value().data) {
        acc += v;
    }
    return unary<T>(a, Tensor<T>::scalar(acc), [](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (T& v : ga.data) {
            v += g.data[0];
        }
    });
}

template <class T>
Var<T> mean(const Var<T>& a) {
    const std::size_t n = a.value().numel();
    if (n == 0) {
        throw ContractError("mean: empty tensor");
    }
    T acc = 0;
    for (T v : a.value().data) {
        acc += v;
    }
    return unary<T>(a, Tensor<T>::scalar(acc / T(n)), [n](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        const T share = g.data[0] / T(n);
        for (T& v : ga.data) {
            v += share;
        }
    });
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
    if (shape_numel(shape) != a.value().numel()) {
        throw ContractError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    Tensor<T> out(std::move(shape), a.value().data);
    return unary<T>(a, std::move(out), [](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i];
        }
    });
}

// ---------------------------------------------------------------------------
// Convolution as im2col + GEMM, one image at a time. BLAS runs single-threaded so
// results are bitwise reproducible; parallelism lives above the tape.

namespace {

struct ConvGeom {
    std::size_t B, Ci, H, W, Co, k, Ho, Wo;
    int stride, pad;

    std::size_t col_rows() const { return Ci * k * k; }
    std::size_t col_cols() const { return Ho * Wo; }
    bool is_pointwise() const { return k == 1 && stride == 1; }
};

const bool kBlasSingleThread = [] {
    openblas_set_num_threads(1);
    return true;
}();

// C[m,n] = alpha * op(A) op(B) + beta * C, row-major.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float beta,
          float* c) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, int(m), int(n), int(k),
                1.0f, a, ta ? int(m) : int(k), b, tb ? int(k) : int(n), beta, c, int(n));
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
          double beta, double* c) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, int(m), int(n), int(k),
                1.0, a, ta ? int(m) : int(k), b, tb ? int(k) : int(n), beta, c, int(n));
}

// col[(ci*k + ky)*k + kx, oy*Wo + ox] = x[ci, oy*s + ky - p, ox*s + kx - p], zero outside.
template <class T>
void im2col(const ConvGeom& g, const T* x, T* col) {
    for (std::size_t ci = 0; ci < g.Ci; ++ci) {
        const T* plane = x + ci * g.H * g.W;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                T* row = col + ((ci * g.k + ky) * g.k + kx) * g.col_cols();
                const long off = static_cast<long>(kx) - g.pad;
                for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    T* dst = row + oy * g.Wo;
                    if (iy < 0 || iy >= static_cast<long>(g.H)) {
                        std::fill(dst, dst + g.Wo, T(0));
                        continue;
                    }
                    const T* src = plane + iy * g.W;
                    for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride + off;
                        dst[ox] = (ix >= 0 && ix < static_cast<long>(g.W)) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const ConvGeom& g, const T* col, T* x) {
    for (std::size_t ci = 0; ci < g.Ci; ++ci) {
        T* plane = x + ci * g.H * g.W;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const T* row = col + ((ci * g.k + ky) * g.k + kx) * g.col_cols();
                const long off = static_cast<long>(kx) - g.pad;
                for (std::size_t oy = 0; oy < g.Ho; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
                    if (iy < 0 || iy >= static_cast<long>(g.H)) {
                        continue;
                    }
                    const T* src = row + oy * g.Wo;
                    T* dst = plane + iy * g.W;
                    for (std::size_t ox = 0; ox < g.Wo; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride + off;
                        if (ix >= 0 && ix < static_cast<long>(g.W)) {
                            dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

template <class T>
void conv_forward(const ConvGeom& g, const T* in, const T* w, const T* bias, T* out) {
    std::vector<T> col(g.is_pointwise() ? 0 : g.col_rows() * g.col_cols());
    const std::size_t N = g.col_cols();
    for (std::size_t b = 0; b < g.B; ++b) {
        const T* x = in + b * g.Ci * g.H * g.W;
        T* o = out + b * g.Co * N;
        const T* cm = x;
        if (!g.is_pointwise()) {
            im2col(g, x, col.data());
            cm = col.data();
        }
        for (std::size_t co = 0; co < g.Co; ++co) {
            std::fill(o + co * N, o + (co + 1) * N, bias ? bias[co] : T(0));
        }
        gemm(false, false, g.Co, N, g.col_rows(), w, cm, T(1), o);
    }
}

template <class T>
void conv_backward(const ConvGeom& g, const T* in, const T* w, const T* gout, T* gin, T* gw, T* gbias) {
    const std::size_t N = g.col_cols(), K = g.col_rows();
    std::vector<T> col(g.is_pointwise() ? 0 : K * N);
    std::vector<T> gcol(gin ? K * N : 0);
    for (std::size_t b = 0; b < g.B; ++b) {
        const T* go = gout + b * g.Co * N;
        if (gbias) {
            for (std::size_t co = 0; co < g.Co; ++co) {
                T acc = 0;
                for (std::size_t i = 0; i < N; ++i) {
                    acc += go[co * N + i];
                }
                gbias[co] += acc;
            }
        }
        if (gw) {
            const T* x = in + b * g.Ci * g.H * g.W;
            const T* cm = x;
            if (!g.is_pointwise()) {
                im2col(g, x, col.data());
                cm = col.data();
            }
            gemm(false, true, g.Co, K, N, go, cm, T(1), gw);
        }
        if (gin) {
            T* gx = gin + b * g.Ci * g.H * g.W;
            if (g.is_pointwise()) {
                gemm(true, false, K, N, g.Co, w, go, T(1), gx);
            } else {
                gemm(true, false, K, N, g.Co, w, go, T(0), gcol.data());
                col2im_add(g, gcol.data(), gx);
            }
        }
    }
}

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride) {
    require_rank("conv2d", x, 4);
    require_rank("conv2d", weight, 4);
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (ws[1] != xs[1] || ws[2] != ws[3] || (ws[2] != 1 && ws[2] != 3)) {
        throw ContractError("conv2d: shape mismatch input " + shape_str(xs) + " vs weight " + shape_str(ws));
    }
    if (stride != 1 && stride != 2) {
        throw ContractError("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
    }
    if (bias.valid() && bias.shape() != Shape{ws[0]}) {
        throw ContractError("conv2d: bias shape " + shape_str(bias.shape()) + " vs weight " + shape_str(ws));
    }
    (void)kBlasSingleThread;
    ConvGeom g{};
    g.B = xs[0];
    g.Ci = xs[1];
    g.H = xs[2];
    g.W = xs[3];
    g.Co = ws[0];
    g.k = ws[2];
    g.stride = stride;
    g.pad = static_cast<int>(g.k / 2);
    g.Ho = (g.H + 2 * g.pad - g.k) / stride + 1;
    g.Wo = (g.W + 2 * g.pad - g.k) / stride + 1;
    Tensor<T> out(Shape{g.B, g.Co, g.Ho, g.Wo});
    conv_forward(g, x.value().data.data(), weight.value().data.data(),
                 bias.valid() ? bias.value().data.data() : nullptr, out.data.data());
    auto fn = [x, weight, bias, g](const Tensor<T>& gout, const Tensor<T>&) {
        Tensor<T>* gx = x.tape().grad_sink(x);
        Tensor<T>* gw = weight.tape().grad_sink(weight);
        Tensor<T>* gb = bias.valid() ? bias.tape().grad_sink(bias) : nullptr;
        conv_backward(g, x.value().data.data(), weight.value().data.data(), gout.data.data(),
                      gx ? gx->data.data() : nullptr, gw ? gw->data.data() : nullptr,
                      gb ? gb->data.data() : nullptr);
    };
    if (bias.valid()) {
        return x.tape().record(std::move(out), {x, weight, bias}, fn);
    }
    return x.tape().record(std::move(out), {x, weight}, fn);
}

template <class T>
Var<T> upsample2x(const Var<T>& x) {
    require_rank("upsample2x", x, 4);
    const auto& s = x.shape();
    const std::size_t planes = s[0] * s[1], H = s[2], W = s[3];
    Tensor<T> out(Shape{s[0], s[1], 2 * H, 2 * W});
    const auto& in = x.value().data;
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t y = 0; y < 2 * H; ++y) {
            const T* src = in.data() + p * H * W + (y / 2) * W;
            T* dst = out.data.data() + p * 4 * H * W + y * 2 * W;
            for (std::size_t xx = 0; xx < 2 * W; ++xx) {
                dst[xx] = src[xx / 2];
            }
        }
    }
    return unary<T>(x, std::move(out), [planes, H, W](Tensor<T>& gx, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t p = 0; p < planes; ++p) {
            for (std::size_t y = 0; y < 2 * H; ++y) {
                const T* src = g.data.data() + p * 4 * H * W + y * 2 * W;
                T* dst = gx.data.data() + p * H * W + (y / 2) * W;
                for (std::size_t xx = 0; xx < 2 * W; ++xx) {
                    dst[xx / 2] += src[xx];
                }
            }
        }
    });
}

template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
    require_rank("global_avg_pool", x, 4);
    const auto& s = x.shape();
    const std::size_t planes = s[0] * s[1], hw = s[2] * s[3];
    Tensor<T> out(Shape{s[0], s[1]});
    for (std::size_t p = 0; p < planes; ++p) {
        T acc = 0;
        const T* src = x.value().data.data() + p * hw;
        for (std::size_t i = 0; i < hw; ++i) {
            acc += src[i];
        }
        out.data[p] = acc / T(hw);
    }
    return unary<T>(x, std::move(out), [planes, hw](Tensor<T>& gx, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t p = 0; p < planes; ++p) {
            const T share = g.data[p] / T(hw);
            T* dst = gx.data.data() + p * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                dst[i] += share;
            }
        }
    });
}

template <class T>
Var<T> softmax_channels(const Var<T>& x) {
    require_rank("softmax_channels", x, 4);
    const auto& s = x.shape();
    const std::size_t B = s[0], C = s[1], hw = s[2] * s[3];
    Tensor<T> out(s);
    const auto& in = x.value().data;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t base = b * C * hw;
        for (std::size_t i = 0; i < hw; ++i) {
            T mx = in[base + i];
            for (std::size_t c = 1; c < C; ++c) {
                mx = std::max(mx, in[base + c * hw + i]);
            }
            T z = 0;
            for (std::size_t c = 0; c < C; ++c) {
                const T e = std::exp(in[base + c * hw + i] - mx);
                out.data[base + c * hw + i] = e;
                z += e;
            }
            for (std::size_t c = 0; c < C; ++c) {
                out.data[base + c * hw + i] /= z;
            }
        }
    }
    return unary<T>(x, std::move(out), [B, C, hw](Tensor<T>& gx, const Tensor<T>& g, const Tensor<T>& y) {
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t base = b * C * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                T dot = 0;
                for (std::size_t c = 0; c < C; ++c) {
                    dot += g.data[base + c * hw + i] * y.data[base + c * hw + i];
                }
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t k = base + c * hw + i;
                    gx.data[k] += y.data[k] * (g.data[k] - dot);
                }
            }
        }
    });
}

template <class T>
Var<T> log_softmax_channels(const Var<T>& x) {
    require_rank("log_softmax_channels", x, 4);
    const auto& s = x.shape();
    const std::size_t B = s[0], C = s[1], hw = s[2] * s[3];
    Tensor<T> out(s);
    const auto& in = x.value().data;
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t base = b * C * hw;
        for (std::size_t i = 0; i < hw; ++i) {
            T mx = in[base + i];
            for (std::size_t c = 1; c < C; ++c) {
                mx = std::max(mx, in[base + c * hw + i]);
            }
            T z = 0;
            for (std::size_t c = 0; c < C; ++c) {
                z += std::exp(in[base + c * hw + i] - mx);
            }
            const T lse = mx + std::log(z);
            for (std::size_t c = 0; c < C; ++c) {
                out.data[base + c * hw + i] = in[base + c * hw + i] - lse;
            }
        }
    }
    return unary<T>(x, std::move(out), [B, C, hw](Tensor<T>& gx, const Tensor<T>& g, const Tensor<T>& y) {
        for (std::size_t b = 0; b < B; ++b) {
            const std::size_t base = b * C * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                T gsum = 0;
                for (std::size_t c = 0; c < C; ++c) {
                    gsum += g.data[base + c * hw + i];
                }
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t k = base + c * hw + i;
                    gx.data[k] += g.data[k] - std::exp(y.data[k]) * gsum;
                }
            }
        }
    });
}

template <class T>
Var<T> pick_channels(const Var<T>& x, std::span<const std::int32_t> labels) {
    require_rank("pick_channels", x, 4);
    const auto& s = x.shape();
    const std::size_t B = s[0], C = s[1], hw = s[2] * s[3];
    if (labels.size() != B * hw) {
        throw ContractError("pick_channels: " + std::to_string(labels.size()) + " labels for input " +
                            shape_str(s));
    }
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    for (std::int32_t v : lab) {
        if (v < 0 || static_cast<std::size_t>(v) >= C) {
            throw ContractError("pick_channels: label " + std::to_string(v) + " outside [0, " + std::to_string(C) +
                                ")");
        }
    }
    Tensor<T> out(Shape{B, s[2], s[3]});
    const auto& in = x.value().data;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < hw; ++i) {
            out.data[b * hw + i] = in[(b * C + lab[b * hw + i]) * hw + i];
        }
    }
    return unary<T>(x, std::move(out),
                    [B, C, hw, lab = std::move(lab)](Tensor<T>& gx, const Tensor<T>& g, const Tensor<T>&) {
                        for (std::size_t b = 0; b < B; ++b) {
                            for (std::size_t i = 0; i < hw; ++i) {
                                gx.data[(b * C + lab[b * hw + i]) * hw + i] += g.data[b * hw + i];
                            }
                        }
                    });
}

template <class T>
Var<T> standardize_columns(const Var<T>& z, T eps) {
    require_rank("standardize_columns", z, 2);
    const std::size_t b = z.shape()[0], d = z.shape()[1];
    if (b == 0) {
        throw ContractError("standardize_columns: empty batch");
    }
    const auto& in = z.value().data;
    std::vector<T> scale_of(d);
    std::vector<bool> floored(d);
    Tensor<T> out(z.shape());
    std::uint64_t h = 0;
    for (std::size_t j = 0; j < d; ++j) {
        T mu = 0;
        for (std::size_t i = 0; i < b; ++i) {
            mu += in[i * d + j];
        }
        mu /= T(b);
        T var = 0;
        for (std::size_t i = 0; i < b; ++i) {
            const T c = in[i * d + j] - mu;
            var += c * c;
        }
        var /= T(b);
        const T sd = std::sqrt(var);
        floored[j] = !(sd > eps);
        scale_of[j] = floored[j] ? eps : sd;
        h = (h << 1) ^ (floored[j] ? 1u : 0u) ^ j;
        for (std::size_t i = 0; i < b; ++i) {
            out.data[i * d + j] = (in[i * d + j] - mu) / scale_of[j];
        }
    }
    z.tape().mix_fingerprint(h);
    return unary<T>(z, std::move(out),
                    [b, d, scale_of, floored](Tensor<T>& gz, const Tensor<T>& g, const Tensor<T>& y) {
                        for (std::size_t j = 0; j < d; ++j) {
                            T gmean = 0, gy = 0;
                            for (std::size_t i = 0; i < b; ++i) {
                                gmean += g.data[i * d + j];
                                gy += g.data[i * d + j] * y.data[i * d + j];
                            }
                            gmean /= T(b);
                            gy /= T(b);
                            if (floored[j]) {
                                gy = 0;  // constant divisor: only the centering contributes
                            }
                            for (std::size_t i = 0; i < b; ++i) {
                                gz.data[i * d + j] +=
                                    (g.data[i * d + j] - gmean - y.data[i * d + j] * gy) / scale_of[j];
                            }
                        }
                    });
}

template <class T>
Var<T> stop_gradient(const Var<T>& a) {
    return a.tape().constant(a.tape().stop_gradient_value(a.value()));
}

template <class T>
Var<T> flip_gradient(const Var<T>& a) {
    return unary<T>(a, a.value(), [](Tensor<T>& ga, const Tensor<T>& g, const Tensor<T>&) {
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] -= g.data[i];
        }
    });
}

#define HDC_INSTANTIATE_OPS(T)                                                               \
    template Var<T> matmul(const Var<T>&, const Var<T>&);                                    \
    template Var<T> transpose(const Var<T>&);                                                \
    template Var<T> trace(const Var<T>&);                                                    \
    template Var<T> diagonal(const Var<T>&);                                                 \
    template Var<T> add(const Var<T>&, const Var<T>&);                                       \
    template Var<T> sub(const Var<T>&, const Var<T>&);                                       \
    template Var<T> mul(const Var<T>&, const Var<T>&);                                       \
    template Var<T> div_by(const Var<T>&, const Var<T>&);                                    \
    template Var<T> scale(const Var<T>&, T);                                                 \
    template Var<T> add_scalar(const Var<T>&, T);                                            \
    template Var<T> relu(const Var<T>&);                                                     \
    template Var<T> square(const Var<T>&);                                                   \
    template Var<T> pow_int(const Var<T>&, int);                                             \
    template Var<T> log(const Var<T>&);                                                      \
    template Var<T> log2(const Var<T>&);                                                     \
    template Var<T> sum(const Var<T>&);                                                      \
    template Var<T> mean(const Var<T>&);                                                     \
    template Var<T> reshape(const Var<T>&, Shape);                                           \
    template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int);                \
    template Var<T> upsample2x(const Var<T>&);                                               \
    template Var<T> global_avg_pool(const Var<T>&);                                          \
    template Var<T> softmax_channels(const Var<T>&);                                         \
    template Var<T> log_softmax_channels(const Var<T>&);                                     \
    template Var<T> pick_channels(const Var<T>&, std::span<const std::int32_t>);             \
    template Var<T> standardize_columns(const Var<T>&, T);                                   \
    template Var<T> stop_gradient(const Var<T>&);                                            \
    template Var<T> flip_gradient(const Var<T>&);

HDC_INSTANTIATE_OPS(float)
HDC_INSTANTIATE_OPS(double)

}  // namespace hdc::ad
