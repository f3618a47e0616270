#pragma once
// Minimal reverse-mode autodiff over dense row-major matrices. A Graph is a
// tape of backward closures built while the forward pass runs; parameters
// live outside the graph in Mat<T> and accumulate gradients in place.
//
// Vectors are column vectors (cols == 1). Training typically instantiates
// T = float; gradient checking always uses T = double.

#include <tgrl/hashing.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgrl::nn {

template <typename T>
struct Mat {
    std::string name;
    int rows = 0, cols = 0;
    std::vector<T> w;  // values
    std::vector<T> g;  // gradient accumulator

    Mat() = default;
    Mat(std::string n, int r, int c)
        : name(std::move(n)), rows(r), cols(c), w(static_cast<std::size_t>(r) * c, T(0)),
          g(static_cast<std::size_t>(r) * c, T(0)) {}

    std::size_t size() const { return w.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }

    // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in defaults to cols
    void init_uniform(Rng& rng, int fan_in = 0) {
        if (fan_in <= 0) fan_in = cols > 0 ? cols : 1;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : w) v = static_cast<T>(rng.next_uniform(-bound, bound));
    }
};

template <typename T>
class Graph {
public:
    using Id = std::int32_t;

    explicit Graph(bool record = true) : record_(record) { nodes_.reserve(4096); }

    bool recording() const { return record_; }
    std::size_t node_count() const { return nodes_.size(); }

    // ---- leaves ----------------------------------------------------------

    Id constant(int rows, int cols, const T* data) {
        Id id = make_node(rows, cols);
        std::copy(data, data + static_cast<std::size_t>(rows) * cols, val(id));
        return id;
    }

    Id constant_vec(std::span<const T> v) {
        return constant(static_cast<int>(v.size()), 1, v.data());
    }

    Id zeros(int rows, int cols) { return make_node(rows, cols); }

    // Binds a parameter: values are aliased, gradients accumulate into m.g.
    Id param(Mat<T>& m) {
        Node n;
        n.rows = m.rows;
        n.cols = m.cols;
        n.val = m.w.data();
        n.grad = record_ ? m.g.data() : nullptr;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    // ---- ops ---------------------------------------------------------------

    // W·x + b  (x, b column vectors; b may be -1 for none)
    Id affine(Id W, Id x, Id b) {
        const int m = rows(W), n = cols(W);
        check(cols(x) == 1 && rows(x) == n, "affine: shape mismatch");
        if (b >= 0) check(rows(b) == m && cols(b) == 1, "affine: bias shape");
        Id y = make_node(m, 1);
        const T* wv = val(W);
        const T* xv = val(x);
        T* yv = val(y);
        for (int i = 0; i < m; ++i) {
            T acc = b >= 0 ? val(b)[i] : T(0);
            const T* wrow = wv + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) acc += wrow[j] * xv[j];
            yv[i] = acc;
        }
        if (record_)
            tape_.push_back([this, W, x, b, y, m, n] {
                const T* gy = grad(y);
                const T* wv2 = val(W);
                const T* xv2 = val(x);
                T* gW = grad(W);
                T* gx = grad(x);
                for (int i = 0; i < m; ++i) {
                    const T gyi = gy[i];
                    T* gWrow = gW + static_cast<std::size_t>(i) * n;
                    const T* wrow = wv2 + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        gWrow[j] += gyi * xv2[j];
                        gx[j] += gyi * wrow[j];
                    }
                }
                if (b >= 0) {
                    T* gb = grad(b);
                    for (int i = 0; i < m; ++i) gb[i] += gy[i];
                }
            });
        return y;
    }

    // W·x + U·h + b
    Id affine2(Id W, Id x, Id U, Id h, Id b) { return add(affine(W, x, b), affine(U, h, -1)); }

    // A·Bᵀ  (A: n×k, B: m×k) -> n×m
    Id matmul_nt(Id A, Id B) {
        const int n = rows(A), k = cols(A), m = rows(B);
        check(cols(B) == k, "matmul_nt: inner dims");
        Id y = make_node(n, m);
        const T* av = val(A);
        const T* bv = val(B);
        T* yv = val(y);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                T acc = 0;
                const T* ar = av + static_cast<std::size_t>(i) * k;
                const T* br = bv + static_cast<std::size_t>(j) * k;
                for (int l = 0; l < k; ++l) acc += ar[l] * br[l];
                yv[static_cast<std::size_t>(i) * m + j] = acc;
            }
        if (record_)
            tape_.push_back([this, A, B, y, n, k, m] {
                const T* gy = grad(y);
                const T* av2 = val(A);
                const T* bv2 = val(B);
                T* gA = grad(A);
                T* gB = grad(B);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < m; ++j) {
                        const T g = gy[static_cast<std::size_t>(i) * m + j];
                        T* gar = gA + static_cast<std::size_t>(i) * k;
                        T* gbr = gB + static_cast<std::size_t>(j) * k;
                        const T* ar = av2 + static_cast<std::size_t>(i) * k;
                        const T* br = bv2 + static_cast<std::size_t>(j) * k;
                        for (int l = 0; l < k; ++l) {
                            gar[l] += g * br[l];
                            gbr[l] += g * ar[l];
                        }
                    }
            });
        return y;
    }

    // A·B  (A: n×m, B: m×k) -> n×k
    Id matmul_nn(Id A, Id B) {
        const int n = rows(A), m = cols(A), k = cols(B);
        check(rows(B) == m, "matmul_nn: inner dims");
        Id y = make_node(n, k);
        const T* av = val(A);
        const T* bv = val(B);
        T* yv = val(y);
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < m; ++l) {
                const T a = av[static_cast<std::size_t>(i) * m + l];
                const T* br = bv + static_cast<std::size_t>(l) * k;
                T* yr = yv + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) yr[j] += a * br[j];
            }
        if (record_)
            tape_.push_back([this, A, B, y, n, m, k] {
                const T* gy = grad(y);
                const T* av2 = val(A);
                const T* bv2 = val(B);
                T* gA = grad(A);
                T* gB = grad(B);
                for (int i = 0; i < n; ++i)
                    for (int l = 0; l < m; ++l) {
                        const T* gyr = gy + static_cast<std::size_t>(i) * k;
                        const T* br = bv2 + static_cast<std::size_t>(l) * k;
                        T acc = 0;
                        for (int j = 0; j < k; ++j) acc += gyr[j] * br[j];
                        gA[static_cast<std::size_t>(i) * m + l] += acc;
                        const T a = av2[static_cast<std::size_t>(i) * m + l];
                        T* gbr = gB + static_cast<std::size_t>(l) * k;
                        for (int j = 0; j < k; ++j) gbr[j] += a * gyr[j];
                    }
            });
        return y;
    }

    Id add(Id a, Id b) {
        return elementwise2(a, b, [](T x, T y) { return x + y; },
                            [](T*, T* ga, T* gb, const T* g, std::size_t n, const T*, const T*) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    ga[i] += g[i];
                                    gb[i] += g[i];
                                }
                            });
    }

    Id sub(Id a, Id b) {
        return elementwise2(a, b, [](T x, T y) { return x - y; },
                            [](T*, T* ga, T* gb, const T* g, std::size_t n, const T*, const T*) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    ga[i] += g[i];
                                    gb[i] -= g[i];
                                }
                            });
    }

    Id mul(Id a, Id b) {
        return elementwise2(a, b, [](T x, T y) { return x * y; },
                            [](T*, T* ga, T* gb, const T* g, std::size_t n, const T* av, const T* bv) {
                                for (std::size_t i = 0; i < n; ++i) {
                                    ga[i] += g[i] * bv[i];
                                    gb[i] += g[i] * av[i];
                                }
                            });
    }

    Id abs(Id a) {
        Id y = make_node(rows(a), cols(a));
        const std::size_t n = count(a);
        const T* av = val(a);
        T* yv = val(y);
        for (std::size_t i = 0; i < n; ++i) yv[i] = std::abs(av[i]);
        if (record_)
            tape_.push_back([this, a, y, n] {
                const T* gy = grad(y);
                const T* av2 = val(a);
                T* ga = grad(a);
                for (std::size_t i = 0; i < n; ++i)
                    ga[i] += gy[i] * (av2[i] > 0 ? T(1) : (av2[i] < 0 ? T(-1) : T(0)));
            });
        return y;
    }

    Id sigmoid(Id a) {
        Id y = unary(a, [](T x) { return T(1) / (T(1) + std::exp(-x)); });
        if (record_)
            tape_.push_back([this, a, y] {
                const std::size_t n = count(y);
                const T* yv = val(y);
                const T* gy = grad(y);
                T* ga = grad(a);
                for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * yv[i] * (T(1) - yv[i]);
            });
        return y;
    }

    Id tanh_op(Id a) {
        Id y = unary(a, [](T x) { return std::tanh(x); });
        if (record_)
            tape_.push_back([this, a, y] {
                const std::size_t n = count(y);
                const T* yv = val(y);
                const T* gy = grad(y);
                T* ga = grad(a);
                for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * (T(1) - yv[i] * yv[i]);
            });
        return y;
    }

    Id leaky_relu(Id a, T slope) {
        Id y = unary(a, [slope](T x) { return x > 0 ? x : slope * x; });
        if (record_)
            tape_.push_back([this, a, y, slope] {
                const std::size_t n = count(y);
                const T* av2 = val(a);
                const T* gy = grad(y);
                T* ga = grad(a);
                for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * (av2[i] > 0 ? T(1) : slope);
            });
        return y;
    }

    // (1−z)⊙h + z⊙ĥ — the GRU state mix
    Id gru_mix(Id z, Id h, Id hhat) {
        check(count(z) == count(h) && count(h) == count(hhat), "gru_mix: shapes");
        Id y = make_node(rows(z), cols(z));
        const std::size_t n = count(z);
        const T* zv = val(z);
        const T* hv = val(h);
        const T* cv = val(hhat);
        T* yv = val(y);
        for (std::size_t i = 0; i < n; ++i) yv[i] = (T(1) - zv[i]) * hv[i] + zv[i] * cv[i];
        if (record_)
            tape_.push_back([this, z, h, hhat, y, n] {
                const T* gy = grad(y);
                const T* zv2 = val(z);
                const T* hv2 = val(h);
                const T* cv2 = val(hhat);
                T* gz = grad(z);
                T* gh = grad(h);
                T* gc = grad(hhat);
                for (std::size_t i = 0; i < n; ++i) {
                    gz[i] += gy[i] * (cv2[i] - hv2[i]);
                    gh[i] += gy[i] * (T(1) - zv2[i]);
                    gc[i] += gy[i] * zv2[i];
                }
            });
        return y;
    }

    Id softmax_rows(Id a) {
        const int n = rows(a), m = cols(a);
        Id y = make_node(n, m);
        const T* av = val(a);
        T* yv = val(y);
        for (int i = 0; i < n; ++i) {
            const T* ar = av + static_cast<std::size_t>(i) * m;
            T* yr = yv + static_cast<std::size_t>(i) * m;
            T mx = ar[0];
            for (int j = 1; j < m; ++j) mx = std::max(mx, ar[j]);
            T sum = 0;
            for (int j = 0; j < m; ++j) {
                yr[j] = std::exp(ar[j] - mx);
                sum += yr[j];
            }
            for (int j = 0; j < m; ++j) yr[j] /= sum;
        }
        if (record_)
            tape_.push_back([this, a, y, n, m] {
                const T* yv2 = val(y);
                const T* gy = grad(y);
                T* ga = grad(a);
                for (int i = 0; i < n; ++i) {
                    const T* yr = yv2 + static_cast<std::size_t>(i) * m;
                    const T* gr = gy + static_cast<std::size_t>(i) * m;
                    T* gar = ga + static_cast<std::size_t>(i) * m;
                    T dotv = 0;
                    for (int j = 0; j < m; ++j) dotv += gr[j] * yr[j];
                    for (int j = 0; j < m; ++j) gar[j] += yr[j] * (gr[j] - dotv);
                }
            });
        return y;
    }

    // concatenate along columns; all inputs share the row count
    Id concat_cols(std::span<const Id> ids) {
        const int n = rows(ids[0]);
        int total = 0;
        for (Id id : ids) {
            check(rows(id) == n, "concat_cols: row mismatch");
            total += cols(id);
        }
        Id y = make_node(n, total);
        T* yv = val(y);
        int off = 0;
        for (Id id : ids) {
            const int c = cols(id);
            const T* v = val(id);
            for (int i = 0; i < n; ++i)
                std::copy(v + static_cast<std::size_t>(i) * c, v + static_cast<std::size_t>(i + 1) * c,
                          yv + static_cast<std::size_t>(i) * total + off);
            off += c;
        }
        if (record_) {
            std::vector<Id> own(ids.begin(), ids.end());
            tape_.push_back([this, own = std::move(own), y, n, total] {
                const T* gy = grad(y);
                int off2 = 0;
                for (Id id : own) {
                    const int c = cols(id);
                    T* g = grad(id);
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < c; ++j)
                            g[static_cast<std::size_t>(i) * c + j] +=
                                gy[static_cast<std::size_t>(i) * total + off2 + j];
                    off2 += c;
                }
            });
        }
        return y;
    }

    // column vectors -> one column vector
    Id concat(std::span<const Id> ids) {
        int total = 0;
        for (Id id : ids) {
            check(cols(id) == 1, "concat: wants column vectors");
            total += rows(id);
        }
        Id y = make_node(total, 1);
        T* yv = val(y);
        int off = 0;
        for (Id id : ids) {
            std::copy(val(id), val(id) + rows(id), yv + off);
            off += rows(id);
        }
        if (record_) {
            std::vector<Id> own(ids.begin(), ids.end());
            tape_.push_back([this, own = std::move(own), y] {
                const T* gy = grad(y);
                int off2 = 0;
                for (Id id : own) {
                    T* g = grad(id);
                    const int r = rows(id);
                    for (int i = 0; i < r; ++i) g[i] += gy[off2 + i];
                    off2 += r;
                }
            });
        }
        return y;
    }

    // L column vectors of length h -> L×h matrix (row i = vecs[i])
    Id stack_rows(std::span<const Id> ids) {
        const int h = rows(ids[0]);
        const int L = static_cast<int>(ids.size());
        Id y = make_node(L, h);
        T* yv = val(y);
        for (int i = 0; i < L; ++i) {
            check(rows(ids[i]) == h && cols(ids[i]) == 1, "stack_rows: shapes");
            std::copy(val(ids[i]), val(ids[i]) + h, yv + static_cast<std::size_t>(i) * h);
        }
        if (record_) {
            std::vector<Id> own(ids.begin(), ids.end());
            tape_.push_back([this, own = std::move(own), y, h] {
                const T* gy = grad(y);
                for (std::size_t i = 0; i < own.size(); ++i) {
                    T* g = grad(own[i]);
                    for (int j = 0; j < h; ++j) g[j] += gy[i * h + j];
                }
            });
        }
        return y;
    }

    // row i of a matrix, as a column vector
    Id row(Id M, int i) {
        const int c = cols(M);
        Id y = make_node(c, 1);
        std::copy(val(M) + static_cast<std::size_t>(i) * c, val(M) + static_cast<std::size_t>(i + 1) * c,
                  val(y));
        if (record_)
            tape_.push_back([this, M, i, y, c] {
                const T* gy = grad(y);
                T* g = grad(M) + static_cast<std::size_t>(i) * c;
                for (int j = 0; j < c; ++j) g[j] += gy[j];
            });
        return y;
    }

    Id mean_rows(Id M) {
        const int n = rows(M), c = cols(M);
        Id y = make_node(c, 1);
        const T* mv = val(M);
        T* yv = val(y);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) yv[j] += mv[static_cast<std::size_t>(i) * c + j];
        const T inv = T(1) / static_cast<T>(n);
        for (int j = 0; j < c; ++j) yv[j] *= inv;
        if (record_)
            tape_.push_back([this, M, y, n, c, inv] {
                const T* gy = grad(y);
                T* g = grad(M);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < c; ++j) g[static_cast<std::size_t>(i) * c + j] += gy[j] * inv;
            });
        return y;
    }

    // broadcast-add a column vector to every row of M
    Id add_rowvec(Id M, Id v) {
        const int n = rows(M), c = cols(M);
        check(rows(v) == c && cols(v) == 1, "add_rowvec: shapes");
        Id y = make_node(n, c);
        const T* mv = val(M);
        const T* vv = val(v);
        T* yv = val(y);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
                yv[static_cast<std::size_t>(i) * c + j] = mv[static_cast<std::size_t>(i) * c + j] + vv[j];
        if (record_)
            tape_.push_back([this, M, v, y, n, c] {
                const T* gy = grad(y);
                T* gM = grad(M);
                T* gv = grad(v);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < c; ++j) {
                        gM[static_cast<std::size_t>(i) * c + j] += gy[static_cast<std::size_t>(i) * c + j];
                        gv[j] += gy[static_cast<std::size_t>(i) * c + j];
                    }
            });
        return y;
    }

    // gather rows of an embedding table -> L×e
    Id embed(Id table, std::span<const int> ids) {
        const int e = cols(table);
        const int L = static_cast<int>(ids.size());
        Id y = make_node(L, e);
        const T* tv = val(table);
        T* yv = val(y);
        for (int i = 0; i < L; ++i)
            std::copy(tv + static_cast<std::size_t>(ids[i]) * e,
                      tv + static_cast<std::size_t>(ids[i] + 1) * e, yv + static_cast<std::size_t>(i) * e);
        if (record_) {
            std::vector<int> own(ids.begin(), ids.end());
            tape_.push_back([this, table, own = std::move(own), y, e] {
                const T* gy = grad(y);
                T* g = grad(table);
                for (std::size_t i = 0; i < own.size(); ++i)
                    for (int j = 0; j < e; ++j)
                        g[static_cast<std::size_t>(own[i]) * e + j] += gy[i * e + j];
            });
        }
        return y;
    }

    Id dot(Id a, Id b) {
        check(count(a) == count(b), "dot: shapes");
        Id y = make_node(1, 1);
        const std::size_t n = count(a);
        const T* av = val(a);
        const T* bv = val(b);
        T acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += av[i] * bv[i];
        val(y)[0] = acc;
        if (record_)
            tape_.push_back([this, a, b, y, n] {
                const T g = grad(y)[0];
                const T* av2 = val(a);
                const T* bv2 = val(b);
                T* ga = grad(a);
                T* gb = grad(b);
                for (std::size_t i = 0; i < n; ++i) {
                    ga[i] += g * bv2[i];
                    gb[i] += g * av2[i];
                }
            });
        return y;
    }

    Id scale(Id a, T s) {
        Id y = unary(a, [s](T x) { return s * x; });
        if (record_)
            tape_.push_back([this, a, y, s] {
                const std::size_t n = count(y);
                const T* gy = grad(y);
                T* ga = grad(a);
                for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * s;
            });
        return y;
    }

    Id sum(Id a) {
        Id y = make_node(1, 1);
        const std::size_t n = count(a);
        const T* av = val(a);
        T acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += av[i];
        val(y)[0] = acc;
        if (record_)
            tape_.push_back([this, a, y, n] {
                const T g = grad(y)[0];
                T* ga = grad(a);
                for (std::size_t i = 0; i < n; ++i) ga[i] += g;
            });
        return y;
    }

    // (pred - target)², pred scalar
    Id squared_error(Id pred, T target) {
        check(count(pred) == 1, "squared_error: scalar pred");
        Id y = make_node(1, 1);
        const T d = val(pred)[0] - target;
        val(y)[0] = d * d;
        if (record_)
            tape_.push_back([this, pred, y, target] {
                grad(pred)[0] += grad(y)[0] * T(2) * (val(pred)[0] - target);
            });
        return y;
    }

    // -log softmax(logits)[target], numerically stable
    Id cross_entropy_logits(Id logits, int target) {
        check(cols(logits) == 1, "cross_entropy_logits: vector");
        const int n = rows(logits);
        check(target >= 0 && target < n, "cross_entropy_logits: target range");
        Id y = make_node(1, 1);
        const T* lv = val(logits);
        T mx = lv[0];
        for (int i = 1; i < n; ++i) mx = std::max(mx, lv[i]);
        T sum = 0;
        for (int i = 0; i < n; ++i) sum += std::exp(lv[i] - mx);
        val(y)[0] = (mx + std::log(sum)) - lv[target];
        if (record_)
            tape_.push_back([this, logits, y, target, n] {
                const T g = grad(y)[0];
                const T* lv2 = val(logits);
                T* gl = grad(logits);
                T mx2 = lv2[0];
                for (int i = 1; i < n; ++i) mx2 = std::max(mx2, lv2[i]);
                T sum2 = 0;
                for (int i = 0; i < n; ++i) sum2 += std::exp(lv2[i] - mx2);
                for (int i = 0; i < n; ++i) {
                    const T p = std::exp(lv2[i] - mx2) / sum2;
                    gl[i] += g * (p - (i == target ? T(1) : T(0)));
                }
            });
        return y;
    }

    Id concat_cols(std::initializer_list<Id> ids) {
        std::vector<Id> v(ids);
        return concat_cols(std::span<const Id>(v));
    }
    Id concat(std::initializer_list<Id> ids) {
        std::vector<Id> v(ids);
        return concat(std::span<const Id>(v));
    }

    // ---- access / backward ----------------------------------------------

    int rows(Id id) const { return nodes_[id].rows; }
    int cols(Id id) const { return nodes_[id].cols; }
    std::size_t count(Id id) const {
        return static_cast<std::size_t>(nodes_[id].rows) * nodes_[id].cols;
    }
    T* val(Id id) { return nodes_[id].val; }
    const T* val(Id id) const { return nodes_[id].val; }
    T scalar(Id id) const {
        check(count(id) == 1, "scalar(): not 1x1");
        return nodes_[id].val[0];
    }
    T* grad(Id id) { return nodes_[id].grad; }

    void backward(Id root) {
        check(record_, "backward() on a non-recording graph");
        check(count(root) == 1, "backward() root must be scalar");
        nodes_[root].grad[0] = T(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

private:
    struct Node {
        int rows = 0, cols = 0;
        T* val = nullptr;
        T* grad = nullptr;
        std::vector<T> val_store, grad_store;
    };

    static void check(bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    }

    Id make_node(int r, int c) {
        Node n;
        n.rows = r;
        n.cols = c;
        n.val_store.assign(static_cast<std::size_t>(r) * c, T(0));
        n.val = n.val_store.data();
        if (record_) {
            n.grad_store.assign(static_cast<std::size_t>(r) * c, T(0));
            n.grad = n.grad_store.data();
        }
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    template <typename F>
    Id unary(Id a, F f) {
        Id y = make_node(rows(a), cols(a));
        const std::size_t n = count(a);
        const T* av = val(a);
        T* yv = val(y);
        for (std::size_t i = 0; i < n; ++i) yv[i] = f(av[i]);
        return y;
    }

    template <typename F, typename B>
    Id elementwise2(Id a, Id b, F f, B bwd) {
        check(count(a) == count(b), "elementwise: shape mismatch");
        Id y = make_node(rows(a), cols(a));
        const std::size_t n = count(a);
        const T* av = val(a);
        const T* bv = val(b);
        T* yv = val(y);
        for (std::size_t i = 0; i < n; ++i) yv[i] = f(av[i], bv[i]);
        if (record_)
            tape_.push_back([this, a, b, y, n, bwd] {
                bwd(val(y), grad(a), grad(b), grad(y), n, val(a), val(b));
            });
        return y;
    }

    bool record_;
    std::vector<Node> nodes_;
    std::vector<std::function<void()>> tape_;
};

// Central-difference gradient check at eps (64-bit). Returns the maximum
// relative error over every entry of every parameter, with a 0.01 magnitude
// floor in the denominator so near-zero gradients compare absolutely.
template <typename BuildFn>
double grad_check(std::span<Mat<double>*> params, BuildFn build, double eps = 1e-5) {
    for (auto* p : params) p->zero_grad();
    {
        Graph<double> g(true);
        auto root = build(g);
        g.backward(root);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->g);

    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Mat<double>& p = *params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p.w[i];
            p.w[i] = orig + eps;
            Graph<double> gp(false);
            const double fp = gp.scalar(build(gp));
            p.w[i] = orig - eps;
            Graph<double> gm(false);
            const double fm = gm.scalar(build(gm));
            p.w[i] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-2});
            max_err = std::max(max_err, std::abs(a - fd) / denom);
        }
    }
    for (auto* p : params) p->zero_grad();
    return max_err;
}

}  // namespace tgrl::nn
