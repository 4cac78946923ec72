#include "advlog/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace advlog::tc {

bool& grad_enabled() {
    thread_local bool enabled = true;
    return enabled;
}

namespace {

std::string shape_str(const Node& n) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < n.shape.size(); ++i) os << (i ? "x" : "") << n.shape[i];
    os << "]";
    return os.str();
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_acc(size_t m, size_t n, size_t k, const double* a, const double* b, double* c) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b + p * n;
            for (size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_at_acc(size_t m, size_t n, size_t k, const double* a, const double* b, double* c) {
    for (size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (size_t i = 0; i < m; ++i) {
            double api = ap[i];
            if (api == 0.0) continue;
            double* ci = c + i * n;
            for (size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_bt_acc(size_t m, size_t n, size_t k, const double* a, const double* b, double* c) {
    for (size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] += s;
        }
    }
}

Tensor raw(std::vector<size_t> shape, size_t n) {
    auto t = std::make_shared<Node>();
    t->shape = std::move(shape);
    t->val.resize(n);
    return t;
}

bool track(const Tensor& a) { return grad_enabled() && a->requires_grad; }

void link1(const Tensor& out, const Tensor& a, std::function<void()> fn) {
    if (track(a)) {
        out->requires_grad = true;
        out->parents = {a};
        out->backprop = std::move(fn);
    }
}

void link2(const Tensor& out, const Tensor& a, const Tensor& b, std::function<void()> fn) {
    if (track(a) || track(b)) {
        out->requires_grad = true;
        out->parents = {a, b};
        out->backprop = std::move(fn);
    }
}

}  // namespace

void shape_error(const std::string& op, const Node& a) {
    throw std::invalid_argument(op + ": bad shape " + shape_str(a));
}
void shape_error(const std::string& op, const Node& a, const Node& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

Tensor make(std::vector<size_t> shape, double fill) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    auto t = raw(std::move(shape), n);
    std::fill(t->val.begin(), t->val.end(), fill);
    return t;
}

Tensor make(std::vector<size_t> shape, std::vector<double> values) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (values.size() != n) throw std::invalid_argument("make: value count does not match shape");
    auto t = std::make_shared<Node>();
    t->shape = std::move(shape);
    t->val = std::move(values);
    return t;
}

Tensor scalar(double v) { return make({1}, std::vector<double>{v}); }

Tensor param(std::vector<size_t> shape, size_t fan_in, Rng& rng) {
    auto t = make(std::move(shape));
    double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 1.0;
    for (double& x : t->val) x = rng.uniform_range(-bound, bound);
    t->requires_grad = true;
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a->val.size() != b->val.size()) shape_error("add", *a, *b);
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] + b->val[i];
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    link2(out, a, b, [pa, pb, po] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pa->grad[i] += po->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pb->grad[i] += po->grad[i];
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a->val.size() != b->val.size()) shape_error("sub", *a, *b);
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] - b->val[i];
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    link2(out, a, b, [pa, pb, po] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pa->grad[i] += po->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pb->grad[i] -= po->grad[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a->val.size() != b->val.size()) shape_error("mul", *a, *b);
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * b->val[i];
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    link2(out, a, b, [pa, pb, po] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pa->grad[i] += po->grad[i] * pb->val[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pb->grad[i] += po->grad[i] * pa->val[i];
        }
    });
    return out;
}

Tensor scale(const Tensor& a, double c) {
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * c;
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po, c] {
        pa->ensure_grad();
        for (size_t i = 0; i < po->size(); ++i) pa->grad[i] += po->grad[i] * c;
    });
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    size_t m = a->rows(), n = a->cols();
    if (v->size() != n) shape_error("add_rowvec", *a, *v);
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out->val[i * n + j] = a->val[i * n + j] + v->val[j];
    Node *pa = a.get(), *pv = v.get(), *po = out.get();
    link2(out, a, v, [pa, pv, po, m, n] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < po->size(); ++i) pa->grad[i] += po->grad[i];
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) pv->grad[j] += po->grad[i * n + j];
        }
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
        shape_error("matmul", *a, *b);
    size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = make({m, n});
    gemm_acc(m, n, k, a->val.data(), b->val.data(), out->val.data());
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    link2(out, a, b, [pa, pb, po, m, n, k] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            gemm_bt_acc(m, k, n, po->grad.data(), pb->val.data(), pa->grad.data());
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            gemm_at_acc(k, n, m, pa->val.data(), po->grad.data(), pb->grad.data());
        }
    });
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a->cols() != b->cols()) shape_error("concat_rows", *a, *b);
    size_t n = a->cols(), ra = a->rows(), rb = b->rows();
    auto out = raw({ra + rb, n}, (ra + rb) * n);
    std::copy(a->val.begin(), a->val.end(), out->val.begin());
    std::copy(b->val.begin(), b->val.end(), out->val.begin() + ra * n);
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    link2(out, a, b, [pa, pb, po, ra, n] {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < pa->size(); ++i) pa->grad[i] += po->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < pb->size(); ++i) pb->grad[i] += po->grad[ra * n + i];
        }
    });
    return out;
}

Tensor slice_cols(const Tensor& a, size_t c0, size_t c1) {
    size_t m = a->rows(), n = a->cols();
    if (c0 >= c1 || c1 > n) shape_error("slice_cols", *a);
    size_t w = c1 - c0;
    auto out = raw({m, w}, m * w);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < w; ++j) out->val[i * w + j] = a->val[i * n + c0 + j];
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po, m, n, w, c0] {
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < w; ++j) pa->grad[i * n + c0 + j] += po->grad[i * w + j];
    });
    return out;
}

Tensor slice_rows(const Tensor& a, size_t r0, size_t r1) {
    size_t m = a->rows(), n = a->cols();
    if (r0 >= r1 || r1 > m) shape_error("slice_rows", *a);
    size_t h = r1 - r0;
    auto out = raw({h, n}, h * n);
    std::copy_n(a->val.data() + r0 * n, h * n, out->val.data());
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po, r0, n, h] {
        pa->ensure_grad();
        for (size_t i = 0; i < h * n; ++i) pa->grad[r0 * n + i] += po->grad[i];
    });
    return out;
}

Tensor sum(const Tensor& a) {
    auto out = raw({1}, 1);
    double s = 0.0;
    for (double x : a->val) s += x;
    out->val[0] = s;
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po] {
        pa->ensure_grad();
        for (size_t i = 0; i < pa->size(); ++i) pa->grad[i] += po->grad[0];
    });
    return out;
}

Tensor sigmoid(const Tensor& a) {
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = 1.0 / (1.0 + std::exp(-a->val[i]));
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po] {
        pa->ensure_grad();
        for (size_t i = 0; i < po->size(); ++i) {
            double y = po->val[i];
            pa->grad[i] += po->grad[i] * y * (1.0 - y);
        }
    });
    return out;
}

Tensor tanh_(const Tensor& a) {
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = std::tanh(a->val[i]);
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po] {
        pa->ensure_grad();
        for (size_t i = 0; i < po->size(); ++i) {
            double y = po->val[i];
            pa->grad[i] += po->grad[i] * (1.0 - y * y);
        }
    });
    return out;
}

Tensor relu(const Tensor& a) {
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] > 0.0 ? a->val[i] : 0.0;
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po] {
        pa->ensure_grad();
        for (size_t i = 0; i < po->size(); ++i)
            if (pa->val[i] > 0.0) pa->grad[i] += po->grad[i];
    });
    return out;
}

Tensor row_softmax(const Tensor& a) {
    size_t m = a->rows(), n = a->cols();
    auto out = raw(a->shape, a->size());
    for (size_t i = 0; i < m; ++i) {
        const double* xi = a->val.data() + i * n;
        double* yi = out->val.data() + i * n;
        double mx = xi[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (size_t j = 0; j < n; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            z += yi[j];
        }
        for (size_t j = 0; j < n; ++j) yi[j] /= z;
    }
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po, m, n] {
        pa->ensure_grad();
        for (size_t i = 0; i < m; ++i) {
            const double* y = po->val.data() + i * n;
            const double* gy = po->grad.data() + i * n;
            double dot = 0.0;
            for (size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
            double* gx = pa->grad.data() + i * n;
            for (size_t j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - dot);
        }
    });
    return out;
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    size_t m = a->rows(), n = a->cols();
    if (gain->size() != n || bias->size() != n) shape_error("layer_norm", *a, *gain);
    auto out = raw(a->shape, a->size());
    std::vector<double> inv_std(m), xhat(m * n);
    for (size_t i = 0; i < m; ++i) {
        const double* xi = a->val.data() + i * n;
        double mu = 0.0;
        for (size_t j = 0; j < n; ++j) mu += xi[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (size_t j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (size_t j = 0; j < n; ++j) {
            double xh = (xi[j] - mu) * is;
            xhat[i * n + j] = xh;
            out->val[i * n + j] = gain->val[j] * xh + bias->val[j];
        }
    }
    Node *pa = a.get(), *pg = gain.get(), *pb = bias.get(), *po = out.get();
    auto fn = [pa, pg, pb, po, m, n, inv_std = std::move(inv_std), xhat = std::move(xhat)] {
        for (size_t i = 0; i < m; ++i) {
            const double* gy = po->grad.data() + i * n;
            const double* xh = xhat.data() + i * n;
            if (pg->requires_grad) {
                pg->ensure_grad();
                for (size_t j = 0; j < n; ++j) pg->grad[j] += gy[j] * xh[j];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (size_t j = 0; j < n; ++j) pb->grad[j] += gy[j];
            }
            if (pa->requires_grad) {
                pa->ensure_grad();
                double mean_g = 0.0, mean_gx = 0.0;
                for (size_t j = 0; j < n; ++j) {
                    double t = gy[j] * pg->val[j];
                    mean_g += t;
                    mean_gx += t * xh[j];
                }
                mean_g /= static_cast<double>(n);
                mean_gx /= static_cast<double>(n);
                double* gx = pa->grad.data() + i * n;
                for (size_t j = 0; j < n; ++j) {
                    double t = gy[j] * pg->val[j];
                    gx[j] += (t - mean_g - xh[j] * mean_gx) * inv_std[i];
                }
            }
        }
    };
    if (track(a) || track(gain) || track(bias)) {
        out->requires_grad = true;
        out->parents = {a, gain, bias};
        out->backprop = std::move(fn);
    }
    return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    size_t v = table->rows(), d = table->cols();
    for (int id : ids)
        if (id < 0 || static_cast<size_t>(id) >= v)
            throw std::out_of_range("embedding_lookup: id out of range");
    auto out = raw({ids.size(), d}, ids.size() * d);
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table->val.data() + static_cast<size_t>(ids[i]) * d, d, out->val.data() + i * d);
    Node *pt = table.get(), *po = out.get();
    link1(out, table, [pt, po, ids, d] {
        pt->ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            double* g = pt->grad.data() + static_cast<size_t>(ids[i]) * d;
            const double* gy = po->grad.data() + i * d;
            for (size_t j = 0; j < d; ++j) g[j] += gy[j];
        }
    });
    return out;
}

Tensor dropout(const Tensor& a, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (!training || p == 0.0) return a;
    auto out = raw(a->shape, a->size());
    std::vector<double> mask(a->size());
    double keep = 1.0 / (1.0 - p);
    for (size_t i = 0; i < a->size(); ++i) {
        mask[i] = rng.uniform() < p ? 0.0 : keep;
        out->val[i] = a->val[i] * mask[i];
    }
    Node *pa = a.get(), *po = out.get();
    link1(out, a, [pa, po, mask = std::move(mask)] {
        pa->ensure_grad();
        for (size_t i = 0; i < po->size(); ++i) pa->grad[i] += po->grad[i] * mask[i];
    });
    return out;
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        size_t heads, size_t batch, size_t seq_len) {
    size_t rows = batch * seq_len;
    if (q->rows() != rows || k->rows() != rows || v->rows() != rows) shape_error("causal_attention", *q);
    size_t d = q->cols();
    if (d != k->cols() || d != v->cols() || heads == 0 || d % heads != 0)
        shape_error("causal_attention", *q, *k);
    size_t hd = d / heads;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    auto out = make({rows, d});
    // Attention weights kept for backward: per (batch, head) a T x T lower-tri matrix.
    std::vector<double> probs(batch * heads * seq_len * seq_len, 0.0);

    for (size_t b = 0; b < batch; ++b) {
        size_t base = b * seq_len;
        for (size_t h = 0; h < heads; ++h) {
            size_t off = h * hd;
            double* pmat = probs.data() + (b * heads + h) * seq_len * seq_len;
            for (size_t i = 0; i < seq_len; ++i) {
                const double* qi = q->val.data() + (base + i) * d + off;
                double* pi = pmat + i * seq_len;
                double mx = -1e300;
                for (size_t j = 0; j <= i; ++j) {
                    const double* kj = k->val.data() + (base + j) * d + off;
                    double s = 0.0;
                    for (size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
                    pi[j] = s * inv_sqrt;
                    mx = std::max(mx, pi[j]);
                }
                double z = 0.0;
                for (size_t j = 0; j <= i; ++j) {
                    pi[j] = std::exp(pi[j] - mx);
                    z += pi[j];
                }
                double* oi = out->val.data() + (base + i) * d + off;
                for (size_t j = 0; j <= i; ++j) {
                    pi[j] /= z;
                    const double* vj = v->val.data() + (base + j) * d + off;
                    for (size_t c = 0; c < hd; ++c) oi[c] += pi[j] * vj[c];
                }
            }
        }
    }

    Node *pq = q.get(), *pk = k.get(), *pv = v.get(), *po = out.get();
    auto fn = [pq, pk, pv, po, heads, batch, seq_len, d, hd, inv_sqrt, probs = std::move(probs)] {
        pq->ensure_grad();
        pk->ensure_grad();
        pv->ensure_grad();
        std::vector<double> dp(seq_len), ds(seq_len);
        for (size_t b = 0; b < batch; ++b) {
            size_t base = b * seq_len;
            for (size_t h = 0; h < heads; ++h) {
                size_t off = h * hd;
                const double* pmat = probs.data() + (b * heads + h) * seq_len * seq_len;
                for (size_t i = 0; i < seq_len; ++i) {
                    const double* go = po->grad.data() + (base + i) * d + off;
                    const double* pi = pmat + i * seq_len;
                    // dV and dP
                    double dot = 0.0;
                    for (size_t j = 0; j <= i; ++j) {
                        const double* vj = pv->val.data() + (base + j) * d + off;
                        double s = 0.0;
                        for (size_t c = 0; c < hd; ++c) s += go[c] * vj[c];
                        dp[j] = s;
                        dot += pi[j] * s;
                        double* gv = pv->grad.data() + (base + j) * d + off;
                        for (size_t c = 0; c < hd; ++c) gv[c] += pi[j] * go[c];
                    }
                    // softmax backward, then dQ/dK
                    const double* qi = pq->val.data() + (base + i) * d + off;
                    double* gq = pq->grad.data() + (base + i) * d + off;
                    for (size_t j = 0; j <= i; ++j) {
                        ds[j] = pi[j] * (dp[j] - dot) * inv_sqrt;
                        const double* kj = pk->val.data() + (base + j) * d + off;
                        double* gk = pk->grad.data() + (base + j) * d + off;
                        for (size_t c = 0; c < hd; ++c) {
                            gq[c] += ds[j] * kj[c];
                            gk[c] += ds[j] * qi[c];
                        }
                    }
                }
            }
        }
    };
    if (track(q) || track(k) || track(v)) {
        out->requires_grad = true;
        out->parents = {q, k, v};
        out->backprop = std::move(fn);
    }
    return out;
}

LstmOut lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                  const Tensor& wx, const Tensor& wh, const Tensor& b) {
    size_t hidden = h->cols();
    auto z = add(add(matmul(x, wx), matmul(h, wh)), b);
    if (z->cols() != 4 * hidden) shape_error("lstm_cell", *z, *h);
    auto gi = sigmoid(slice_cols(z, 0, hidden));
    auto gf = sigmoid(slice_cols(z, hidden, 2 * hidden));
    auto gg = tanh_(slice_cols(z, 2 * hidden, 3 * hidden));
    auto go = sigmoid(slice_cols(z, 3 * hidden, 4 * hidden));
    auto c2 = add(mul(gf, c), mul(gi, gg));
    auto h2 = mul(go, tanh_(c2));
    return {h2, c2};
}

Tensor softmax_cross_entropy(const Tensor& logits, int target) {
    return softmax_cross_entropy_rows(logits, {target}, true);
}

Tensor softmax_cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                                  bool mean_reduce) {
    size_t m = logits->rows(), n = logits->cols();
    if (targets.size() != m) shape_error("softmax_cross_entropy_rows", *logits);
    for (int t : targets)
        if (t < 0 || static_cast<size_t>(t) >= n)
            throw std::out_of_range("softmax_cross_entropy_rows: target out of range");
    auto out = raw({1}, 1);
    std::vector<double> soft(m * n);
    double total = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const double* xi = logits->val.data() + i * n;
        double* si = soft.data() + i * n;
        double mx = xi[0];
        for (size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (size_t j = 0; j < n; ++j) {
            si[j] = std::exp(xi[j] - mx);
            z += si[j];
        }
        for (size_t j = 0; j < n; ++j) si[j] /= z;
        total += -(xi[targets[i]] - mx - std::log(z));
    }
    double scale_f = mean_reduce ? 1.0 / static_cast<double>(m) : 1.0;
    out->val[0] = total * scale_f;
    Node *pl = logits.get(), *po = out.get();
    link1(out, logits, [pl, po, m, n, targets, scale_f, soft = std::move(soft)] {
        pl->ensure_grad();
        double g = po->grad[0] * scale_f;
        for (size_t i = 0; i < m; ++i) {
            const double* si = soft.data() + i * n;
            double* gx = pl->grad.data() + i * n;
            for (size_t j = 0; j < n; ++j) gx[j] += g * si[j];
            gx[targets[i]] -= g;
        }
    });
    return out;
}

Tensor log_prob_entry(const Tensor& logits, int id, double eps) {
    size_t n = logits->size();
    if (logits->rows() != 1 && logits->shape.size() > 1)
        shape_error("log_prob_entry", *logits);
    if (id < 0 || static_cast<size_t>(id) >= n)
        throw std::out_of_range("log_prob_entry: id out of range");
    std::vector<double> soft(n);
    double mx = logits->val[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, logits->val[j]);
    double z = 0.0;
    for (size_t j = 0; j < n; ++j) {
        soft[j] = std::exp(logits->val[j] - mx);
        z += soft[j];
    }
    for (size_t j = 0; j < n; ++j) soft[j] /= z;
    auto out = raw({1}, 1);
    double p = soft[static_cast<size_t>(id)];
    out->val[0] = std::log(p + eps);
    Node *pl = logits.get(), *po = out.get();
    link1(out, logits, [pl, po, id, eps, p, n, soft = std::move(soft)] {
        pl->ensure_grad();
        double g = po->grad[0] * (p / (p + eps));
        for (size_t j = 0; j < n; ++j) pl->grad[j] -= g * soft[j];
        pl->grad[static_cast<size_t>(id)] += g;
    });
    return out;
}

void backward(const Tensor& loss) {
    if (!loss->is_scalar()) throw std::invalid_argument("backward: loss must be a scalar");
    // Iterative post-order DFS to get a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop();
    }
}

void zero_grads(const std::vector<Tensor>& params) {
    for (const auto& p : params) p->zero_grad();
}

void Adam::step(const std::vector<Tensor>& params, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& p : params) {
        if (p->grad.empty()) continue;
        auto& st = states_[p.get()];
        if (st.m.empty()) {
            st.m.assign(p->size(), 0.0);
            st.v.assign(p->size(), 0.0);
        }
        for (size_t i = 0; i < p->size(); ++i) {
            double g = p->grad[i];
            st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g;
            st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g * g;
            double mhat = st.m[i] / bc1;
            double vhat = st.v[i] / bc2;
            p->val[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

std::vector<std::pair<std::vector<double>, std::vector<double>>>
Adam::export_state(const std::vector<Tensor>& params) const {
    std::vector<std::pair<std::vector<double>, std::vector<double>>> out;
    for (const auto& p : params) {
        auto it = states_.find(p.get());
        if (it == states_.end())
            out.emplace_back(std::vector<double>(p->size(), 0.0), std::vector<double>(p->size(), 0.0));
        else
            out.emplace_back(it->second.m, it->second.v);
    }
    return out;
}

void Adam::import_state(const std::vector<Tensor>& params, uint64_t t,
                        const std::vector<std::pair<std::vector<double>, std::vector<double>>>& mv) {
    if (mv.size() != params.size()) throw std::invalid_argument("Adam::import_state: size mismatch");
    states_.clear();
    t_ = t;
    for (size_t i = 0; i < params.size(); ++i)
        states_[params[i].get()] = AdamState{mv[i].first, mv[i].second};
}

}  // namespace advlog::tc
