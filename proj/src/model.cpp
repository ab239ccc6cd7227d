#include "tweetsift/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "tweetsift/error.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

namespace {

constexpr double gelu_c = 0.7978845608028654;  // sqrt(2/pi)
constexpr double gelu_a = 0.044715;

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::tanh(gelu_c * (x + gelu_a * x * x * x))); }

double gelu_grad(double x) noexcept {
    const double t = std::tanh(gelu_c * (x + gelu_a * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * gelu_c * (1.0 + 3.0 * gelu_a * x * x);
}

// Average of k inverted-dropout masks, one value per pooled unit.
std::vector<double> head_mask(const MsdConfig& msd, std::size_t dim, ForwardMode mode, std::size_t row) {
    std::vector<double> avg(dim, 1.0);
    if (!mode.train) return avg;
    Rng rng(derive_seed(mode.seed, {fnv1a("msd"), row}));
    const double keep_scale = 1.0 / (1.0 - msd.p);
    std::fill(avg.begin(), avg.end(), 0.0);
    for (int s = 0; s < msd.k; ++s)
        for (std::size_t j = 0; j < dim; ++j)
            if (rng.uniform() >= msd.p) avg[j] += keep_scale;
    for (auto& a : avg) a /= static_cast<double>(msd.k);
    return avg;
}

Tensor column_slice(const Tensor& m, std::size_t c0, std::size_t n) {
    Tensor out(m.rows(), n);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = m(i, c0 + j);
    return out;
}

void add_column_slice(Tensor& dst, const Tensor& src, std::size_t c0) {
    for (std::size_t i = 0; i < src.rows(); ++i)
        for (std::size_t j = 0; j < src.cols(); ++j) dst(i, c0 + j) += src(i, j);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y;
    matmul(x, w, y);
    add_row_bias(y, b);
    return y;
}

struct AttentionGrads {
    Tensor dq, dk, dv;
};

AttentionGrads attention_backward(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& weights,
                                  const Tensor& dout) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    AttentionGrads g{Tensor(q.rows(), q.cols()), Tensor(k.rows(), k.cols()), Tensor(v.rows(), v.cols())};
    std::vector<double> da(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const auto doi = dout.row(i);
        double weighted = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            da[j] = dot(doi, v.row(j));
            weighted += weights(i, j) * da[j];
        }
        for (std::size_t j = 0; j < k.rows(); ++j) {
            const double a = weights(i, j);
            if (a == 0.0) continue;
            auto dvj = g.dv.row(j);
            for (std::size_t c = 0; c < dvj.size(); ++c) dvj[c] += a * doi[c];
            const double ds = a * (da[j] - weighted) * scale;
            auto dqi = g.dq.row(i);
            auto dkj = g.dk.row(j);
            const auto kj = k.row(j);
            const auto qi = q.row(i);
            for (std::size_t c = 0; c < dqi.size(); ++c) {
                dqi[c] += ds * kj[c];
                dkj[c] += ds * qi[c];
            }
        }
    }
    return g;
}

// Forward state for one example, kept for the backward pass.
struct ExampleGraph {
    const ModelParams& params;
    std::span<const int> ids;  // padded row, length L
    std::size_t n = 0;         // true length

    std::vector<double> pooled;

    // XFORMER
    Tensor x0, q, k, v, attn, x1, hidden, act, x2;
    std::vector<AttentionResult> heads;
    std::vector<int> key_mask;
    // CONV
    Tensor cols, conv_pre;
    std::vector<std::size_t> argmax;

    ExampleGraph(const ModelParams& p, std::span<const int> row, std::size_t true_len)
        : params(p), ids(row), n(true_len) {}

    void run() {
        const auto& dims = params.dims;
        const auto& w = params.weights;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= dims.vocab_size)
                throw DataError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                                std::to_string(dims.vocab_size));
        pooled.assign(params.pooled_dim(), 0.0);
        switch (params.variant) {
            case EncoderVariant::Bag: run_bag(w); break;
            case EncoderVariant::Xformer: run_xformer(dims, w); break;
            case EncoderVariant::Conv: run_conv(dims, w); break;
        }
    }

    void run_bag(const Weights& w) {
        if (n == 0) return;
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = w.embedding.row(static_cast<std::size_t>(ids[i]));
            for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += e[j];
        }
        for (auto& p : pooled) p /= static_cast<double>(n);
    }

    void run_xformer(const ModelDims& dims, const Weights& w) {
        const std::size_t len = ids.size();
        if (len > dims.max_len)
            throw DataError("sequence length " + std::to_string(len) + " exceeds model max_len " +
                            std::to_string(dims.max_len));
        const std::size_t d = dims.d;
        x0 = Tensor(len, d);
        for (std::size_t i = 0; i < len; ++i) {
            const auto e = w.embedding.row(static_cast<std::size_t>(ids[i]));
            const auto p = w.position.row(i);
            auto r = x0.row(i);
            for (std::size_t j = 0; j < d; ++j) r[j] = e[j] + p[j];
        }
        q = linear(x0, w.attn_q_w, w.attn_q_b);
        k = linear(x0, w.attn_k_w, w.attn_k_b);
        v = linear(x0, w.attn_v_w, w.attn_v_b);
        key_mask.assign(len, 0);
        std::fill_n(key_mask.begin(), n, 1);
        const std::size_t dh = d / dims.heads;
        attn = Tensor(len, d);
        heads.clear();
        for (std::size_t h = 0; h < dims.heads; ++h) {
            heads.push_back(attention_forward(column_slice(q, h * dh, dh), column_slice(k, h * dh, dh),
                                              column_slice(v, h * dh, dh), key_mask));
            for (std::size_t i = 0; i < len; ++i)
                for (std::size_t j = 0; j < dh; ++j) attn(i, h * dh + j) = heads.back().output(i, j);
        }
        x1 = linear(attn, w.attn_o_w, w.attn_o_b);
        for (std::size_t i = 0; i < x1.size(); ++i) x1.flat()[i] += x0.flat()[i];
        hidden = linear(x1, w.ffn_w1, w.ffn_b1);
        act = hidden;
        for (auto& a : act.flat()) a = gelu(a);
        x2 = linear(act, w.ffn_w2, w.ffn_b2);
        for (std::size_t i = 0; i < x2.size(); ++i) x2.flat()[i] += x1.flat()[i];
        if (n == 0) return;
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = x2.row(i);
            for (std::size_t j = 0; j < d; ++j) pooled[j] += r[j];
        }
        for (auto& p : pooled) p /= static_cast<double>(n);
    }

    // Window position t + o - half; positions outside [0, n) read as zero.
    void run_conv(const ModelDims& dims, const Weights& w) {
        const std::size_t len = ids.size();
        const std::size_t d = dims.d;
        const std::size_t width = dims.conv_width;
        const auto half = static_cast<std::ptrdiff_t>((width - 1) / 2);
        cols = Tensor(len, width * d);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t o = 0; o < width; ++o) {
                const auto pos = static_cast<std::ptrdiff_t>(t + o) - half;
                if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(n)) continue;
                const auto e = w.embedding.row(static_cast<std::size_t>(ids[static_cast<std::size_t>(pos)]));
                std::copy(e.begin(), e.end(), cols.row(t).begin() + static_cast<std::ptrdiff_t>(o * d));
            }
        }
        conv_pre = linear(cols, w.conv_w, w.conv_b);
        const std::size_t c = dims.conv_filters;
        argmax.assign(c, 0);
        if (n == 0) return;
        for (std::size_t f = 0; f < c; ++f) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < n; ++t) {
                const double z = gelu(conv_pre(t, f));
                if (z > best) {
                    best = z;
                    argmax[f] = t;
                }
            }
            pooled[f] = best;
        }
    }

    void backprop(std::span<const double> dpooled, Gradients& g) const {
        switch (params.variant) {
            case EncoderVariant::Bag: backprop_bag(dpooled, g); break;
            case EncoderVariant::Xformer: backprop_xformer(dpooled, g); break;
            case EncoderVariant::Conv: backprop_conv(dpooled, g); break;
        }
    }

    void backprop_bag(std::span<const double> dpooled, Gradients& g) const {
        if (n == 0) return;
        for (std::size_t i = 0; i < n; ++i) {
            auto ge = g.embedding.row(static_cast<std::size_t>(ids[i]));
            for (std::size_t j = 0; j < ge.size(); ++j) ge[j] += dpooled[j] / static_cast<double>(n);
        }
    }

    void backprop_xformer(std::span<const double> dpooled, Gradients& g) const {
        if (n == 0) return;
        const auto& dims = params.dims;
        const auto& w = params.weights;
        const std::size_t len = ids.size();
        const std::size_t d = dims.d;

        Tensor dx2(len, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) dx2(i, j) = dpooled[j] / static_cast<double>(n);

        // x2 = x1 + gelu(x1 W1 + b1) W2 + b2
        matmul_at_b_acc(act, dx2, g.ffn_w2);
        acc_col_sums(dx2, g.ffn_b2);
        Tensor dact;
        matmul_a_bt(dx2, w.ffn_w2, dact);
        for (std::size_t i = 0; i < dact.size(); ++i) dact.flat()[i] *= gelu_grad(hidden.flat()[i]);
        matmul_at_b_acc(x1, dact, g.ffn_w1);
        acc_col_sums(dact, g.ffn_b1);
        Tensor dx1;
        matmul_a_bt(dact, w.ffn_w1, dx1);
        for (std::size_t i = 0; i < dx1.size(); ++i) dx1.flat()[i] += dx2.flat()[i];

        // x1 = x0 + attn Wo + bo
        matmul_at_b_acc(attn, dx1, g.attn_o_w);
        acc_col_sums(dx1, g.attn_o_b);
        Tensor dattn;
        matmul_a_bt(dx1, w.attn_o_w, dattn);
        Tensor dx0 = dx1;

        const std::size_t dh = d / dims.heads;
        Tensor dq(len, d), dk(len, d), dv(len, d);
        for (std::size_t h = 0; h < dims.heads; ++h) {
            const auto ag = attention_backward(column_slice(q, h * dh, dh), column_slice(k, h * dh, dh),
                                               column_slice(v, h * dh, dh), heads[h].weights,
                                               column_slice(dattn, h * dh, dh));
            add_column_slice(dq, ag.dq, h * dh);
            add_column_slice(dk, ag.dk, h * dh);
            add_column_slice(dv, ag.dv, h * dh);
        }
        const auto project_back = [&](const Tensor& dproj, const Tensor& wmat, Tensor& gw, Tensor& gb) {
            matmul_at_b_acc(x0, dproj, gw);
            acc_col_sums(dproj, gb);
            Tensor dx;
            matmul_a_bt(dproj, wmat, dx);
            for (std::size_t i = 0; i < dx.size(); ++i) dx0.flat()[i] += dx.flat()[i];
        };
        project_back(dq, w.attn_q_w, g.attn_q_w, g.attn_q_b);
        project_back(dk, w.attn_k_w, g.attn_k_w, g.attn_k_b);
        project_back(dv, w.attn_v_w, g.attn_v_w, g.attn_v_b);

        // Padded rows carry exactly zero gradient; only real tokens scatter.
        for (std::size_t i = 0; i < n; ++i) {
            auto ge = g.embedding.row(static_cast<std::size_t>(ids[i]));
            auto gp = g.position.row(i);
            const auto r = dx0.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                ge[j] += r[j];
                gp[j] += r[j];
            }
        }
    }

    void backprop_conv(std::span<const double> dpooled, Gradients& g) const {
        if (n == 0) return;
        const auto& dims = params.dims;
        const auto& w = params.weights;
        const std::size_t len = ids.size();
        const std::size_t d = dims.d;
        const std::size_t width = dims.conv_width;
        const auto half = static_cast<std::ptrdiff_t>((width - 1) / 2);

        Tensor dpre(len, dims.conv_filters);
        for (std::size_t f = 0; f < dims.conv_filters; ++f)
            dpre(argmax[f], f) = dpooled[f] * gelu_grad(conv_pre(argmax[f], f));
        matmul_at_b_acc(cols, dpre, g.conv_w);
        acc_col_sums(dpre, g.conv_b);
        Tensor dcols;
        matmul_a_bt(dpre, w.conv_w, dcols);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t o = 0; o < width; ++o) {
                const auto pos = static_cast<std::ptrdiff_t>(t + o) - half;
                if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(n)) continue;
                auto ge = g.embedding.row(static_cast<std::size_t>(ids[static_cast<std::size_t>(pos)]));
                const auto src = dcols.row(t).subspan(o * d, d);
                for (std::size_t j = 0; j < d; ++j) ge[j] += src[j];
            }
        }
    }
};

double head_logit(const Weights& w, std::span<const double> pooled, std::span<const double> mask) {
    const auto hw = w.head_w.flat();
    double z = 0.0;
    for (std::size_t j = 0; j < pooled.size(); ++j) z += hw[j] * (mask[j] * pooled[j]);
    return z + w.head_b.flat()[0];
}

void check_batch(const ModelParams& params, const Batch& batch) {
    if (batch.size() == 0) throw DataError("empty batch");
    if (batch.token_ids.size() != batch.size() * batch.length || batch.true_len.size() != batch.size())
        throw DataError("malformed batch");
    for (auto l : batch.true_len)
        if (l > batch.length) throw DataError("batch true_len exceeds padded length");
    (void)params;
}

}  // namespace

std::string_view variant_name(EncoderVariant v) noexcept {
    switch (v) {
        case EncoderVariant::Bag: return "BAG";
        case EncoderVariant::Xformer: return "XFORMER";
        case EncoderVariant::Conv: return "CONV";
    }
    return "BAG";
}

EncoderVariant parse_variant(std::string_view s) {
    if (s == "BAG") return EncoderVariant::Bag;
    if (s == "XFORMER") return EncoderVariant::Xformer;
    if (s == "CONV") return EncoderVariant::Conv;
    throw UsageError("unknown encoder variant '" + std::string(s) + "'");
}

void MsdConfig::validate() const {
    if (k < 1) throw UsageError("multi-sample dropout: k must be >= 1");
    if (!(p >= 0.0 && p < 1.0)) throw UsageError("multi-sample dropout: p must be in [0, 1)");
}

Weights Weights::zeros_like() const {
    Weights z;
    Weights& zr = z;
    const Weights& self = *this;
    // Walk both structures in lockstep through the common visitor order.
    std::vector<const Tensor*> src;
    self.visit([&](std::string_view, const Tensor& t) { src.push_back(&t); });
    std::size_t i = 0;
    zr.visit([&](std::string_view, Tensor& t) {
        t = Tensor(src[i]->rows(), src[i]->cols());
        ++i;
    });
    return z;
}

std::size_t Weights::parameter_count() const {
    std::size_t n = 0;
    visit([&](std::string_view, const Tensor& t) { n += t.size(); });
    return n;
}

bool Weights::all_finite() const {
    bool ok = true;
    visit([&](std::string_view, const Tensor& t) {
        for (double x : t.flat()) ok = ok && std::isfinite(x);
    });
    return ok;
}

std::size_t ModelParams::pooled_dim() const noexcept {
    return variant == EncoderVariant::Conv ? dims.conv_filters : dims.d;
}

ModelParams init_params(EncoderVariant variant, const ModelDims& dims, std::uint64_t seed, double scale) {
    if (dims.vocab_size < 2 || dims.d < 1) throw UsageError("init_params: vocab_size >= 2 and d >= 1 required");
    ModelParams p;
    p.variant = variant;
    p.dims = dims;
    auto& w = p.weights;
    const std::size_t d = dims.d;
    w.embedding = Tensor(dims.vocab_size, d);
    switch (variant) {
        case EncoderVariant::Bag: break;
        case EncoderVariant::Xformer:
            if (dims.heads < 1 || d % dims.heads != 0) throw UsageError("init_params: d must be divisible by heads");
            if (dims.max_len < 1 || dims.ffn < 1) throw UsageError("init_params: max_len and ffn must be >= 1");
            w.position = Tensor(dims.max_len, d);
            for (auto* t : {&w.attn_q_w, &w.attn_k_w, &w.attn_v_w, &w.attn_o_w}) *t = Tensor(d, d);
            for (auto* t : {&w.attn_q_b, &w.attn_k_b, &w.attn_v_b, &w.attn_o_b, &w.ffn_b2}) *t = Tensor(1, d);
            w.ffn_w1 = Tensor(d, dims.ffn);
            w.ffn_b1 = Tensor(1, dims.ffn);
            w.ffn_w2 = Tensor(dims.ffn, d);
            break;
        case EncoderVariant::Conv:
            if (dims.conv_width < 1 || dims.conv_width % 2 == 0)
                throw UsageError("init_params: conv_width must be odd");
            if (dims.conv_filters < 1) throw UsageError("init_params: conv_filters must be >= 1");
            w.conv_w = Tensor(dims.conv_width * d, dims.conv_filters);
            w.conv_b = Tensor(1, dims.conv_filters);
            break;
    }
    w.head_w = Tensor(1, p.pooled_dim());
    w.head_b = Tensor(1, 1);

    Rng rng(derive_seed(seed, {fnv1a("init")}));
    w.visit([&](std::string_view, Tensor& t) {
        for (auto& x : t.flat()) x = rng.uniform(-scale, scale);
    });
    return p;
}

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_loss(double prob, Label target) noexcept {
    const double p = std::clamp(prob, bce_clamp, 1.0 - bce_clamp);
    return target == Label::Informative ? -std::log(p) : -std::log(1.0 - p);
}

AttentionResult attention_forward(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const int> key_mask) {
    if (q.cols() != k.cols() || k.rows() != v.rows() || key_mask.size() != k.rows())
        throw DataError("attention_forward: shape mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    AttentionResult r{Tensor(q.rows(), v.cols()), Tensor(q.rows(), k.rows())};
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k.rows(); ++j) {
            if (!key_mask[j]) continue;
            r.weights(i, j) = dot(q.row(i), k.row(j)) * scale;
            mx = std::max(mx, r.weights(i, j));
        }
        if (mx == -std::numeric_limits<double>::infinity()) continue;  // no visible key
        double z = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            if (!key_mask[j]) continue;
            r.weights(i, j) = std::exp(r.weights(i, j) - mx);
            z += r.weights(i, j);
        }
        auto out = r.output.row(i);
        for (std::size_t j = 0; j < k.rows(); ++j) {
            if (!key_mask[j]) continue;
            const double a = (r.weights(i, j) /= z);
            const auto vj = v.row(j);
            for (std::size_t c = 0; c < out.size(); ++c) out[c] += a * vj[c];
        }
    }
    return r;
}

std::vector<double> forward(const ModelParams& params, const Batch& batch, const MsdConfig& msd, ForwardMode mode) {
    msd.validate();
    check_batch(params, batch);
    std::vector<double> probs(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        ExampleGraph graph(params, batch.tokens(b), batch.true_len[b]);
        graph.run();
        const auto mask = head_mask(msd, graph.pooled.size(), mode, b);
        probs[b] = sigmoid(head_logit(params.weights, graph.pooled, mask));
    }
    return probs;
}

LossAndGrads backward(const ModelParams& params, const Batch& batch, std::span<const Label> targets,
                      const MsdConfig& msd, ForwardMode mode) {
    msd.validate();
    check_batch(params, batch);
    if (targets.size() != batch.size()) throw DataError("backward: targets do not match batch size");
    LossAndGrads out{0.0, params.weights.zeros_like()};
    auto& g = out.grads;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dpooled;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        ExampleGraph graph(params, batch.tokens(b), batch.true_len[b]);
        graph.run();
        const auto mask = head_mask(msd, graph.pooled.size(), mode, b);
        const double z = head_logit(params.weights, graph.pooled, mask);
        const double p = sigmoid(z);
        const double loss = bce_loss(p, targets[b]);
        if (!std::isfinite(loss) || !std::isfinite(z))
            throw NumericError("non-finite loss at batch row " + std::to_string(b) + " (example index " +
                               std::to_string(batch.index[b]) + ")");
        out.loss += loss;

        // d(mean BCE)/dz for a sigmoid output is (p - t) / B.
        const double dz = (p - static_cast<double>(to_int(targets[b]))) * inv_b;
        auto ghw = g.head_w.flat();
        const auto hw = params.weights.head_w.flat();
        dpooled.assign(graph.pooled.size(), 0.0);
        for (std::size_t j = 0; j < graph.pooled.size(); ++j) {
            ghw[j] += dz * (mask[j] * graph.pooled[j]);
            dpooled[j] = dz * hw[j] * mask[j];
        }
        g.head_b.flat()[0] += dz;
        graph.backprop(dpooled, g);
    }
    out.loss *= inv_b;
    return out;
}

std::vector<double> predict(const ModelParams& params, const Dataset& ds, const Vocab& vocab, PreprocStrategy strategy,
                            std::size_t max_len, std::size_t batch_size) {
    std::set<std::string_view> ids;
    for (const auto& e : ds.examples)
        if (!ids.insert(e.id).second) throw DataError("predict: duplicate id '" + e.id + "'");
    if (vocab.size() != params.dims.vocab_size)
        throw DataError("predict: vocabulary size " + std::to_string(vocab.size()) + " does not match model (" +
                        std::to_string(params.dims.vocab_size) + ")");
    std::vector<EncodedExample> encoded;
    encoded.reserve(ds.size());
    for (const auto& e : ds.examples) encoded.push_back(encode(tokenize(apply_strategy(strategy, e.text)), vocab, max_len));
    std::vector<double> probs(ds.size());
    const MsdConfig msd{};
    for (const auto& batch : bucket_batches(encoded, batch_size, 0, BatchMode::Sequential)) {
        const auto p = forward(params, batch, msd, ForwardMode::eval());
        for (std::size_t b = 0; b < batch.size(); ++b) probs[batch.index[b]] = p[b];
    }
    return probs;
}

}  // namespace tweetsift
