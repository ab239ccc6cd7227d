#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tweetsift/batching.hpp"
#include "tweetsift/corpus.hpp"
#include "tweetsift/preprocess.hpp"
#include "tweetsift/tensor.hpp"

namespace tweetsift {

// BAG: mean-pooled embeddings (the fastText-style baseline).
// XFORMER: one self-attention block + GELU feed-forward, residuals, mean pool.
// CONV: width-w 1-D convolution over embeddings, GELU, global max pool.
enum class EncoderVariant { Bag, Xformer, Conv };

std::string_view variant_name(EncoderVariant v) noexcept;
EncoderVariant parse_variant(std::string_view s);

struct ModelDims {
    std::size_t vocab_size = 0;
    std::size_t max_len = 128;  // rows of the position table (XFORMER)
    std::size_t d = 32;
    std::size_t heads = 2;
    std::size_t ffn = 64;
    std::size_t conv_filters = 32;
    std::size_t conv_width = 3;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Multi-sample dropout: k masks on the pooled representation, one shared
// linear head, logits averaged before the sigmoid.
struct MsdConfig {
    int k = 5;
    double p = 0.5;

    void validate() const;
};

struct ForwardMode {
    bool train = false;
    std::uint64_t seed = 0;

    static constexpr ForwardMode eval() noexcept { return {false, 0}; }
    static constexpr ForwardMode training(std::uint64_t seed) noexcept { return {true, seed}; }
};

// Every trainable tensor. Tensors a variant does not use stay empty.
struct Weights {
    Tensor embedding;  // |V| x d
    Tensor position;   // max_len x d
    Tensor attn_q_w, attn_q_b, attn_k_w, attn_k_b, attn_v_w, attn_v_b, attn_o_w, attn_o_b;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor conv_w, conv_b;  // (w*d) x c, 1 x c
    Tensor head_w, head_b;  // 1 x pooled, 1 x 1

    template <class F>
    void visit(F&& f) {
        visit_impl(*this, f);
    }
    template <class F>
    void visit(F&& f) const {
        visit_impl(*this, f);
    }

    Weights zeros_like() const;
    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const Weights&, const Weights&) = default;

private:
    template <class Self, class F>
    static void visit_impl(Self& w, F& f) {
        f("embedding", w.embedding);
        f("position", w.position);
        f("attn_q_w", w.attn_q_w);
        f("attn_q_b", w.attn_q_b);
        f("attn_k_w", w.attn_k_w);
        f("attn_k_b", w.attn_k_b);
        f("attn_v_w", w.attn_v_w);
        f("attn_v_b", w.attn_v_b);
        f("attn_o_w", w.attn_o_w);
        f("attn_o_b", w.attn_o_b);
        f("ffn_w1", w.ffn_w1);
        f("ffn_b1", w.ffn_b1);
        f("ffn_w2", w.ffn_w2);
        f("ffn_b2", w.ffn_b2);
        f("conv_w", w.conv_w);
        f("conv_b", w.conv_b);
        f("head_w", w.head_w);
        f("head_b", w.head_b);
    }
};

using Gradients = Weights;

struct ModelParams {
    EncoderVariant variant = EncoderVariant::Bag;
    ModelDims dims;
    Weights weights;

    std::size_t pooled_dim() const noexcept;
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Uniform(-scale, scale) for every tensor of the variant.
ModelParams init_params(EncoderVariant variant, const ModelDims& dims, std::uint64_t seed, double scale = 0.05);

double sigmoid(double z) noexcept;

inline constexpr double bce_clamp = 1e-12;
double bce_loss(double prob, Label target) noexcept;

// Probabilities per batch row. An example with true_len == 0 pools to the
// zero vector, so its probability is sigmoid(head bias).
std::vector<double> forward(const ModelParams& params, const Batch& batch, const MsdConfig& msd, ForwardMode mode);

struct LossAndGrads {
    double loss = 0.0;
    Gradients grads;
};

// Mean BCE over the batch and its exact gradient. The dropout masks are a
// function of mode.seed, so forward and backward with the same mode agree.
LossAndGrads backward(const ModelParams& params, const Batch& batch, std::span<const Label> targets,
                      const MsdConfig& msd, ForwardMode mode);

struct AttentionResult {
    Tensor output;   // Lq x dv
    Tensor weights;  // Lq x Lk
};

// Scaled dot-product attention; keys with mask 0 get zero weight. A query
// with no unmasked key yields a zero output row.
AttentionResult attention_forward(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const int> key_mask);

// EVAL probabilities aligned with ds.examples.
std::vector<double> predict(const ModelParams& params, const Dataset& ds, const Vocab& vocab, PreprocStrategy strategy,
                            std::size_t max_len, std::size_t batch_size = 64);

}  // namespace tweetsift
