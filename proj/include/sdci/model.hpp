#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdci/config.hpp"
#include "sdci/dataset.hpp"
#include "sdci/nn.hpp"

namespace sdci {

// ---------------------------------------------------------------------------
// batches
// ---------------------------------------------------------------------------

// A batch of same-shaped samples laid out for the GNN: objects are rows of
// [B*N, .] tensors, ordered pairs are rows of [B*E, .] tensors (E = N(N-1),
// pair (i,j) meaning i -> j influence, source-major enumeration).
template <typename T>
struct Batch {
    std::size_t B = 0, T_frames = 0, N = 0, D = 0;
    std::size_t K_data = 0, n_edge_types = 0;
    Regime regime = Regime::observed_independent;

    std::vector<Tensor<T>> frames;       // per frame: [B*N, D]
    std::vector<Tensor<T>> state_onehot; // per frame: [B*N, K_data] (empty in hidden regime)
    std::vector<std::vector<std::uint8_t>> state_labels; // per frame: [B*N]
    Tensor<T> encoder_input;             // [B*N, T*F_in], frames flattened per object

    std::vector<std::size_t> src_rows, dst_rows; // [B*E] into [B*N]
    std::vector<const TimeSeriesSample*> samples; // ground truth for metrics

    std::size_t edges() const { return N * (N - 1); }
    std::size_t rows() const { return B * N; }
};

template <typename T>
Tensor<T> onehot_rows(const std::vector<std::uint8_t>& labels, std::size_t width) {
    Tensor<T> out({labels.size(), width});
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= width) throw ContractError("state label out of range for one-hot");
        out.data()[r * width + labels[r]] = T(1);
    }
    return out;
}

template <typename T>
Batch<T> build_batch(const std::vector<const TimeSeriesSample*>& samples, bool states_in_input) {
    if (samples.empty()) throw ValueError("empty batch");
    Batch<T> batch;
    const TimeSeriesSample& first = *samples[0];
    batch.B = samples.size();
    batch.T_frames = first.T;
    batch.N = first.N;
    batch.D = first.D;
    batch.K_data = first.graph.K;
    batch.n_edge_types = first.graph.n_edge_types;
    batch.regime = first.regime;
    batch.samples = samples;

    std::size_t B = batch.B, N = batch.N, D = batch.D, TF = batch.T_frames;
    for (const auto* s : samples)
        if (s->T != TF || s->N != N || s->D != D || s->graph.K != batch.K_data)
            throw ContractError("batch samples must share shapes");

    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                batch.src_rows.push_back(b * N + i);
                batch.dst_rows.push_back(b * N + j);
            }

    batch.frames.reserve(TF);
    for (std::size_t t = 0; t < TF; ++t) {
        Tensor<T> frame({B * N, D});
        std::vector<std::uint8_t> labels(B * N);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t d = 0; d < D; ++d)
                    frame.data()[(b * N + i) * D + d] =
                        static_cast<T>(samples[b]->pos(t, i, d));
                labels[b * N + i] = samples[b]->state(t, i);
            }
        batch.frames.push_back(std::move(frame));
        batch.state_labels.push_back(labels);
        if (states_in_input)
            batch.state_onehot.push_back(onehot_rows<T>(labels, batch.K_data));
    }

    std::size_t F = D + (states_in_input ? batch.K_data : 0);
    Tensor<T> flat({B * N, TF * F});
    for (std::size_t t = 0; t < TF; ++t)
        for (std::size_t r = 0; r < B * N; ++r) {
            for (std::size_t d = 0; d < D; ++d)
                flat.data()[r * TF * F + t * F + d] = batch.frames[t].data()[r * D + d];
            if (states_in_input)
                for (std::size_t k = 0; k < batch.K_data; ++k)
                    flat.data()[r * TF * F + t * F + D + k] =
                        batch.state_onehot[t].data()[r * batch.K_data + k];
        }
    batch.encoder_input = std::move(flat);
    return batch;
}

// Hard one-hot edge assignments copied from the samples' ground-truth graphs,
// one tensor per state: [B*E, n_edge_types]. Pair rows follow batch order.
template <typename T>
std::vector<Tensor<T>> truth_assignments(const Batch<T>& batch, std::size_t K_model) {
    std::size_t E = batch.edges(), n_e = batch.n_edge_types;
    std::vector<Tensor<T>> out;
    for (std::size_t k = 0; k < K_model; ++k) {
        Tensor<T> w({batch.B * E, n_e});
        for (std::size_t b = 0; b < batch.B; ++b) {
            const StateGraph& g = batch.samples[b]->graph;
            if (K_model > g.K) throw ContractError("truth assignments need as many graph states");
            std::size_t row = b * E;
            for (std::size_t i = 0; i < batch.N; ++i)
                for (std::size_t j = 0; j < batch.N; ++j) {
                    if (i == j) continue;
                    w.data()[row * n_e + g.at(k, i, j)] = T(1);
                    ++row;
                }
        }
        out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// model shape
// ---------------------------------------------------------------------------

struct ModelShape {
    std::string variant = "static";     // static | temporal
    std::string decoder = "learned";    // learned | fixed_linear
    Regime regime = Regime::observed_independent;
    std::size_t N = 0, T = 0, D = 0;
    std::size_t K_data = 1;  // states in the data (one-hot width)
    std::size_t K_model = 1; // states the posterior conditions on
    std::size_t n_edge_types = 2;
    std::size_t hidden = 256, dec_hidden = 256;
    double tau = 0.5, gamma = 0.1;
    bool normalization = true;
    bool states_in_input = true;
    // fixed-linear decoder options
    double alpha_init = 0.5;
    std::vector<double> beta_init; // defaults to zeros

    static ModelShape from_config(const ExperimentConfig& cfg) {
        ModelShape s;
        s.variant = cfg.model.variant;
        s.decoder = cfg.model.decoder;
        s.regime = cfg.regime;
        s.N = cfg.data.n_objects;
        s.T = cfg.data.n_frames;
        s.D = cfg.feature_dim();
        s.K_data = cfg.data.n_states;
        s.K_model = cfg.model_states();
        s.n_edge_types = cfg.data.n_edge_types;
        s.hidden = cfg.model.hidden;
        s.dec_hidden = cfg.model.decoder_hidden;
        s.tau = cfg.model.tau;
        s.gamma = cfg.model.gamma;
        s.normalization = cfg.model.normalization;
        s.states_in_input = cfg.states_in_input();
        if (cfg.model.fixed_init_truth) {
            s.alpha_init = cfg.data.alpha;
            s.beta_init.assign(cfg.data.beta.begin() + 1, cfg.data.beta.end());
        }
        s.validate();
        return s;
    }

    void validate() const {
        if (K_model != 1 && K_model != K_data)
            throw ContractError("model state count must be 1 (broadcast) or match the data");
        if (!(tau > 0) || !(gamma > 0)) throw ContractError("temperatures must be positive");
        if (T < 2) throw ContractError("model needs at least 2 frames");
        if (n_edge_types < 2) throw ContractError("model needs at least 2 edge types");
    }

    std::size_t frame_features() const { return D + (states_in_input ? K_data : 0); }
};

// ---------------------------------------------------------------------------
// encoders
// ---------------------------------------------------------------------------

// Node/edge message-passing stack shared by both encoder variants:
// node MLP -> pair MLP -> mean of incoming messages -> node MLP -> pair MLP
// (with the first pair embedding concatenated back in) -> linear head.
template <typename T>
class GnnStack {
public:
    GnnStack() = default;

    GnnStack(ParameterStore<T>& params, const std::string& prefix, std::size_t in,
             std::size_t hidden, std::size_t out, RngStream& rng, bool norm)
        : node1_(params, prefix + ".node1", in, hidden, hidden, rng, norm),
          edge1_(params, prefix + ".edge1", 2 * hidden, hidden, hidden, rng, norm),
          node2_(params, prefix + ".node2", hidden, hidden, hidden, rng, norm),
          edge2_(params, prefix + ".edge2", 3 * hidden, hidden, hidden, rng, norm),
          head_(params, prefix + ".head", hidden, out, rng) {}

    // x_obj: [B*N, in] -> logits [B*E, out]
    Tensor<T> operator()(const Tensor<T>& x_obj, const Batch<T>& batch) const {
        Tensor<T> h = pair_hidden(x_obj, batch);
        return head_(h);
    }

    // [B*E, hidden] features just before the head (temporal variant pools these)
    Tensor<T> pair_hidden(const Tensor<T>& x_obj, const Batch<T>& batch) const {
        Tensor<T> h1 = node1_(x_obj);
        Tensor<T> e1 = edge1_(concat_cols(gather_rows(h1, batch.src_rows),
                                          gather_rows(h1, batch.dst_rows)));
        Tensor<T> agg = scale(scatter_sum_rows(e1, batch.dst_rows, batch.rows()),
                              T(1) / static_cast<T>(batch.N - 1));
        Tensor<T> h2 = node2_(agg);
        Tensor<T> e2 = edge2_(concat_cols<T>({gather_rows(h2, batch.src_rows),
                                              gather_rows(h2, batch.dst_rows), e1}));
        return e2;
    }

    Tensor<T> head(const Tensor<T>& h) const { return head_(h); }

private:
    Mlp2<T> node1_, edge1_, node2_, edge2_;
    Linear<T> head_;
};

// Whole-sequence variant: each object's full trajectory is flattened into one
// feature vector before the message-passing stack.
template <typename T>
class StaticEncoder {
public:
    StaticEncoder() = default;

    StaticEncoder(ParameterStore<T>& params, const ModelShape& shape, RngStream& rng)
        : stack_(params, "encoder", shape.T * shape.frame_features(), shape.hidden,
                 shape.K_model * shape.n_edge_types, rng, shape.normalization) {}

    Tensor<T> operator()(const Batch<T>& batch) const {
        return stack_(batch.encoder_input, batch);
    }

private:
    GnnStack<T> stack_;
};

// Per-step variant: consecutive-frame pairs run through the shared stack, a
// two-layer temporal CNN plus max-pool-over-time summarizes each pair.
template <typename T>
class TemporalEncoder {
public:
    TemporalEncoder() = default;

    TemporalEncoder(ParameterStore<T>& params, const ModelShape& shape, RngStream& rng)
        : hidden_(shape.hidden) {
        stack_ = GnnStack<T>(params, "encoder.step", 2 * shape.frame_features(), shape.hidden,
                             shape.K_model * shape.n_edge_types, rng, shape.normalization);
        T limit = std::sqrt(T(6) / static_cast<T>(shape.hidden * 3 + shape.hidden));
        Tensor<T> k1({shape.hidden, shape.hidden, 3});
        for (auto& v : k1.data()) v = static_cast<T>(rng.uniform(-double(limit), double(limit)));
        conv1_ = params.add("encoder.conv1.weight", std::move(k1));
        conv1_bias_ = params.add("encoder.conv1.bias", Tensor<T>::zeros({shape.hidden}));
        Tensor<T> k2({shape.hidden, shape.hidden, 3});
        for (auto& v : k2.data()) v = static_cast<T>(rng.uniform(-double(limit), double(limit)));
        conv2_ = params.add("encoder.conv2.weight", std::move(k2));
        conv2_bias_ = params.add("encoder.conv2.bias", Tensor<T>::zeros({shape.hidden}));
    }

    Tensor<T> operator()(const Batch<T>& batch) const {
        std::vector<Tensor<T>> steps;
        steps.reserve(batch.T_frames - 1);
        for (std::size_t t = 0; t + 1 < batch.T_frames; ++t) {
            Tensor<T> x = concat_cols(frame_features(batch, t), frame_features(batch, t + 1));
            steps.push_back(stack_.pair_hidden(x, batch));
        }
        // [B*E, hidden, steps] -> CNN over the trailing (time) axis
        Tensor<T> seq = stack_last(steps);
        Tensor<T> c1 = elu(conv1d(seq, conv1_, conv1_bias_));
        Tensor<T> c2 = elu(conv1d(c1, conv2_, conv2_bias_));
        return stack_.head(maxpool_time(c2));
    }

private:
    static Tensor<T> frame_features(const Batch<T>& batch, std::size_t t) {
        if (batch.state_onehot.empty()) return batch.frames[t];
        return concat_cols(batch.frames[t], batch.state_onehot[t]);
    }

    GnnStack<T> stack_;
    Tensor<T> conv1_, conv1_bias_, conv2_, conv2_bias_;
    std::size_t hidden_ = 0;
};

// ---------------------------------------------------------------------------
// decoders
// ---------------------------------------------------------------------------

template <typename T>
struct DecoderStep {
    Tensor<T> next_p;       // [B*N, D]
    Tensor<T> state_logits; // [B*N, K] when a next-state head exists
};

// Per-edge-type message MLPs gated by the queried edge weights, receiver
// aggregation, residual update head, optional next-state head.
template <typename T>
class LearnedDecoder {
public:
    LearnedDecoder() = default;

    LearnedDecoder(ParameterStore<T>& params, const ModelShape& shape, RngStream& rng) {
        std::size_t F = shape.frame_features();
        std::size_t H = shape.dec_hidden;
        for (std::size_t e = 1; e < shape.n_edge_types; ++e)
            f_e_.emplace_back(params, "decoder.msg" + std::to_string(e), 2 * F, H, H, rng,
                              false);
        f_p_ = Mlp2<T>(params, "decoder.update", H + F, H, H, rng, false);
        f_p_out_ = Linear<T>(params, "decoder.update_out", H, shape.D, rng);
        if (shape.regime == Regime::observed_dependent) {
            f_s_ = Mlp2<T>(params, "decoder.next_state", H + F, H, H, rng, false);
            f_s_out_ = Linear<T>(params, "decoder.next_state_out", H, shape.K_data, rng);
            has_state_head_ = true;
        }
    }

    // features: [B*N, F]; p_cur: [B*N, D]; w_query: [B*E, n_e]
    DecoderStep<T> operator()(const Tensor<T>& features, const Tensor<T>& p_cur,
                              const Tensor<T>& w_query, const Batch<T>& batch) const {
        Tensor<T> pre = concat_cols(gather_rows(features, batch.src_rows),
                                    gather_rows(features, batch.dst_rows));
        Tensor<T> msgs;
        for (std::size_t e = 1; e < batch.n_edge_types; ++e) {
            Tensor<T> gate = slice_cols(w_query, e, e + 1);
            Tensor<T> m = rowwise_scale(f_e_[e - 1](pre), gate);
            msgs = msgs.defined() ? add(msgs, m) : m;
        }
        Tensor<T> agg = scatter_sum_rows(msgs, batch.dst_rows, batch.rows());
        Tensor<T> aug = concat_cols(agg, features);
        DecoderStep<T> out;
        out.next_p = add(p_cur, f_p_out_(f_p_(aug)));
        if (has_state_head_) out.state_logits = f_s_out_(f_s_(aug));
        return out;
    }

    bool has_state_head() const { return has_state_head_; }

private:
    std::vector<Mlp2<T>> f_e_;
    Mlp2<T> f_p_, f_s_;
    Linear<T> f_p_out_, f_s_out_;
    bool has_state_head_ = false;
};

// Mirrors the linear generator: p~_i = alpha p_i + sum_j beta_{type(j->i)} p_j
// with learnable alpha and beta (beta_0 pinned to zero by construction).
template <typename T>
class FixedLinearDecoder {
public:
    FixedLinearDecoder() = default;

    FixedLinearDecoder(ParameterStore<T>& params, const ModelShape& shape) {
        alpha_ = params.add("decoder.fixed.alpha",
                            Tensor<T>::scalar(static_cast<T>(shape.alpha_init)));
        Tensor<T> beta({shape.n_edge_types - 1});
        for (std::size_t e = 0; e + 1 < shape.n_edge_types; ++e)
            beta.data()[e] =
                e < shape.beta_init.size() ? static_cast<T>(shape.beta_init[e]) : T(0);
        beta_ = params.add("decoder.fixed.beta", std::move(beta));
    }

    DecoderStep<T> operator()(const Tensor<T>& p_cur, const Tensor<T>& w_query,
                              const Batch<T>& batch) const {
        Tensor<T> p_src = gather_rows(p_cur, batch.src_rows);
        Tensor<T> weighted;
        for (std::size_t e = 1; e < batch.n_edge_types; ++e) {
            Tensor<T> beta_e = slice_cols(beta_, e - 1, e); // [1,1] scalar view
            Tensor<T> part = scale_tensor(slice_cols(w_query, e, e + 1), beta_e);
            weighted = weighted.defined() ? add(weighted, part) : part;
        }
        // per-edge scalar weight times the source value, summed at the receiver
        Tensor<T> msg = rowwise_scale(p_src, weighted);
        Tensor<T> agg = scatter_sum_rows(msg, batch.dst_rows, batch.rows());
        DecoderStep<T> out;
        out.next_p = add(scale_tensor(p_cur, alpha_), agg);
        return out;
    }

    T alpha_value() const { return alpha_.data()[0]; }
    std::vector<T> beta_values() const {
        return {beta_.data().begin(), beta_.data().end()};
    }

private:
    Tensor<T> alpha_, beta_;
};

// ---------------------------------------------------------------------------
// full model
// ---------------------------------------------------------------------------

template <typename T>
struct ModelOutput {
    Tensor<T> edge_logits;               // [B*E, K_model * n_e]
    std::vector<Tensor<T>> assignments;  // per model state: [B*E, n_e]
    std::vector<Tensor<T>> preds;        // per transition: [B*N, D] prediction of frame t+1
    std::vector<Tensor<T>> state_logits; // per transition: [B*N, K_data] (observed-dependent)
    std::vector<Tensor<T>> hidden_dists; // per frame queried: [B*N, K_model] (hidden regime)
};

template <typename T>
class SdciModel {
public:
    SdciModel(const ModelShape& shape, std::uint64_t seed) : shape_(shape) {
        shape_.validate();
        RngStream rng = RngStream::derive(seed, "init");
        if (shape.variant == "temporal")
            temporal_ = TemporalEncoder<T>(params_, shape_, rng);
        else
            static_ = StaticEncoder<T>(params_, shape_, rng);
        if (shape.decoder == "fixed_linear")
            fixed_ = FixedLinearDecoder<T>(params_, shape_);
        else
            learned_ = LearnedDecoder<T>(params_, shape_, rng);
        if (shape.regime == Regime::hidden && shape_.K_model > 1) {
            std::size_t F = shape_.D; // hidden regime never sees states
            state_head_ = Mlp2<T>(params_, "decoder.state_head", F, shape_.dec_hidden,
                                  shape_.dec_hidden, rng, false);
            state_head_out_ =
                Linear<T>(params_, "decoder.state_head_out", shape_.dec_hidden, shape_.K_model, rng);
            has_hidden_head_ = true;
        }
    }

    ParameterStore<T>& params() { return params_; }
    const ModelShape& shape() const { return shape_; }

    // edge posterior logits phi: [B*E, K_model * n_e]
    Tensor<T> encode(const Batch<T>& batch) const {
        if (batch.T_frames != shape_.T)
            throw ContractError("batch frame count does not match the model");
        return shape_.variant == "temporal" ? temporal_(batch) : static_(batch);
    }

    // log q(z | k, x) rows: [B*E*K, n_e] at temperature tau
    Tensor<T> posterior_log_probs(const Tensor<T>& logits) const {
        std::size_t rows = logits.rows() * shape_.K_model;
        Tensor<T> flat = reshape_copy(logits, {rows, shape_.n_edge_types});
        return log_softmax_rows(flat, static_cast<T>(shape_.tau));
    }

    // one Gumbel-softmax draw per (pair, state), reused across all frames
    std::vector<Tensor<T>> sample_assignments(const Tensor<T>& logits, RngStream& rng,
                                              bool hard) const {
        Tensor<T> logp = posterior_log_probs(logits);
        Tensor<T> noise = gumbel_noise<T>(logp.shape(), rng);
        return assignments_from_noise(logits, noise, hard);
    }

    // deterministic variant used by tests (frozen noise) and shared plumbing
    std::vector<Tensor<T>> assignments_from_noise(const Tensor<T>& logits, const Tensor<T>& noise,
                                                  bool hard) const {
        Tensor<T> logp = posterior_log_probs(logits);
        Tensor<T> soft = softmax_rows(add(logp, noise), static_cast<T>(shape_.tau));
        Tensor<T> w_all = hard ? straight_through_onehot(soft) : soft;
        return split_states(w_all, logits.rows());
    }

    // evaluation: argmax of the posterior, no sampling
    std::vector<Tensor<T>> assignments_from_argmax(const Tensor<T>& logits) const {
        std::size_t rows = logits.rows() * shape_.K_model;
        Tensor<T> flat = reshape_copy(logits, {rows, shape_.n_edge_types});
        std::vector<std::size_t> arg = argmax_rows(flat);
        Tensor<T> hard({rows, shape_.n_edge_types});
        for (std::size_t r = 0; r < rows; ++r) hard.data()[r * shape_.n_edge_types + arg[r]] = T(1);
        return split_states(hard, logits.rows());
    }

    // teacher-forced rollout over all T-1 transitions
    void rollout(const Batch<T>& batch, const std::vector<Tensor<T>>& assignments,
                 std::size_t tf_period, ModelOutput<T>& out) const {
        if (tf_period < 1) throw ContractError("teacher forcing period must be >= 1");
        Tensor<T> cur_p = batch.frames[0];
        Tensor<T> cur_state = initial_state_dist(batch);
        for (std::size_t t = 0; t + 1 < batch.T_frames; ++t) {
            if (t % tf_period == 0) {
                cur_p = batch.frames[t];
                if (batch.regime != Regime::hidden) cur_state = batch.state_onehot[t];
            } else if (batch.regime == Regime::observed_independent) {
                cur_state = batch.state_onehot[t]; // exogenous states are always known
            }
            Tensor<T> query = query_dist(cur_p, cur_state, batch, out);
            Tensor<T> w_query = marginal_assignment(assignments, query, batch);
            DecoderStep<T> step;
            if (shape_.decoder == "fixed_linear")
                step = fixed_(cur_p, w_query, batch);
            else
                step = learned_(make_features(cur_p, cur_state, batch), cur_p, w_query, batch);
            out.preds.push_back(step.next_p);
            cur_p = step.next_p;
            if (step.state_logits.defined()) {
                out.state_logits.push_back(step.state_logits);
                cur_state = softmax_rows(step.state_logits, T(1));
            }
        }
    }

    // encode -> sample -> rollout (the training forward pass)
    ModelOutput<T> forward(const Batch<T>& batch, RngStream& rng, bool hard,
                           std::size_t tf_period) const {
        ModelOutput<T> out;
        out.edge_logits = encode(batch);
        out.assignments = sample_assignments(out.edge_logits, rng, hard);
        rollout(batch, out.assignments, tf_period, out);
        return out;
    }

    // per-object state distribution in the hidden regime: softmax(f_s'(x)/gamma)
    Tensor<T> infer_hidden_states(const Tensor<T>& features) const {
        if (!has_hidden_head_) throw ContractError("model has no hidden-state head");
        return softmax_rows(state_head_out_(state_head_(features)),
                            static_cast<T>(shape_.gamma));
    }

    const FixedLinearDecoder<T>& fixed_decoder() const {
        if (shape_.decoder != "fixed_linear")
            throw ContractError("model uses a learned decoder; no world parameters to read");
        return fixed_;
    }

    bool has_hidden_head() const { return has_hidden_head_; }

    // z^t for every pair: sum_k w_k * (source object's probability of state k)
    Tensor<T> marginal_assignment(const std::vector<Tensor<T>>& assignments,
                                  const Tensor<T>& query, const Batch<T>& batch) const {
        Tensor<T> q_src = gather_rows(query, batch.src_rows); // [B*E, K]
        Tensor<T> result;
        for (std::size_t k = 0; k < shape_.K_model; ++k) {
            Tensor<T> part = rowwise_scale(assignments[k], slice_cols(q_src, k, k + 1));
            result = result.defined() ? add(result, part) : part;
        }
        return result;
    }

private:
    std::vector<Tensor<T>> split_states(const Tensor<T>& w_all, std::size_t n_pairs) const {
        std::vector<Tensor<T>> per_state;
        per_state.reserve(shape_.K_model);
        for (std::size_t k = 0; k < shape_.K_model; ++k) {
            std::vector<std::size_t> idx(n_pairs);
            for (std::size_t r = 0; r < n_pairs; ++r) idx[r] = r * shape_.K_model + k;
            per_state.push_back(gather_rows(w_all, idx));
        }
        return per_state;
    }

    Tensor<T> make_features(const Tensor<T>& p, const Tensor<T>& state_dist,
                            const Batch<T>& batch) const {
        if (batch.regime == Regime::hidden) return p;
        return concat_cols(p, state_dist);
    }

    Tensor<T> initial_state_dist(const Batch<T>& batch) const {
        if (batch.regime == Regime::hidden) return Tensor<T>();
        return batch.state_onehot[0];
    }

    // per-object distribution over the model's states used for the edge query
    Tensor<T> query_dist(const Tensor<T>& p, const Tensor<T>& state_dist, const Batch<T>& batch,
                         ModelOutput<T>& out) const {
        if (shape_.K_model == 1) return Tensor<T>::ones({batch.rows(), 1});
        if (batch.regime == Regime::hidden) {
            Tensor<T> dist = infer_hidden_states(p);
            out.hidden_dists.push_back(dist);
            return dist;
        }
        return state_dist; // one-hot truth or the decoder's own soft prediction
    }

    ModelShape shape_;
    ParameterStore<T> params_;
    StaticEncoder<T> static_;
    TemporalEncoder<T> temporal_;
    LearnedDecoder<T> learned_;
    FixedLinearDecoder<T> fixed_;
    Mlp2<T> state_head_;
    Linear<T> state_head_out_;
    bool has_hidden_head_ = false;
};

} // namespace sdci
