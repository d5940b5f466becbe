#include "jop/neural.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "jop/errors.hpp"
#include "jop/rng.hpp"

namespace jop::neural {

using ad::Binding;
using ad::ParamSet;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string kind_name(Kind k) {
    switch (k) {
    case Kind::mlp: return "mlp";
    case Kind::rnn: return "rnn";
    case Kind::lstm: return "lstm";
    case Kind::gru: return "gru";
    case Kind::han: return "han";
    }
    return "mlp";
}

Kind kind_from(const std::string& name) {
    if (name == "mlp") return Kind::mlp;
    if (name == "rnn") return Kind::rnn;
    if (name == "lstm") return Kind::lstm;
    if (name == "gru") return Kind::gru;
    if (name == "han") return Kind::han;
    throw Error("unknown neural model kind: " + name);
}

double scheduled_lr(const TrainConfig& cfg, int epoch) {
    const int steps = (epoch - 1) / cfg.lr_decay_every;
    return cfg.initial_lr * std::pow(cfg.lr_decay_factor, steps);
}

bool ConvergenceController::observe(double loss) {
    ++epoch_;
    if (best_loss_ - loss >= min_delta_) {
        best_loss_ = loss;
        best_epoch_ = epoch_;
        stale_ = 0;
        last_was_best_ = true;
    } else {
        ++stale_;
        last_was_best_ = false;
    }
    return stale_ >= patience_;
}

// ---- initialization -----------------------------------------------------------

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    void weight(ParamSet& ps, const std::string& name, std::size_t rows,
                std::size_t cols) {
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Tensor t(Shape{rows, cols});
        for (auto& v : t.vec()) v = rng_.next_double(-limit, limit);
        ps.add(name, std::move(t));
    }

    // Context vectors draw from the same scheme with fan-out 1.
    void context(ParamSet& ps, const std::string& name, std::size_t n) {
        const double limit = std::sqrt(6.0 / static_cast<double>(n + 1));
        Tensor t(Shape{n});
        for (auto& v : t.vec()) v = rng_.next_double(-limit, limit);
        ps.add(name, std::move(t));
    }

    void bias(ParamSet& ps, const std::string& name, std::size_t n) {
        ps.add(name, Tensor(Shape{n}));
    }

    void gru_cell(ParamSet& ps, const std::string& prefix, std::size_t input,
                  std::size_t hidden) {
        for (const char* gate : {".z", ".r", ".h"}) {
            weight(ps, prefix + gate + ".wx", hidden, input);
            weight(ps, prefix + gate + ".wh", hidden, hidden);
            bias(ps, prefix + gate + ".b", hidden);
        }
    }

    void lstm_cell(ParamSet& ps, const std::string& prefix, std::size_t input,
                   std::size_t hidden) {
        for (const char* gate : {".i", ".f", ".o", ".g"}) {
            weight(ps, prefix + gate + ".wx", hidden, input);
            weight(ps, prefix + gate + ".wh", hidden, hidden);
            bias(ps, prefix + gate + ".b", hidden);
        }
    }

private:
    SplitMix64 rng_;
};

} // namespace

NeuralModel init_model(Kind kind, const NetConfig& net, std::uint64_t seed) {
    NeuralModel model;
    model.kind = kind;
    model.net = net;
    Initializer init(seed);
    ParamSet& ps = model.params;
    const std::size_t E = net.embedding_dim;
    const std::size_t H = net.hidden;
    const std::size_t D = 2 * H;  // bidirectional annotation width
    const std::size_t A = net.attention_dim;

    switch (kind) {
    case Kind::mlp:
        init.weight(ps, "dense.w", H, E);
        init.bias(ps, "dense.b", H);
        init.weight(ps, "out.w", 2, H);
        init.bias(ps, "out.b", 2);
        break;
    case Kind::rnn:
        init.weight(ps, "cell.wx", H, E);
        init.weight(ps, "cell.wh", H, H);
        init.bias(ps, "cell.b", H);
        init.weight(ps, "out.w", 2, H);
        init.bias(ps, "out.b", 2);
        break;
    case Kind::lstm:
        init.lstm_cell(ps, "cell", E, H);
        init.weight(ps, "out.w", 2, H);
        init.bias(ps, "out.b", 2);
        break;
    case Kind::gru:
        init.gru_cell(ps, "cell", E, H);
        init.weight(ps, "out.w", 2, H);
        init.bias(ps, "out.b", 2);
        break;
    case Kind::han:
        init.gru_cell(ps, "word.fwd", E, H);
        init.gru_cell(ps, "word.bwd", E, H);
        init.weight(ps, "word.dense.w", D, D);
        init.bias(ps, "word.dense.b", D);
        init.weight(ps, "word.attn.w", D, A);
        init.bias(ps, "word.attn.b", A);
        init.context(ps, "word.attn.u", A);
        init.gru_cell(ps, "sent.fwd", D, H);
        init.gru_cell(ps, "sent.bwd", D, H);
        init.weight(ps, "sent.dense.w", D, D);
        init.bias(ps, "sent.dense.b", D);
        init.weight(ps, "sent.attn.w", D, A);
        init.bias(ps, "sent.attn.b", A);
        init.context(ps, "sent.attn.u", A);
        init.weight(ps, "out.w", 2, D);
        init.bias(ps, "out.b", 2);
        break;
    }
    return model;
}

// ---- example preparation ---------------------------------------------------------

Example make_example(const corpus::LabeledDocument& doc, const text::Vocabulary& vocab,
                     const features::EmbeddingTable& table,
                     const text::Preprocessor& preproc, std::size_t m_cap,
                     std::size_t n_cap) {
    Example ex;
    ex.label = doc.label;

    auto tokens = preproc.flat_tokens(doc.text);
    ex.seq_indices.reserve(tokens.size());
    for (const auto& tok : tokens) ex.seq_indices.push_back(vocab.index_of(tok));
    if (ex.seq_indices.empty()) ex.seq_indices.push_back(text::Vocabulary::kPadIndex);
    ex.sequence = features::embed_sequence(table, ex.seq_indices, vocab);

    auto hd = text::to_hierarchical(doc, vocab, m_cap, n_cap, preproc);
    if (std::none_of(hd.sentence_mask.begin(), hd.sentence_mask.end(),
                     [](std::uint8_t m) { return m != 0; })) {
        // Degenerate document: keep one zero-embedding token scoreable.
        hd.word_mask[0] = 1;
        hd.sentence_mask[0] = 1;
    }
    ex.grid = features::embed_grid(table, hd, vocab);
    ex.word_mask = hd.word_mask;
    ex.sentence_mask = hd.sentence_mask;
    ex.m_cap = hd.m_cap;
    ex.n_cap = hd.n_cap;
    ex.grid_indices = hd.grid;
    return ex;
}

// ---- cells and encoders ------------------------------------------------------------

GruCellVars GruCellVars::fetch(const Binding& bind, const std::string& prefix) {
    return GruCellVars{bind[prefix + ".z.wx"], bind[prefix + ".z.wh"],
                       bind[prefix + ".z.b"],  bind[prefix + ".r.wx"],
                       bind[prefix + ".r.wh"], bind[prefix + ".r.b"],
                       bind[prefix + ".h.wx"], bind[prefix + ".h.wh"],
                       bind[prefix + ".h.b"]};
}

LstmCellVars LstmCellVars::fetch(const Binding& bind, const std::string& prefix) {
    return LstmCellVars{bind[prefix + ".i.wx"], bind[prefix + ".i.wh"],
                        bind[prefix + ".i.b"],  bind[prefix + ".f.wx"],
                        bind[prefix + ".f.wh"], bind[prefix + ".f.b"],
                        bind[prefix + ".o.wx"], bind[prefix + ".o.wh"],
                        bind[prefix + ".o.b"],  bind[prefix + ".g.wx"],
                        bind[prefix + ".g.wh"], bind[prefix + ".g.b"]};
}

Var gru_step(const GruCellVars& cell, Var x, Var h_prev) {
    using namespace ad;
    Var z = sigmoid(add(add(matmul(cell.wz_x, x), matmul(cell.wz_h, h_prev)), cell.bz));
    Var r = sigmoid(add(add(matmul(cell.wr_x, x), matmul(cell.wr_h, h_prev)), cell.br));
    Var hc = tanh(
        add(add(matmul(cell.wh_x, x), matmul(cell.wh_h, mul(r, h_prev))), cell.bh));
    return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, hc));
}

LstmState lstm_step(const LstmCellVars& cell, Var x, LstmState prev) {
    using namespace ad;
    Var i = sigmoid(add(add(matmul(cell.wi_x, x), matmul(cell.wi_h, prev.h)), cell.bi));
    Var f = sigmoid(add(add(matmul(cell.wf_x, x), matmul(cell.wf_h, prev.h)), cell.bf));
    Var o = sigmoid(add(add(matmul(cell.wo_x, x), matmul(cell.wo_h, prev.h)), cell.bo));
    Var g = tanh(add(add(matmul(cell.wg_x, x), matmul(cell.wg_h, prev.h)), cell.bg));
    Var c = add(mul(f, prev.c), mul(i, g));
    Var h = mul(o, tanh(c));
    return {h, c};
}

std::vector<Var> bidirectional_encode(Tape& tape, const GruCellVars& fwd,
                                      const GruCellVars& bwd,
                                      const std::vector<Var>& sequence,
                                      const std::vector<std::uint8_t>& mask,
                                      std::size_t hidden) {
    if (sequence.empty() || mask.size() != sequence.size())
        throw ShapeError("bidirectional_encode: bad sequence/mask");
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
        throw AllMaskedError("bidirectional_encode: every position is masked");

    const std::size_t T = sequence.size();
    Var zero_h = tape.leaf(Tensor(Shape{hidden}));
    Var zero_ann = tape.leaf(Tensor(Shape{2 * hidden}));

    std::vector<Var> fwd_states(T, zero_h);
    Var h = zero_h;
    for (std::size_t t = 0; t < T; ++t) {
        if (!mask[t]) continue;  // padding neither advances nor emits
        h = gru_step(fwd, sequence[t], h);
        fwd_states[t] = h;
    }
    std::vector<Var> bwd_states(T, zero_h);
    h = zero_h;
    for (std::size_t t = T; t-- > 0;) {
        if (!mask[t]) continue;
        h = gru_step(bwd, sequence[t], h);
        bwd_states[t] = h;
    }

    std::vector<Var> annotations(T, zero_ann);
    for (std::size_t t = 0; t < T; ++t)
        if (mask[t]) annotations[t] = ad::concat(fwd_states[t], bwd_states[t]);
    return annotations;
}

AttentionOut attention(Var annotations, const std::vector<std::uint8_t>& mask, Var w,
                       Var b, Var u) {
    using namespace ad;
    Var projected = tanh(add_rowvec(matmul(annotations, w), b));
    Var scores = matmul(projected, u);
    Var alpha = masked_softmax(scores, mask);
    Var summary = matmul(alpha, annotations);
    return {scores, alpha, summary};
}

// ---- forward ------------------------------------------------------------------------

namespace {

Tensor tensor_row(const Tensor& m, std::size_t i) {
    const std::size_t d = m.dim(1);
    Tensor out(Shape{d});
    std::copy(m.data() + i * d, m.data() + (i + 1) * d, out.data());
    return out;
}

Tensor tensor_cell(const Tensor& grid, std::size_t t, std::size_t i) {
    const std::size_t d = grid.dim(2);
    Tensor out(Shape{d});
    const double* src = grid.data() + (t * grid.dim(1) + i) * d;
    std::copy(src, src + d, out.data());
    return out;
}

// Inputs for the flat models; the fine-tuning path routes lookups through
// the trainable table so embeddings receive gradients.
std::vector<Var> sequence_inputs(Tape& tape, const Binding& bind,
                                 const NeuralModel& model, const Example& ex) {
    const std::size_t T = ex.sequence.dim(0);
    std::vector<Var> xs;
    xs.reserve(T);
    if (model.owns_embeddings) {
        Var table = bind["embedding.table"];
        for (std::size_t t = 0; t < T; ++t)
            xs.push_back(ad::gather_row(table, static_cast<std::size_t>(ex.seq_indices[t])));
    } else {
        for (std::size_t t = 0; t < T; ++t)
            xs.push_back(tape.leaf(tensor_row(ex.sequence, t)));
    }
    return xs;
}

Var output_logits(const Binding& bind, Var features) {
    return ad::add(ad::matmul(bind["out.w"], features), bind["out.b"]);
}

Var han_logits(Tape& tape, const Binding& bind, const NeuralModel& model,
               const Example& ex, HanTrace* trace) {
    using namespace ad;
    const std::size_t H = model.net.hidden;
    const std::size_t D = 2 * H;
    const std::size_t M = ex.m_cap, N = ex.n_cap;

    if (std::none_of(ex.sentence_mask.begin(), ex.sentence_mask.end(),
                     [](std::uint8_t m) { return m != 0; }))
        throw AllMaskedError("hierarchical forward: document has no unmasked sentence");

    const auto word_fwd = GruCellVars::fetch(bind, "word.fwd");
    const auto word_bwd = GruCellVars::fetch(bind, "word.bwd");
    const auto sent_fwd = GruCellVars::fetch(bind, "sent.fwd");
    const auto sent_bwd = GruCellVars::fetch(bind, "sent.bwd");

    if (trace) {
        trace->word_annotations.assign(
            M, std::vector<std::vector<double>>(N, std::vector<double>(D, 0.0)));
        trace->word_scores.assign(M, std::vector<double>(N, 0.0));
        trace->word_weights.assign(M, std::vector<double>(N, 0.0));
        trace->sentence_vectors.assign(M, std::vector<double>(D, 0.0));
        trace->sentence_annotations.assign(M, std::vector<double>(D, 0.0));
        trace->sentence_weights.assign(M, 0.0);
    }

    Var table{};
    if (model.owns_embeddings) table = bind["embedding.table"];
    Var zero_sent = tape.leaf(Tensor(Shape{D}));
    Var zero_word = tape.leaf(Tensor(Shape{model.net.embedding_dim}));
    std::vector<Var> sentence_vectors(M, zero_sent);
    for (std::size_t t = 0; t < M; ++t) {
        if (!ex.sentence_mask[t]) continue;
        std::vector<std::uint8_t> wmask(ex.word_mask.begin() + static_cast<long>(t * N),
                                        ex.word_mask.begin() + static_cast<long>((t + 1) * N));
        std::vector<Var> words;
        words.reserve(N);
        for (std::size_t i = 0; i < N; ++i) {
            if (!wmask[i]) {
                words.push_back(zero_word);  // skipped by the encoder
                continue;
            }
            if (model.owns_embeddings)
                words.push_back(gather_row(
                    table, static_cast<std::size_t>(ex.grid_indices[t * N + i])));
            else
                words.push_back(tape.leaf(tensor_cell(ex.grid, t, i)));
        }
        auto annotations = bidirectional_encode(tape, word_fwd, word_bwd, words, wmask, H);
        Var stacked = stack(annotations);
        Var dense = relu(add_rowvec(matmul(stacked, bind["word.dense.w"]),
                                    bind["word.dense.b"]));
        auto attn = attention(dense, wmask, bind["word.attn.w"], bind["word.attn.b"],
                              bind["word.attn.u"]);
        sentence_vectors[t] = attn.summary;
        if (trace) {
            for (std::size_t i = 0; i < N; ++i) {
                trace->word_weights[t][i] = attn.weights.value()[i];
                if (!wmask[i]) continue;
                trace->word_scores[t][i] = attn.scores.value()[i];
                for (std::size_t d = 0; d < D; ++d)
                    trace->word_annotations[t][i][d] = dense.value()(i, d);
            }
            trace->sentence_vectors[t] = attn.summary.value().vec();
        }
    }

    auto sent_annotations = bidirectional_encode(tape, sent_fwd, sent_bwd,
                                                 sentence_vectors, ex.sentence_mask, H);
    Var sent_stacked = stack(sent_annotations);
    Var sent_dense = relu(add_rowvec(matmul(sent_stacked, bind["sent.dense.w"]),
                                     bind["sent.dense.b"]));
    auto sent_attn = attention(sent_dense, ex.sentence_mask, bind["sent.attn.w"],
                               bind["sent.attn.b"], bind["sent.attn.u"]);

    Var logits = add(matmul(bind["out.w"], sent_attn.summary), bind["out.b"]);
    if (trace) {
        for (std::size_t t = 0; t < M; ++t) {
            trace->sentence_weights[t] = sent_attn.weights.value()[t];
            if (!ex.sentence_mask[t]) continue;
            for (std::size_t d = 0; d < D; ++d)
                trace->sentence_annotations[t][d] = sent_dense.value()(t, d);
        }
        trace->document_vector = sent_attn.summary.value().vec();
        Var probs = softmax(logits);
        trace->prob_pos = probs.value()[0];
        trace->prob_neg = probs.value()[1];
    }
    return logits;
}

} // namespace

Var build_logits(Tape& tape, const Binding& bind, const NeuralModel& model,
                 const Example& ex, HanTrace* trace) {
    using namespace ad;
    switch (model.kind) {
    case Kind::mlp: {
        auto xs = sequence_inputs(tape, bind, model, ex);
        Var stacked = stack(xs);
        Var ones = tape.leaf(Tensor(Shape{xs.size()}, 1.0));
        Var mean = affine(matmul(ones, stacked), 1.0 / static_cast<double>(xs.size()), 0.0);
        Var hidden = relu(add(matmul(bind["dense.w"], mean), bind["dense.b"]));
        return output_logits(bind, hidden);
    }
    case Kind::rnn: {
        auto xs = sequence_inputs(tape, bind, model, ex);
        Var h = tape.leaf(Tensor(Shape{model.net.hidden}));
        for (Var x : xs)
            h = tanh(add(add(matmul(bind["cell.wx"], x), matmul(bind["cell.wh"], h)),
                         bind["cell.b"]));
        return output_logits(bind, h);
    }
    case Kind::lstm: {
        auto xs = sequence_inputs(tape, bind, model, ex);
        const auto cell = LstmCellVars::fetch(bind, "cell");
        LstmState state{tape.leaf(Tensor(Shape{model.net.hidden})),
                        tape.leaf(Tensor(Shape{model.net.hidden}))};
        for (Var x : xs) state = lstm_step(cell, x, state);
        return output_logits(bind, state.h);
    }
    case Kind::gru: {
        auto xs = sequence_inputs(tape, bind, model, ex);
        const auto cell = GruCellVars::fetch(bind, "cell");
        Var h = tape.leaf(Tensor(Shape{model.net.hidden}));
        for (Var x : xs) h = gru_step(cell, x, h);
        return output_logits(bind, h);
    }
    case Kind::han:
        return han_logits(tape, bind, model, ex, trace);
    }
    throw Error("unreachable model kind");
}

Var build_forward(Tape& tape, const Binding& bind, const NeuralModel& model,
                  const Example& ex, HanTrace* trace) {
    return ad::pick(ad::softmax(build_logits(tape, bind, model, ex, trace)), 0);
}

double predict_proba(const NeuralModel& model, const Example& ex) {
    Tape tape;
    Binding bind(tape, model.params, /*trainable=*/false);
    return build_forward(tape, bind, model, ex).value().item();
}

HanTrace han_forward(const NeuralModel& model, const Example& ex) {
    if (model.kind != Kind::han)
        throw NotAttentionModelError("attention traces require the hierarchical model");
    HanTrace trace;
    Tape tape;
    Binding bind(tape, model.params, /*trainable=*/false);
    build_forward(tape, bind, model, ex, &trace);
    return trace;
}

// ---- training --------------------------------------------------------------------

TrainResult train(Kind kind, const std::vector<Example>& examples, NetConfig net,
                  const TrainConfig& cfg,
                  const features::EmbeddingTable* table_for_finetune,
                  const text::Vocabulary* vocab_for_finetune) {
    if (examples.empty()) throw EmptyDatasetError("no training examples");
    {
        std::size_t pos = 0, neg = 0;
        for (const auto& ex : examples) (ex.label == 1 ? pos : neg)++;
        if (pos == 0 || neg == 0)
            throw SingleClassError("training set must contain both classes");
    }

    NeuralModel model = init_model(kind, net, cfg.seed);
    if (cfg.finetune_embeddings) {
        if (!table_for_finetune || !vocab_for_finetune)
            throw Error("fine-tuning requires the embedding table and vocabulary");
        const std::size_t V = vocab_for_finetune->size();
        Tensor table(Shape{V, net.embedding_dim});
        for (std::size_t idx = 2; idx < V; ++idx)
            table_for_finetune->copy_to(
                vocab_for_finetune->token_at(static_cast<int>(idx)),
                table.data() + idx * net.embedding_dim);
        model.params.add("embedding.table", std::move(table));
        model.owns_embeddings = true;
    }

    ParamSet grads, momentum;
    for (const auto& [name, t] : model.params) {
        grads.add(name, Tensor(t.shape()));
        momentum.add(name, Tensor(t.shape()));
    }

    SplitMix64 shuffle_rng(mix_seed(cfg.seed, 0x5A17));
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    ConvergenceController controller(cfg);
    TrainingLog log;
    std::vector<std::pair<std::string, Tensor>> best;
    auto snapshot = [&]() {
        best.clear();
        for (const auto& [name, t] : model.params) best.emplace_back(name, t);
    };
    snapshot();

    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const double lr = scheduled_lr(cfg, epoch);
        shuffle_rng.shuffle(order);

        double total_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(order.size(), begin + batch);
            for (auto& [name, g] : grads) g.fill(0.0);
            for (std::size_t i = begin; i < end; ++i) {
                const Example& ex = examples[order[i]];
                Tape tape;
                Binding bind(tape, model.params);
                Var logits = build_logits(tape, bind, model, ex);
                // Cross-entropy straight from the logits: same value as
                // bce(softmax(..)[0]) but with no clamped dead zone.
                Var loss = ad::affine(
                    ad::pick(ad::log_softmax(logits), ex.label == 1 ? 0 : 1), -1.0, 0.0);
                tape.backward(loss);
                bind.harvest(grads);
                total_loss += loss.value().item();
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            auto g_it = grads.begin();
            auto m_it = momentum.begin();
            for (auto& [name, p] : model.params) {
                Tensor& g = g_it->second;
                Tensor& v = m_it->second;
                for (std::size_t j = 0; j < p.size(); ++j) {
                    v[j] = cfg.momentum * v[j] + g[j] * inv;
                    p[j] -= lr * v[j];
                }
                ++g_it;
                ++m_it;
            }
        }

        const double mean_loss = total_loss / static_cast<double>(examples.size());
        if (!std::isfinite(mean_loss))
            throw DivergenceError("training loss is not finite at epoch " +
                                  std::to_string(epoch));
        log.epoch_loss.push_back(mean_loss);
        log.epoch_lr.push_back(lr);
        log.epoch_wall_sec.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count());

        const bool stop = controller.observe(mean_loss);
        if (controller.last_was_best()) snapshot();
        if (stop) {
            log.stop_reason = StopReason::early_stop;
            break;
        }
    }
    log.best_epoch = controller.best_epoch();

    // Restore the best epoch's parameters.
    for (const auto& [name, t] : best) model.params.at(name) = t;
    return {std::move(model), std::move(log)};
}

} // namespace jop::neural
