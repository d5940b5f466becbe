#ifndef JOP_NEURAL_HPP
#define JOP_NEURAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "jop/autodiff.hpp"
#include "jop/features.hpp"
#include "jop/textproc.hpp"

namespace jop::neural {

enum class Kind { mlp, rnn, lstm, gru, han };

std::string kind_name(Kind k);
Kind kind_from(const std::string& name);

// Architecture sizes. Recurrent hidden sizes are per direction; the
// dense layers between encoder and attention preserve the annotation
// width (2 * hidden), and attention_dim is the scoring projection.
struct NetConfig {
    std::size_t embedding_dim = 600;
    std::size_t hidden = 50;
    std::size_t attention_dim = 100;
    std::size_t m_cap = 1;  // sentences per document (han)
    std::size_t n_cap = 1;  // words per sentence (han)
};

struct TrainConfig {
    double initial_lr = 0.05;
    double lr_decay_factor = 0.2;
    int lr_decay_every = 3;          // epochs per decay step
    double early_stop_min_delta = 0.001;
    int early_stop_patience = 5;     // epochs
    int max_epochs = 30;
    std::size_t batch_size = 16;
    double momentum = 0.9;
    std::uint64_t seed = 42;
    bool finetune_embeddings = false;
};

// lr(epoch) = initial_lr * decay_factor^floor((epoch - 1) / decay_every),
// epochs counted from 1.
double scheduled_lr(const TrainConfig& cfg, int epoch);

// Min-delta / patience early stopping with best-epoch tracking: an epoch
// becomes the new best only when it improves the best loss by at least
// min_delta; training stops after `patience` consecutive non-improving
// epochs. Drivable with injected loss sequences.
class ConvergenceController {
public:
    explicit ConvergenceController(const TrainConfig& cfg)
        : min_delta_(cfg.early_stop_min_delta), patience_(cfg.early_stop_patience) {}

    // Feed the loss of the next epoch; returns true when training should
    // stop after this epoch.
    bool observe(double loss);

    bool last_was_best() const { return last_was_best_; }
    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    double min_delta_;
    int patience_;
    double best_loss_ = std::numeric_limits<double>::infinity();
    int best_epoch_ = 0;
    int epoch_ = 0;
    int stale_ = 0;
    bool last_was_best_ = false;
};

enum class StopReason { early_stop, max_epochs };

struct TrainingLog {
    std::vector<double> epoch_loss;      // index 0 is epoch 1
    std::vector<double> epoch_lr;
    std::vector<double> epoch_wall_sec;  // reported to stderr, never serialized
    StopReason stop_reason = StopReason::max_epochs;
    int best_epoch = 0;
};

struct NeuralModel {
    Kind kind = Kind::mlp;
    NetConfig net;
    ad::ParamSet params;
    // True when params carries "embedding.table" (fine-tuned embeddings,
    // rows aligned with vocabulary indices).
    bool owns_embeddings = false;
};

// Glorot-uniform weights, zero biases, everything drawn from `seed` in a
// fixed parameter order.
NeuralModel init_model(Kind kind, const NetConfig& net, std::uint64_t seed);

// One document as the networks consume it. Flat models read `sequence`
// (real tokens only, no padding); the hierarchical model reads `grid`
// plus masks. Index vectors back the fine-tuning path.
struct Example {
    ad::Tensor sequence;                  // [T, E]
    std::vector<int> seq_indices;         // T vocabulary indices
    ad::Tensor grid;                      // [m_cap, n_cap, E]
    std::vector<std::uint8_t> word_mask;  // m_cap * n_cap
    std::vector<std::uint8_t> sentence_mask;
    std::size_t m_cap = 0, n_cap = 0;
    std::vector<int> grid_indices;        // m_cap * n_cap vocabulary indices
    int label = 0;                        // +1 / -1
};

// Builds an Example from a preprocessed document. Documents that are
// empty after preprocessing degrade to a single zero-embedding token so
// they can still be scored.
Example make_example(const corpus::LabeledDocument& doc, const text::Vocabulary& vocab,
                     const features::EmbeddingTable& table,
                     const text::Preprocessor& preproc, std::size_t m_cap,
                     std::size_t n_cap);

// ---- graph-level building blocks ----------------------------------------------

struct GruCellVars {
    ad::Var wz_x, wz_h, bz;  // update gate
    ad::Var wr_x, wr_h, br;  // reset gate
    ad::Var wh_x, wh_h, bh;  // candidate
    static GruCellVars fetch(const ad::Binding& bind, const std::string& prefix);
};

struct LstmCellVars {
    ad::Var wi_x, wi_h, bi;
    ad::Var wf_x, wf_h, bf;
    ad::Var wo_x, wo_h, bo;
    ad::Var wg_x, wg_h, bg;
    static LstmCellVars fetch(const ad::Binding& bind, const std::string& prefix);
};

// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
// hc = tanh(Wh x + Uh (r . h) + bh), h' = (1 - z) . h + z . hc
ad::Var gru_step(const GruCellVars& cell, ad::Var x, ad::Var h_prev);

struct LstmState {
    ad::Var h, c;
};
LstmState lstm_step(const LstmCellVars& cell, ad::Var x, LstmState prev);

// Concatenated forward/backward states per position. Masked positions
// yield zero annotations and do not advance either direction. Throws
// AllMaskedError when nothing is unmasked.
std::vector<ad::Var> bidirectional_encode(ad::Tape& tape, const GruCellVars& fwd,
                                          const GruCellVars& bwd,
                                          const std::vector<ad::Var>& sequence,
                                          const std::vector<std::uint8_t>& mask,
                                          std::size_t hidden);

struct AttentionOut {
    ad::Var scores;   // pre-softmax relevance per position
    ad::Var weights;  // masked softmax over positions
    ad::Var summary;  // weighted sum of the annotation rows
};

// annotations is [T, D]; u_t = tanh(W h_t + b), a = masked_softmax(u_t . u),
// s = sum_t a_t h_t.
AttentionOut attention(ad::Var annotations, const std::vector<std::uint8_t>& mask,
                       ad::Var w, ad::Var b, ad::Var u);

// ---- whole-model forward --------------------------------------------------------

// Every intermediate stage of one hierarchical forward pass; padded
// positions hold exact zeros. Annotations are the rows each attention
// layer consumed (the dense-layer outputs).
struct HanTrace {
    std::vector<std::vector<std::vector<double>>> word_annotations;  // [m][n][2H]
    std::vector<std::vector<double>> word_scores;    // [m_cap][n_cap]
    std::vector<std::vector<double>> word_weights;   // [m_cap][n_cap]
    std::vector<std::vector<double>> sentence_vectors;     // [m_cap][2H]
    std::vector<std::vector<double>> sentence_annotations; // [m_cap][2H]
    std::vector<double> sentence_weights;            // [m_cap]
    std::vector<double> document_vector;
    double prob_pos = 0.0;
    double prob_neg = 0.0;
};

// Two-class logits (index 0 is the absolution class) for any model kind;
// fills `trace` for the hierarchical kind when given.
ad::Var build_logits(ad::Tape& tape, const ad::Binding& bind, const NeuralModel& model,
                     const Example& ex, HanTrace* trace = nullptr);

// Probability-of-absolution Var for any model kind.
ad::Var build_forward(ad::Tape& tape, const ad::Binding& bind, const NeuralModel& model,
                      const Example& ex, HanTrace* trace = nullptr);

// Inference entry points.
double predict_proba(const NeuralModel& model, const Example& ex);
HanTrace han_forward(const NeuralModel& model, const Example& ex);

// ---- training ---------------------------------------------------------------------

struct TrainResult {
    NeuralModel model;
    TrainingLog log;
};

// Mini-batch SGD with momentum on mean binary cross-entropy, step-decay
// learning rate, early stopping with best-epoch parameter restoration.
// Fully deterministic for a fixed (examples order, config, seed).
TrainResult train(Kind kind, const std::vector<Example>& examples, NetConfig net,
                  const TrainConfig& cfg,
                  const features::EmbeddingTable* table_for_finetune = nullptr,
                  const text::Vocabulary* vocab_for_finetune = nullptr);

} // namespace jop::neural

#endif
