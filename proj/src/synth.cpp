#include "jop/synth.hpp"

#include <charconv>
#include <ostream>

#include "jop/rng.hpp"

namespace jop::synth {

std::vector<std::string> marker_vocabulary(const MarkerConfig& cfg) {
    std::vector<std::string> vocab;
    vocab.reserve(cfg.filler_vocab + 1);
    for (std::size_t i = 0; i < cfg.filler_vocab; ++i) {
        std::string tok = "w";
        tok.push_back(static_cast<char>('a' + i / 26 % 26));
        tok.push_back(static_cast<char>('a' + i % 26));
        vocab.push_back(std::move(tok));
    }
    vocab.push_back(cfg.marker);
    return vocab;
}

corpus::Dataset marker_corpus(const MarkerConfig& cfg) {
    SplitMix64 rng(cfg.seed);
    const auto vocab = marker_vocabulary(cfg);
    const std::size_t fillers = cfg.filler_vocab;

    // Balanced labels, order shuffled so folds are not trivially sorted.
    std::vector<int> labels(cfg.n_docs);
    for (std::size_t i = 0; i < cfg.n_docs; ++i) labels[i] = i < cfg.n_docs / 2 ? 1 : -1;
    rng.shuffle(labels);

    corpus::Dataset ds;
    ds.name = "marker-synthetic";
    ds.documents.reserve(cfg.n_docs);
    for (std::size_t d = 0; d < cfg.n_docs; ++d) {
        const std::size_t n_sent =
            cfg.min_sentences + rng.next_below(cfg.max_sentences - cfg.min_sentences + 1);
        std::vector<std::vector<std::string>> sentences(n_sent);
        for (auto& sent : sentences) {
            const std::size_t n_words =
                cfg.min_words + rng.next_below(cfg.max_words - cfg.min_words + 1);
            for (std::size_t w = 0; w < n_words; ++w)
                sent.push_back(vocab[rng.next_below(fillers)]);
        }
        if (labels[d] == 1) {
            auto& sent = sentences[rng.next_below(n_sent)];
            sent[rng.next_below(sent.size())] = cfg.marker;
        }

        std::string text;
        for (const auto& sent : sentences) {
            for (std::size_t w = 0; w < sent.size(); ++w) {
                if (w) text.push_back(' ');
                text += sent[w];
            }
            text += ". ";
        }
        if (!text.empty()) text.pop_back();

        corpus::LabeledDocument doc;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "doc%05zu", d);
        doc.id = idbuf;
        doc.text = std::move(text);
        doc.label = labels[d];
        ds.documents.push_back(std::move(doc));
    }
    return ds;
}

void write_marker_embeddings(std::ostream& out, const MarkerConfig& cfg,
                             std::size_t dim, std::uint64_t seed) {
    SplitMix64 rng(mix_seed(seed, 0x9E3779B9ULL));
    for (const auto& tok : marker_vocabulary(cfg)) {
        out << tok;
        for (std::size_t j = 0; j < dim; ++j) {
            double v = j == 0 ? (tok == cfg.marker ? cfg.marker_scale : 0.0)
                              : rng.next_double(-0.5, 0.5);
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof(buf), v);
            out << ' ';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

} // namespace jop::synth
