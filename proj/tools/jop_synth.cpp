// jop-synth: writes the synthetic marker corpus and matching embeddings
// used by the acceptance suite and the README walk-through. The label of
// every document is decided by the presence of one marker token.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "jop/corpus.hpp"
#include "jop/errors.hpp"
#include "jop/synth.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"synthetic marker-token corpus generator"};

    jop::synth::MarkerConfig cfg;
    std::string out = "synthetic";
    std::size_t dim = 16;
    app.add_option("--out", out, "output directory");
    app.add_option("--docs", cfg.n_docs, "number of documents");
    app.add_option("--dim", dim, "embedding dimension");
    app.add_option("--seed", cfg.seed, "generator seed");
    app.add_option("--marker", cfg.marker, "marker token");
    app.add_option("--fillers", cfg.filler_vocab, "filler vocabulary size");
    app.add_option("--marker-scale", cfg.marker_scale,
                   "magnitude of the marker's indicator dimension");

    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(out);
        auto ds = jop::synth::marker_corpus(cfg);
        jop::corpus::write_jsonl(ds, fs::path(out) / "synthetic.jsonl");
        std::ofstream emb(fs::path(out) / "embeddings.txt", std::ios::binary);
        if (!emb) throw jop::IoError("cannot write embeddings file");
        jop::synth::write_marker_embeddings(emb, cfg, dim, cfg.seed);
        std::cerr << "wrote " << ds.size() << " documents and "
                  << jop::synth::marker_vocabulary(cfg).size() << " embeddings to "
                  << out << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
