#ifndef JOP_SYNTH_HPP
#define JOP_SYNTH_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "jop/corpus.hpp"

namespace jop::synth {

// Synthetic corpus whose label is fully determined by the presence of one
// marker token: positive documents carry the marker in exactly one
// sentence, negative documents never contain it. Classifiers should reach
// near-perfect accuracy on it, and an attention model should put its top
// word weight on the marker.
struct MarkerConfig {
    std::size_t n_docs = 400;
    std::string marker = "marcador";
    std::size_t filler_vocab = 60;
    std::size_t min_sentences = 3;
    std::size_t max_sentences = 6;
    std::size_t min_words = 4;
    std::size_t max_words = 9;
    // Magnitude of the marker's indicator dimension in the generated
    // embeddings. Larger values keep the marker's contribution visible
    // through the attention averaging at initialization, which is what
    // lets the hierarchical model separate the corpus in few epochs.
    double marker_scale = 4.0;
    std::uint64_t seed = 42;
};

// All tokens the generator can emit (fillers plus the marker).
std::vector<std::string> marker_vocabulary(const MarkerConfig& cfg);

corpus::Dataset marker_corpus(const MarkerConfig& cfg);

// Embedding file for the marker vocabulary in the standard text format.
// Dimension 0 is 1 for the marker and 0 otherwise, so the labelling rule
// is linearly decidable from a single embedding dimension; the remaining
// dimensions are uniform noise.
void write_marker_embeddings(std::ostream& out, const MarkerConfig& cfg,
                             std::size_t dim, std::uint64_t seed);

} // namespace jop::synth

#endif
