#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "jop/errors.hpp"
#include "jop/rng.hpp"
#include "jop/textproc.hpp"

using namespace jop;
using namespace jop::text;

namespace {

corpus::Dataset corpus_of(std::vector<std::string> texts) {
    corpus::Dataset ds;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        corpus::LabeledDocument d;
        d.id = "d" + std::to_string(i);
        d.text = std::move(texts[i]);
        d.label = i % 2 == 0 ? 1 : -1;
        ds.documents.push_back(std::move(d));
    }
    return ds;
}

Preprocessor raw_preproc() {
    return Preprocessor{StopwordList::none(), false};
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

} // namespace

TEST_CASE("tokenize lowercases and strips punctuation, keeping diacritics") {
    CHECK(tokenize("O réu roubou.") == std::vector<std::string>{"o", "réu", "roubou"});
    CHECK(tokenize("Art. 121, CP") == std::vector<std::string>{"art", "121", "cp"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("AÇÃO Penal!") == std::vector<std::string>{"ação", "penal"});
    CHECK(tokenize("R$ 1.500,00") == std::vector<std::string>{"r", "1", "500", "00"});
}

TEST_CASE("tokenize composes combining diacritics") {
    // "réu" written with e + COMBINING ACUTE ACCENT
    const std::string decomposed = "re\xCC\x81u";
    CHECK(tokenize(decomposed) == std::vector<std::string>{"réu"});
    CHECK(tokenize(decomposed) == tokenize("réu"));
}

TEST_CASE("tokenize is idempotent over its own joined output") {
    SplitMix64 rng(21);
    const std::vector<std::string> fixtures{
        "O réu, João, foi CONDENADO; pagará R$ 2.500,00 (dois mil e quinhentos).",
        "Conforme art. 121 do CP, absolvo-o.",
        "ação penal nº 0001234-55.2019: sentença transitada em julgado!",
        "Vítima atingida por 3 disparos... fls. 45/46.",
    };
    for (const auto& text : fixtures) {
        auto once = tokenize(text);
        auto twice = tokenize(join(once));
        CHECK(once == twice);
    }
}

TEST_CASE("split_sentences splits on terminal punctuation") {
    CHECK(split_sentences("A condena. B absolve.").size() == 2);
    CHECK(split_sentences("").empty());
    CHECK(split_sentences("Condeno; custas pela parte. Fim!").size() == 3);
    auto tail = split_sentences("Sem pontuação final");
    REQUIRE(tail.size() == 1);
    CHECK(tail[0] == "Sem pontuação final");
}

TEST_CASE("split_sentences guards legal abbreviations") {
    auto one = split_sentences("Conforme art. 121 do CP, condeno.");
    REQUIRE(one.size() == 1);
    auto guarded = split_sentences("Vide fls. 22 e Dr. Silva. Nova frase aqui.");
    CHECK(guarded.size() == 2);
    // Decimal numbers do not split either.
    CHECK(split_sentences("Multa de 1.500 reais aplicada.").size() == 1);
}

TEST_CASE("remove_stopwords filters case-insensitively, preserving order") {
    StopwordList list = StopwordList::builtin_portuguese();
    CHECK(remove_stopwords({"o", "réu", "foi", "condenado"}, list) ==
          std::vector<std::string>{"réu", "condenado"});
    CHECK(remove_stopwords({"O", "FOI"}, list).empty());
    CHECK(remove_stopwords({"o", "réu"}, StopwordList::none()) ==
          std::vector<std::string>{"o", "réu"});
}

TEST_CASE("stopword list loads from file") {
    test::TempDir dir;
    auto path = test::write_file(dir.file("stop.txt"), "FOO\nbar\n\n  baz \n");
    auto list = StopwordList::from_file(path);
    CHECK(list.size() == 3);
    CHECK(list.contains("foo"));
    CHECK(list.contains("BAZ"));
    CHECK(!list.contains("qux"));
    CHECK(list.source().rfind("file:", 0) == 0);
}

TEST_CASE("build_vocabulary orders by frequency then token") {
    auto ds = corpus_of({"a a b"});
    auto vocab = build_vocabulary(ds, 1, raw_preproc());
    CHECK(vocab.index_of("a") == 2);
    CHECK(vocab.index_of("b") == 3);
    CHECK(vocab.frequency("a") == 2);
    CHECK(vocab.size() == 4);  // two reserved + two tokens

    auto vocab2 = build_vocabulary(ds, 2, raw_preproc());
    CHECK(vocab2.index_of("a") == 2);
    CHECK(!vocab2.contains("b"));
    CHECK(vocab2.index_of("b") == Vocabulary::kUnkIndex);

    CHECK_THROWS_AS(build_vocabulary(ds, 5, raw_preproc()), EmptyVocabularyError);
}

TEST_CASE("vocabulary serialization is deterministic and round-trips") {
    auto ds = corpus_of({"réu condenado réu", "réu absolvido pena"});
    auto a = build_vocabulary(ds, 1, raw_preproc());
    auto b = build_vocabulary(ds, 1, raw_preproc());
    CHECK(a.to_json_string() == b.to_json_string());

    auto back = Vocabulary::from_json_string(a.to_json_string());
    CHECK(back.to_json_string() == a.to_json_string());
    CHECK(back.index_of("réu") == a.index_of("réu"));
    CHECK(back.token_at(2) == "réu");
}

TEST_CASE("to_hierarchical pads, truncates and maps OOV") {
    auto ds = corpus_of({"casa verde azul"});
    auto vocab = build_vocabulary(ds, 1, raw_preproc());
    corpus::LabeledDocument doc;
    doc.id = "x";
    doc.label = 1;

    doc.text = "casa verde azul";
    auto hd = to_hierarchical(doc, vocab, 2, 5, raw_preproc());
    CHECK(hd.m_real == 1);
    CHECK(hd.n_real[0] == 3);
    CHECK(hd.index_at(0, 0) == vocab.index_of("casa"));
    CHECK(hd.index_at(0, 3) == Vocabulary::kPadIndex);
    CHECK(!hd.word_at(0, 3));
    CHECK(hd.sentence_mask[0]);
    CHECK(!hd.sentence_mask[1]);

    doc.text = "um. dois. tres. quatro.";
    auto trunc = to_hierarchical(doc, vocab, 2, 5, raw_preproc());
    CHECK(trunc.m_real == 2);  // sentences 3 and 4 dropped

    doc.text = "casa desconhecida";
    auto oov = to_hierarchical(doc, vocab, 1, 4, raw_preproc());
    CHECK(oov.index_at(0, 1) == Vocabulary::kUnkIndex);
    CHECK(oov.word_at(0, 1));
    CHECK(oov.surfaces[0][1] == "desconhecida");
}

TEST_CASE("hierarchical masks satisfy their invariants on random documents") {
    SplitMix64 rng(31);
    auto ds = corpus_of({"alfa beta gama delta. epsilon zeta. eta teta iota."});
    auto vocab = build_vocabulary(ds, 1, raw_preproc());
    for (int iter = 0; iter < 40; ++iter) {
        std::string text;
        const std::size_t sents = rng.next_below(5);
        for (std::size_t s = 0; s < sents; ++s) {
            const std::size_t words = 1 + rng.next_below(6);
            for (std::size_t w = 0; w < words; ++w)
                text += (rng.next_double() < 0.7 ? "alfa " : "nova ");
            text += ". ";
        }
        corpus::LabeledDocument doc;
        doc.id = "r";
        doc.label = 1;
        doc.text = text;
        const std::size_t m_cap = 1 + rng.next_below(4);
        const std::size_t n_cap = 1 + rng.next_below(5);
        auto hd = to_hierarchical(doc, vocab, m_cap, n_cap, raw_preproc());
        for (std::size_t t = 0; t < m_cap; ++t) {
            bool any = false;
            for (std::size_t i = 0; i < n_cap; ++i) {
                if (!hd.word_at(t, i))
                    CHECK(hd.index_at(t, i) == Vocabulary::kPadIndex);
                any = any || hd.word_at(t, i);
            }
            CHECK(static_cast<bool>(hd.sentence_mask[t]) == any);
        }
    }
}

TEST_CASE("suggest_caps returns dataset percentiles") {
    auto ds = corpus_of({"a b c. d e.", "f g. h i j k l. m n."});
    auto caps = suggest_caps(ds, raw_preproc());
    CHECK(caps.m_cap == 3);   // sentence counts {2,3}, p95 nearest-rank -> 3
    CHECK(caps.n_cap >= 3);   // longest sentence has 7 tokens
    CHECK(caps.n_cap <= 7);

    auto empty = suggest_caps(corpus::Dataset{}, raw_preproc());
    CHECK(empty.m_cap == 1);
    CHECK(empty.n_cap == 1);
}
