#include "jop/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "jop/errors.hpp"

namespace jop::text {

using nlohmann::json;

namespace {

// ---- UTF-8 / Latin case and classification ----------------------------------

char32_t decode_utf8(const std::string& s, std::size_t& i) {
    const auto byte = [&](std::size_t k) -> unsigned {
        return static_cast<unsigned char>(s[k]);
    };
    const unsigned b0 = byte(i);
    if (b0 < 0x80) {
        i += 1;
        return b0;
    }
    if ((b0 >> 5) == 0x6 && i + 1 < s.size()) {
        char32_t cp = ((b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
        i += 2;
        return cp;
    }
    if ((b0 >> 4) == 0xE && i + 2 < s.size()) {
        char32_t cp = ((b0 & 0x0F) << 12) | ((byte(i + 1) & 0x3F) << 6) |
                      (byte(i + 2) & 0x3F);
        i += 3;
        return cp;
    }
    if ((b0 >> 3) == 0x1E && i + 3 < s.size()) {
        char32_t cp = ((b0 & 0x07) << 18) | ((byte(i + 1) & 0x3F) << 12) |
                      ((byte(i + 2) & 0x3F) << 6) | (byte(i + 3) & 0x3F);
        i += 4;
        return cp;
    }
    i += 1;  // invalid byte: treat as a separator
    return 0xFFFD;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

char32_t to_lower_cp(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
    if (cp == 0x0178) return 0x00FF;  // Y with diaeresis
    if (cp >= 0x0100 && cp <= 0x0177) {
        // Latin Extended-A pairs: even codepoint is the capital except in
        // 0x0139..0x0148 where the capital is odd.
        if (cp >= 0x0139 && cp <= 0x0148) return (cp % 2 == 1) ? cp + 1 : cp;
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x0179 && cp <= 0x017E) return (cp % 2 == 1) ? cp + 1 : cp;
    return cp;
}

bool is_letter_cp(char32_t cp) {
    if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
    if (cp >= 0x00C0 && cp <= 0x00FF) return cp != 0x00D7 && cp != 0x00F7;
    if (cp >= 0x0100 && cp <= 0x024F) return true;
    return false;
}

bool is_digit_cp(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_combining_cp(char32_t cp) { return cp >= 0x0300 && cp <= 0x036F; }

// Composition of the combining marks that occur in Portuguese text,
// applied after lowercasing. Unknown (base, mark) pairs drop the mark.
char32_t compose_cp(char32_t base, char32_t mark) {
    switch (mark) {
    case 0x0300:  // grave
        switch (base) {
        case 'a': return 0x00E0;
        case 'e': return 0x00E8;
        case 'i': return 0x00EC;
        case 'o': return 0x00F2;
        case 'u': return 0x00F9;
        }
        break;
    case 0x0301:  // acute
        switch (base) {
        case 'a': return 0x00E1;
        case 'e': return 0x00E9;
        case 'i': return 0x00ED;
        case 'o': return 0x00F3;
        case 'u': return 0x00FA;
        case 'y': return 0x00FD;
        case 'c': return 0x0107;
        }
        break;
    case 0x0302:  // circumflex
        switch (base) {
        case 'a': return 0x00E2;
        case 'e': return 0x00EA;
        case 'i': return 0x00EE;
        case 'o': return 0x00F4;
        case 'u': return 0x00FB;
        }
        break;
    case 0x0303:  // tilde
        switch (base) {
        case 'a': return 0x00E3;
        case 'o': return 0x00F5;
        case 'n': return 0x00F1;
        case 'i': return 0x0129;
        case 'u': return 0x0169;
        }
        break;
    case 0x0308:  // diaeresis
        switch (base) {
        case 'a': return 0x00E4;
        case 'e': return 0x00EB;
        case 'i': return 0x00EF;
        case 'o': return 0x00F6;
        case 'u': return 0x00FC;
        case 'y': return 0x00FF;
        }
        break;
    case 0x0327:  // cedilla
        if (base == 'c') return 0x00E7;
        break;
    }
    return 0;
}

} // namespace

std::string lowercase(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) encode_utf8(to_lower_cp(decode_utf8(s, i)), out);
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = to_lower_cp(decode_utf8(text, i));
        if (is_combining_cp(cp)) {
            if (!current.empty()) {
                // Recover the previous codepoint to try composition.
                std::size_t j = current.size();
                while (j > 0 && (static_cast<unsigned char>(current[j - 1]) & 0xC0) == 0x80)
                    --j;
                if (j > 0) {
                    std::size_t k = j - 1;
                    while (k > 0 && (static_cast<unsigned char>(current[k]) & 0xC0) == 0x80)
                        --k;
                    std::size_t pos = k;
                    char32_t prev = decode_utf8(current, pos);
                    char32_t composed = compose_cp(prev, cp);
                    if (composed) {
                        current.resize(k);
                        encode_utf8(composed, current);
                    }
                }
            }
            continue;  // bare or unknown marks are dropped
        }
        if (is_letter_cp(cp) || is_digit_cp(cp)) {
            encode_utf8(cp, current);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

// Words before a period that terminate abbreviations, not sentences.
const std::unordered_set<std::string>& abbreviation_guard() {
    static const std::unordered_set<std::string> guard{
        "art", "arts", "fls", "fl", "dr", "dra", "sr", "sra", "srs", "prof",
        "profa", "min", "des", "rel", "proc", "inc", "obs", "cf", "pag",
        "pags", "pág", "págs", "av", "n", "nr", "num", "p", "pp", "vol",
    };
    return guard;
}

bool is_space_byte(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space_byte(s[b])) ++b;
    while (e > b && is_space_byte(s[e - 1])) --e;
    return s.substr(b, e - b);
}

} // namespace

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::string last_word;  // letter run immediately before the cursor
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const unsigned char uc = static_cast<unsigned char>(c);
        const bool wordish = std::isalpha(uc) || uc >= 0x80;
        if (wordish) {
            last_word.push_back(c);
            continue;
        }
        const bool terminal = c == '.' || c == '!' || c == '?' || c == ';';
        if (terminal && (i + 1 == text.size() || is_space_byte(text[i + 1]))) {
            const bool guarded =
                c == '.' && abbreviation_guard().count(lowercase(last_word)) > 0;
            if (!guarded) {
                std::string sent = trim(text.substr(start, i + 1 - start));
                if (!sent.empty()) sentences.push_back(std::move(sent));
                start = i + 1;
            }
        }
        last_word.clear();
    }
    std::string tail = trim(text.substr(start));
    if (!tail.empty()) sentences.push_back(std::move(tail));
    return sentences;
}

// ---- stopwords ---------------------------------------------------------------

namespace {

// Standard Portuguese stopword list (the NLTK set), all lowercase.
constexpr const char* kPortugueseStopwords[] = {
    "a", "à", "ao", "aos", "aquela", "aquelas", "aquele", "aqueles", "aquilo",
    "as", "às", "até", "com", "como", "da", "das", "de", "dela", "delas",
    "dele", "deles", "depois", "do", "dos", "e", "é", "ela", "elas", "ele",
    "eles", "em", "entre", "era", "eram", "éramos", "essa", "essas", "esse",
    "esses", "esta", "está", "estamos", "estão", "estar", "estas", "estava",
    "estavam", "estávamos", "este", "esteja", "estejam", "estejamos", "estes",
    "esteve", "estive", "estivemos", "estiver", "estivera", "estiveram",
    "estivéramos", "estiverem", "estivermos", "estivesse", "estivessem",
    "estivéssemos", "estou", "eu", "foi", "fomos", "for", "fora", "foram",
    "fôramos", "forem", "formos", "fosse", "fossem", "fôssemos", "fui", "há",
    "haja", "hajam", "hajamos", "hão", "havemos", "haver", "hei", "houve",
    "houvemos", "houver", "houvera", "houverá", "houveram", "houvéramos",
    "houverão", "houverei", "houverem", "houveremos", "houveria", "houveriam",
    "houveríamos", "houvermos", "houvesse", "houvessem", "houvéssemos",
    "isso", "isto", "já", "lhe", "lhes", "mais", "mas", "me", "mesmo", "meu",
    "meus", "minha", "minhas", "muito", "na", "não", "nas", "nem", "no",
    "nos", "nós", "nossa", "nossas", "nosso", "nossos", "num", "numa", "o",
    "os", "ou", "para", "pela", "pelas", "pelo", "pelos", "por", "qual",
    "quando", "que", "quem", "são", "se", "seja", "sejam", "sejamos", "sem",
    "ser", "será", "serão", "serei", "seremos", "seria", "seriam",
    "seríamos", "seu", "seus", "só", "somos", "sou", "sua", "suas", "também",
    "te", "tem", "têm", "temos", "tenha", "tenham", "tenhamos", "tenho",
    "terá", "terão", "terei", "teremos", "teria", "teriam", "teríamos",
    "teu", "teus", "teve", "tinha", "tinham", "tínhamos", "tive", "tivemos",
    "tiver", "tivera", "tiveram", "tivéramos", "tiverem", "tivermos",
    "tivesse", "tivessem", "tivéssemos", "tu", "tua", "tuas", "um", "uma",
    "você", "vocês", "vos",
};

} // namespace

StopwordList StopwordList::builtin_portuguese() {
    StopwordList list;
    list.source_ = "builtin-portuguese";
    for (const char* w : kPortugueseStopwords) list.entries_.insert(w);
    return list;
}

StopwordList StopwordList::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open stopword file: " + path.string());
    StopwordList list;
    list.source_ = "file:" + path.string();
    std::string line;
    while (std::getline(in, line)) {
        std::string tok = trim(line);
        if (!tok.empty()) list.entries_.insert(lowercase(tok));
    }
    return list;
}

StopwordList StopwordList::none() {
    StopwordList list;
    list.source_ = "none";
    return list;
}

bool StopwordList::contains(const std::string& token) const {
    if (entries_.empty()) return false;
    return entries_.count(lowercase(token)) > 0;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordList& list) {
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (const auto& tok : tokens)
        if (!list.contains(tok)) kept.push_back(tok);
    return kept;
}

std::vector<std::string> Preprocessor::flat_tokens(const std::string& text) const {
    auto tokens = tokenize(text);
    return filter_stopwords ? remove_stopwords(tokens, stopwords) : tokens;
}

std::vector<std::vector<std::string>> Preprocessor::sentence_tokens(
    const std::string& text) const {
    std::vector<std::vector<std::string>> out;
    for (const auto& sent : split_sentences(text)) {
        auto tokens = tokenize(sent);
        if (filter_stopwords) tokens = remove_stopwords(tokens, stopwords);
        if (!tokens.empty()) out.push_back(std::move(tokens));
    }
    return out;
}

// ---- vocabulary --------------------------------------------------------------

int Vocabulary::index_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return index_.count(token) > 0;
}

std::size_t Vocabulary::frequency(const std::string& token) const {
    auto it = freq_.find(token);
    return it == freq_.end() ? 0 : it->second;
}

const std::string& Vocabulary::token_at(int index) const {
    if (index < 2 || static_cast<std::size_t>(index - 2) >= by_index_.size())
        throw Error("vocabulary has no token at index " + std::to_string(index));
    return by_index_[static_cast<std::size_t>(index - 2)];
}

Vocabulary build_vocabulary(const corpus::Dataset& ds, int min_count,
                            const Preprocessor& preproc) {
    if (min_count < 1) throw Error("build_vocabulary: min_count must be >= 1");
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : ds.documents)
        for (auto& tok : preproc.flat_tokens(doc.text)) counts[tok]++;

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, n] : counts)
        if (n >= static_cast<std::size_t>(min_count)) kept.emplace_back(tok, n);
    if (kept.empty())
        throw EmptyVocabularyError("no token reaches min_count = " +
                                   std::to_string(min_count));
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.min_count_ = min_count;
    int next = 2;
    for (auto& [tok, n] : kept) {
        vocab.index_[tok] = next++;
        vocab.freq_[tok] = n;
        vocab.by_index_.push_back(tok);
    }
    return vocab;
}

std::string Vocabulary::to_json_string() const {
    json obj;
    obj["format_version"] = 1;
    obj["meta"] = {{"min_count", min_count_},
                   {"pad_index", kPadIndex},
                   {"unk_index", kUnkIndex}};
    json tokens = json::object();
    json freqs = json::object();
    for (const auto& [tok, idx] : index_) {
        tokens[tok] = idx;
        freqs[tok] = freq_.at(tok);
    }
    obj["tokens"] = tokens;
    obj["frequencies"] = freqs;
    return obj.dump(2);
}

Vocabulary Vocabulary::from_json_string(const std::string& s) {
    json obj;
    try {
        obj = json::parse(s);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid vocabulary JSON: ") + e.what());
    }
    Vocabulary vocab;
    vocab.min_count_ = obj.at("meta").at("min_count").get<int>();
    std::vector<std::pair<std::string, int>> pairs;
    for (auto& [tok, idx] : obj.at("tokens").items())
        pairs.emplace_back(tok, idx.get<int>());
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    vocab.by_index_.reserve(pairs.size());
    for (auto& [tok, idx] : pairs) {
        if (idx != static_cast<int>(vocab.by_index_.size()) + 2)
            throw SchemaError("vocabulary indices are not contiguous from 2");
        vocab.index_[tok] = idx;
        vocab.by_index_.push_back(tok);
    }
    if (obj.contains("frequencies"))
        for (auto& [tok, n] : obj.at("frequencies").items())
            vocab.freq_[tok] = n.get<std::size_t>();
    return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary: " + path.string());
    out << to_json_string() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary: " + path.string());
    std::string content(std::istreambuf_iterator<char>(in),
                        std::istreambuf_iterator<char>{});
    return from_json_string(content);
}

// ---- hierarchical documents ----------------------------------------------------

HierarchicalDocument to_hierarchical(const corpus::LabeledDocument& doc,
                                     const Vocabulary& vocab, std::size_t m_cap,
                                     std::size_t n_cap, const Preprocessor& preproc) {
    if (m_cap < 1 || n_cap < 1) throw Error("to_hierarchical: caps must be >= 1");
    HierarchicalDocument hd;
    hd.m_cap = m_cap;
    hd.n_cap = n_cap;
    hd.grid.assign(m_cap * n_cap, Vocabulary::kPadIndex);
    hd.word_mask.assign(m_cap * n_cap, 0);
    hd.sentence_mask.assign(m_cap, 0);

    auto sentences = preproc.sentence_tokens(doc.text);
    hd.m_real = std::min(sentences.size(), m_cap);
    for (std::size_t t = 0; t < hd.m_real; ++t) {
        auto& sent = sentences[t];
        const std::size_t len = std::min(sent.size(), n_cap);
        hd.n_real.push_back(len);
        std::vector<std::string> surface;
        for (std::size_t i = 0; i < len; ++i) {
            hd.grid[t * n_cap + i] = vocab.index_of(sent[i]);
            hd.word_mask[t * n_cap + i] = 1;
            surface.push_back(sent[i]);
        }
        hd.sentence_mask[t] = len > 0;
        hd.surfaces.push_back(std::move(surface));
    }
    return hd;
}

GridCaps suggest_caps(const corpus::Dataset& ds, const Preprocessor& preproc,
                      double percentile) {
    std::vector<std::size_t> sent_counts;
    std::vector<std::size_t> sent_lengths;
    for (const auto& doc : ds.documents) {
        auto sentences = preproc.sentence_tokens(doc.text);
        sent_counts.push_back(sentences.size());
        for (const auto& s : sentences) sent_lengths.push_back(s.size());
    }
    auto nearest_rank = [percentile](std::vector<std::size_t>& v) -> std::size_t {
        if (v.empty()) return 1;
        std::sort(v.begin(), v.end());
        std::size_t rank = static_cast<std::size_t>(
            std::ceil(percentile * static_cast<double>(v.size())));
        rank = std::clamp<std::size_t>(rank, 1, v.size());
        return std::max<std::size_t>(v[rank - 1], 1);
    };
    return GridCaps{nearest_rank(sent_counts), nearest_rank(sent_lengths)};
}

} // namespace jop::text
