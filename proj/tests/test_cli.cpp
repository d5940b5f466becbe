#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <sys/wait.h>
#include <string>

#include "helpers.hpp"
#include "jop/corpus.hpp"
#include "jop/synth.hpp"

using namespace jop;

namespace {

// Exit-code and determinism checks against the built binaries; the paths
// arrive via JOP_BIN / JOP_SYNTH_BIN (set by ctest).
const char* jop_bin() { return std::getenv("JOP_BIN"); }
const char* synth_bin() { return std::getenv("JOP_SYNTH_BIN"); }

int run(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

} // namespace

TEST_CASE("cli exit codes: 0 success, 2 input, 3 training, 4 usage") {
    const char* jop = jop_bin();
    const char* synth = synth_bin();
    if (!jop || !synth) return;  // only meaningful under ctest

    test::TempDir dir;
    const std::string base = dir.path().string();
    REQUIRE(run(std::string(synth) + " --out " + base + "/fx --docs 30 --dim 6 --seed 3 --fillers 12") == 0);

    const std::string ds = base + "/fx/synthetic.jsonl";
    const std::string emb = base + "/fx/embeddings.txt";

    // success
    CHECK(run(std::string(jop) + " prepare --dataset " + ds + " --out " + base + "/p") == 0);

    // schema error -> 2, message carries the line number
    test::write_file(dir.file("bad.jsonl"),
                     "{\"id\":\"a\",\"text\":\"x\",\"label\":1}\n"
                     "{\"id\":\"b\",\"text\":\"y\",\"label\":0}\n");
    CHECK(run(std::string(jop) + " prepare --dataset " + base + "/bad.jsonl --out " +
              base + "/pb") == 2);

    // missing file -> 2
    CHECK(run(std::string(jop) + " prepare --dataset " + base + "/nope.jsonl --out " +
              base + "/pn") == 2);

    // k larger than a class -> 3 (insufficient class members)
    CHECK(run(std::string(jop) + " crossval --model cart --dataset " + ds +
              " --out " + base + "/cv --k 25") == 3);

    // explain with a non-attention model -> 4
    REQUIRE(run(std::string(jop) + " train --model cart --dataset " + ds + " --out " +
                base + "/cart") == 0);
    CHECK(run(std::string(jop) + " explain --model " + base + "/cart/model.json" +
              " --dataset " + ds + " --embeddings " + emb + " --out " + base + "/ex") == 4);

    // unknown flag -> 4
    CHECK(run(std::string(jop) + " prepare --dataset " + ds + " --bogus") == 4);
}

TEST_CASE("cli train/predict artifacts carry the documented contracts") {
    const char* jop = jop_bin();
    const char* synth = synth_bin();
    if (!jop || !synth) return;

    test::TempDir dir;
    const std::string base = dir.path().string();
    REQUIRE(run(std::string(synth) + " --out " + base + "/fx --docs 30 --dim 6 --seed 5 --fillers 12") == 0);
    const std::string ds = base + "/fx/synthetic.jsonl";
    const std::string emb = base + "/fx/embeddings.txt";
    test::write_file(dir.file("cfg.json"),
                     R"({"stopword_source":"none","net":{"hidden":6,"attention_dim":6},)"
                     R"("train":{"initial_lr":0.01,"max_epochs":8,"batch_size":8}})");

    REQUIRE(run(std::string(jop) + " train --model gru --dataset " + ds +
                " --embeddings " + emb + " --out " + base + "/m --config " + base +
                "/cfg.json") == 0);
    auto log = test::read_file(dir.path() / "m" / "training_log.json");
    CHECK(log.find("\"lr\"") != std::string::npos);
    CHECK(log.find("\"stop_reason\"") != std::string::npos);
    // Step decay: epochs 4+ run at 0.01 * 0.2 = 0.002.
    CHECK(log.find("0.002") != std::string::npos);

    REQUIRE(run(std::string(jop) + " predict --model " + base + "/m/model.json" +
                " --dataset " + ds + " --embeddings " + emb + " --out " + base +
                "/pr") == 0);
    auto preds = test::read_file(dir.path() / "pr" / "predictions.jsonl");
    CHECK(std::count(preds.begin(), preds.end(), '\n') == 30);  // one line per doc
    CHECK(preds.find("\"id\"") != std::string::npos);
    CHECK(preds.find("\"label\"") != std::string::npos);
    CHECK(preds.find("\"score\"") != std::string::npos);
}

TEST_CASE("cli reruns are byte-identical") {
    const char* jop = jop_bin();
    const char* synth = synth_bin();
    if (!jop || !synth) return;

    test::TempDir dir;
    const std::string base = dir.path().string();
    REQUIRE(run(std::string(synth) + " --out " + base + "/fx --docs 24 --dim 6 --seed 9 --fillers 10") == 0);
    const std::string ds = base + "/fx/synthetic.jsonl";

    REQUIRE(run(std::string(jop) + " prepare --dataset " + ds + " --out " + base + "/a") == 0);
    REQUIRE(run(std::string(jop) + " prepare --dataset " + ds + " --out " + base + "/b") == 0);
    CHECK(test::read_file(dir.path() / "a" / "vocabulary.json") ==
          test::read_file(dir.path() / "b" / "vocabulary.json"));
    CHECK(test::read_file(dir.path() / "a" / "prepared.jsonl") ==
          test::read_file(dir.path() / "b" / "prepared.jsonl"));
    CHECK(test::read_file(dir.path() / "a" / "stats.json") ==
          test::read_file(dir.path() / "b" / "stats.json"));
}
