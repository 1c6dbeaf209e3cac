#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "irp/checkpoint.hpp"
#include "irp/synthetic.hpp"
#include "irp/train.hpp"

using namespace irp;

namespace {

struct Fixture {
    Vocabulary vocab;
    ModelParams params;
    CheckpointMeta meta;
    Interaction probe;

    Fixture() {
        GeneratorConfig g;
        g.n = 40;
        g.seed = 3;
        const Corpus corpus = generate(g);
        vocab = build_vocab(corpus, 1);
        ModelConfig mc;
        mc.vocab_size = vocab.size();
        mc.d_model = 16;
        mc.n_layers = 1;
        mc.n_heads = 4;
        mc.d_ff = 32;
        params = init_params(mc, 77);
        meta.summarizer = SummarizerConfig{};
        meta.features = FeatureMask::all();
        meta.threshold = 0.625;
        meta.vocab_digest = vocab_digest_hex(vocab);
        meta.vocab_tokens = vocab.tokens();
        meta.split = {0.8, 0.1, 0.1};
        meta.split_seed = 99;
        probe = corpus.interactions[0];
    }
};

} // namespace

TEST_CASE("checkpoint round-trip is bitwise lossless", "[checkpoint]") {
    Fixture fx;
    std::stringstream ss;
    save_checkpoint(fx.params, fx.meta, ss);
    Checkpoint back = load_checkpoint(ss);

    SECTION("every tensor and config field survives") {
        auto orig = fx.params.named_tensors();
        auto loaded = back.params.named_tensors();
        REQUIRE(orig.size() == loaded.size());
        for (std::size_t i = 0; i < orig.size(); ++i) {
            REQUIRE(orig[i].first == loaded[i].first);
            REQUIRE(*orig[i].second == *loaded[i].second);
        }
        REQUIRE(back.meta.threshold == 0.625);
        REQUIRE(back.meta.features == fx.meta.features);
        REQUIRE(back.meta.vocab_digest == fx.meta.vocab_digest);
        REQUIRE(back.meta.split_seed == 99);
        REQUIRE(back.meta.model_version == "irp1-" + fx.meta.vocab_digest.substr(0, 8));
        REQUIRE(back.params.config.d_model == 16);
    }
    SECTION("probe prediction is bitwise identical") {
        const Vocabulary vocab2 = back.vocabulary();
        REQUIRE(vocab2.serialize() == fx.vocab.serialize());
        const Prediction a =
            predict(fx.params, fx.probe, fx.vocab, fx.meta.features, fx.meta.summarizer, 0.625);
        const Prediction b =
            predict(back.params, fx.probe, vocab2, back.meta.features, back.meta.summarizer,
                    back.meta.threshold);
        REQUIRE(a.probability == b.probability);
        REQUIRE(a.decision == b.decision);
    }
}

TEST_CASE("checkpoint file round-trip through disk", "[checkpoint]") {
    Fixture fx;
    const std::string path = "ckpt_roundtrip_test.bin";
    save_checkpoint(fx.params, fx.meta, path);
    Checkpoint back = load_checkpoint(path);
    REQUIRE(back.meta.vocab_digest == fx.meta.vocab_digest);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint error paths", "[checkpoint]") {
    Fixture fx;
    std::stringstream ss;
    save_checkpoint(fx.params, fx.meta, ss);
    const std::string bytes = ss.str();

    SECTION("corrupted magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        std::istringstream is(bad);
        REQUIRE_THROWS_WITH(load_checkpoint(is), Catch::Matchers::ContainsSubstring("bad magic"));
    }
    SECTION("version mismatch") {
        std::string bad = bytes;
        bad[4] = 9;
        std::istringstream is(bad);
        REQUIRE_THROWS_WITH(load_checkpoint(is), Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("truncated file") {
        std::istringstream is(bytes.substr(0, bytes.size() / 2));
        REQUIRE_THROWS_WITH(load_checkpoint(is), Catch::Matchers::ContainsSubstring("truncated"));
    }
    SECTION("vocabulary digest mismatch") {
        std::istringstream is(bytes);
        Checkpoint back = load_checkpoint(is);
        Vocabulary other;
        other.add("different");
        REQUIRE_THROWS_WITH(require_vocab_match(back, other),
                            Catch::Matchers::ContainsSubstring("digest mismatch"));
        REQUIRE_NOTHROW(require_vocab_match(back, fx.vocab));
    }
}
