#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <sstream>
#include <thread>

#include "irp/server.hpp"
#include "irp/synthetic.hpp"
#include "irp/train.hpp"

using namespace irp;

namespace {

// In-process server on an ephemeral port.
struct ServerFixture {
    std::shared_ptr<ServeContext> ctx;
    httplib::Server server;
    int port = 0;
    std::thread thread;
    Corpus corpus;

    ServerFixture() {
        GeneratorConfig g;
        g.n = 60;
        g.seed = 14;
        corpus = generate(g);
        Vocabulary vocab = build_vocab(corpus, 1);
        ModelConfig mc;
        mc.vocab_size = vocab.size();
        mc.d_model = 16;
        mc.n_layers = 1;
        mc.n_heads = 4;
        mc.d_ff = 32;
        ModelParams params = init_params(mc, 5);
        CheckpointMeta meta;
        meta.features = FeatureMask::all();
        meta.summarizer = SummarizerConfig{};
        meta.threshold = 0.5;
        meta.vocab_digest = vocab_digest_hex(vocab);
        meta.vocab_tokens = vocab.tokens();
        std::stringstream ss;
        save_checkpoint(params, meta, ss);
        ctx = std::make_shared<ServeContext>(load_checkpoint(ss));
        configure_server(server, ctx);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~ServerFixture() {
        server.stop();
        thread.join();
    }

    httplib::Client client() { return httplib::Client("127.0.0.1", port); }

    static json request_body(const Interaction& it, bool with_label = false) {
        json j = to_json(it);
        if (!with_label) j.erase("label");
        return j;
    }
};

} // namespace

TEST_CASE("service: healthz and predict contract", "[server]") {
    ServerFixture fx;
    auto cli = fx.client();

    SECTION("healthz reports the model version") {
        auto res = cli.Get("/healthz");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const json j = json::parse(res->body);
        REQUIRE(j.at("status") == "ok");
        REQUIRE(j.at("model_version") == fx.ctx->ckpt.meta.model_version);
    }
    SECTION("valid request returns a consistent prediction") {
        auto res = cli.Post("/predict", ServerFixture::request_body(fx.corpus.interactions[0]).dump(),
                            "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const json j = json::parse(res->body);
        const double p = j.at("probability").get<double>();
        REQUIRE(p > 0.0);
        REQUIRE(p < 1.0);
        REQUIRE(j.at("decision").get<int>() == (p >= j.at("threshold").get<double>() ? 1 : 0));
        REQUIRE(j.at("model_version") == fx.ctx->ckpt.meta.model_version);
    }
}

TEST_CASE("service: responses are bitwise equal to library predictions", "[server][oracle]") {
    ServerFixture fx;
    auto cli = fx.client();
    const Vocabulary vocab = fx.ctx->ckpt.vocabulary();
    for (std::size_t i = 0; i < 20; ++i) {
        const Interaction& it = fx.corpus.interactions[i % fx.corpus.size()];
        auto res = cli.Post("/predict", ServerFixture::request_body(it).dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        const json j = json::parse(res->body);
        const Prediction expect = predict(fx.ctx->ckpt.params, it, vocab, fx.ctx->ckpt.meta.features,
                                          fx.ctx->ckpt.meta.summarizer, fx.ctx->ckpt.meta.threshold);
        REQUIRE(j.at("probability").get<double>() == expect.probability);
        REQUIRE(j.at("decision").get<int>() == expect.decision);
    }
}

TEST_CASE("service: a label in the request is ignored, never echoed", "[server]") {
    ServerFixture fx;
    auto cli = fx.client();
    const Interaction& it = fx.corpus.interactions[0];
    auto with = cli.Post("/predict", ServerFixture::request_body(it, true).dump(), "application/json");
    auto without = cli.Post("/predict", ServerFixture::request_body(it, false).dump(), "application/json");
    REQUIRE(with);
    REQUIRE(without);
    REQUIRE(with->status == 200);
    REQUIRE(with->body == without->body);
    REQUIRE(json::parse(with->body).contains("label") == false);
}

TEST_CASE("service: malformed bodies get a 400 naming the field", "[server]") {
    ServerFixture fx;
    auto cli = fx.client();

    SECTION("not JSON at all") {
        auto res = cli.Post("/predict", "not json {", "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 400);
        REQUIRE(json::parse(res->body).contains("error"));
    }
    SECTION("missing products with a product-feature model") {
        json body = ServerFixture::request_body(fx.corpus.interactions[0]);
        body.erase("products");
        auto res = cli.Post("/predict", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 400);
        const json j = json::parse(res->body);
        REQUIRE(j.at("error").get<std::string>().find("products") != std::string::npos);
    }
    SECTION("missing query text is named") {
        json body = ServerFixture::request_body(fx.corpus.interactions[0]);
        body["query"].erase("text");
        auto res = cli.Post("/predict", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 400);
        REQUIRE(json::parse(res->body).at("error").get<std::string>().find("query.text") !=
                std::string::npos);
    }
    SECTION("oversized body is rejected") {
        json body = ServerFixture::request_body(fx.corpus.interactions[0]);
        body["padding"] = std::string(2 * 1024 * 1024, 'x');
        auto res = cli.Post("/predict", body.dump(), "application/json");
        // httplib surfaces payload-too-large as a 413 response
        REQUIRE((!res || res->status == 413));
    }
}

TEST_CASE("service: concurrent identical requests agree", "[server]") {
    ServerFixture fx;
    const std::string body = ServerFixture::request_body(fx.corpus.interactions[1]).dump();
    std::vector<std::string> results(8);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&, i] {
            auto cli = fx.client();
            auto res = cli.Post("/predict", body, "application/json");
            if (res && res->status == 200) results[i] = res->body;
        });
    for (auto& t : threads) t.join();
    for (int i = 1; i < 8; ++i) REQUIRE(results[i] == results[0]);
    REQUIRE_FALSE(results[0].empty());
}
