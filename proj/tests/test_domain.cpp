#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <sstream>

#include "irp/domain.hpp"

using namespace irp;

namespace {

json valid_record() {
    return json::parse(R"({
      "query": {"text": "find me a red dress", "intent": "product_search"},
      "products": [{"title": "acme red dress", "brand": "acme", "size": "m",
                    "color": "red", "reviews": {"count": 12, "rating": 4.3},
                    "price": 19.99, "style": "plain", "group": "clothing",
                    "type": "apparel"}],
      "label": 1
    })");
}

Corpus small_corpus(std::size_t n) {
    Corpus c;
    for (std::size_t i = 0; i < n; ++i) {
        auto res = validate_interaction(valid_record());
        res.interaction->utterance.text = "find me item " + std::to_string(i);
        c.interactions.push_back(*res.interaction);
    }
    return c;
}

} // namespace

TEST_CASE("validate_interaction accepts a well-formed record", "[domain]") {
    auto res = validate_interaction(valid_record());
    REQUIRE(res.ok());
    REQUIRE(res.interaction->label == 1);
    REQUIRE(res.interaction->products.size() == 1);
    REQUIRE(res.interaction->products[0].price == 19.99);
}

TEST_CASE("validate_interaction reports every violated invariant", "[domain]") {
    SECTION("label outside {0,1}") {
        json j = valid_record();
        j["label"] = 2;
        auto res = validate_interaction(j);
        REQUIRE_FALSE(res.ok());
        REQUIRE(res.errors.size() == 1);
        REQUIRE(res.errors[0].find("label") != std::string::npos);
    }
    SECTION("empty product list") {
        json j = valid_record();
        j["products"] = json::array();
        auto res = validate_interaction(j);
        REQUIRE_FALSE(res.ok());
        REQUIRE(res.errors[0].find("k = 0") != std::string::npos);
    }
    SECTION("k above k_max") {
        json j = valid_record();
        for (int i = 0; i < 12; ++i) j["products"].push_back(j["products"][0]);
        auto res = validate_interaction(j);
        REQUIRE_FALSE(res.ok());
        REQUIRE(res.errors[0].find("k_max") != std::string::npos);
    }
    SECTION("negative price and out-of-range rating reported together") {
        json j = valid_record();
        j["products"][0]["price"] = -1.0;
        j["products"][0]["reviews"]["rating"] = 5.5;
        j["label"] = 7;
        auto res = validate_interaction(j);
        REQUIRE_FALSE(res.ok());
        REQUIRE(res.errors.size() == 3);
    }
    SECTION("missing fields are named") {
        json j = valid_record();
        j.erase("products");
        auto res = validate_interaction(j);
        REQUIRE_FALSE(res.ok());
        REQUIRE(res.errors[0] == "missing field: products");
    }
    SECTION("whitespace-only query text") {
        json j = valid_record();
        j["query"]["text"] = " !! ";
        auto res = validate_interaction(j);
        REQUIRE_FALSE(res.ok());
    }
}

TEST_CASE("load_corpus preserves order and names the bad line", "[domain]") {
    SECTION("two well-formed lines") {
        std::stringstream ss;
        ss << valid_record().dump() << "\n";
        json j2 = valid_record();
        j2["label"] = 0;
        ss << j2.dump() << "\n";
        Corpus c = load_corpus(ss);
        REQUIRE(c.size() == 2);
        REQUIRE(c.interactions[0].label == 1);
        REQUIRE(c.interactions[1].label == 0);
    }
    SECTION("empty stream yields an empty corpus") {
        std::stringstream ss;
        REQUIRE(load_corpus(ss).size() == 0);
    }
    SECTION("malformed line 3 is reported as line 3") {
        std::stringstream ss;
        ss << valid_record().dump() << "\n" << valid_record().dump() << "\n" << "{not json\n";
        try {
            load_corpus(ss);
            FAIL("expected a throw");
        } catch (const std::runtime_error& e) {
            REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SECTION("invalid record line number is reported") {
        std::stringstream ss;
        json bad = valid_record();
        bad["label"] = 5;
        ss << valid_record().dump() << "\n" << bad.dump() << "\n";
        try {
            load_corpus(ss);
            FAIL("expected a throw");
        } catch (const std::runtime_error& e) {
            REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
}

TEST_CASE("save/load round-trip is field-identical", "[domain]") {
    Corpus c = small_corpus(5);
    c.interactions[2].utterance.text = "find me a résumé folder 中文";
    c.interactions[3].products[0].title = "café müller";
    std::stringstream ss;
    save_corpus(c, ss);
    Corpus back = load_corpus(ss);
    REQUIRE(back == c);

    SECTION("unicode text fields survive byte-for-byte") {
        REQUIRE(back.interactions[2].utterance.text == c.interactions[2].utterance.text);
        REQUIRE(back.interactions[3].products[0].title == c.interactions[3].products[0].title);
    }
    SECTION("empty corpus saves to an empty stream") {
        std::stringstream empty;
        save_corpus(Corpus{}, empty);
        REQUIRE(empty.str().empty());
    }
}

TEST_CASE("split_corpus: floor sizes, remainder to train, determinism", "[domain]") {
    SECTION("n=10 at (0.8, 0.1, 0.1) gives (8, 1, 1)") {
        Corpus c = small_corpus(10);
        CorpusSplits s = split_corpus(c, {0.8, 0.1, 0.1}, 7);
        REQUIRE(s.train.size() == 8);
        REQUIRE(s.validation.size() == 1);
        REQUIRE(s.test.size() == 1);
        REQUIRE(s.train.split_tag == SplitTag::train);
    }
    SECTION("n=3 remainder rule gives (3, 0, 0)") {
        Corpus c = small_corpus(3);
        CorpusSplits s = split_corpus(c, {0.8, 0.1, 0.1}, 7);
        REQUIRE(s.train.size() == 3);
        REQUIRE(s.validation.size() == 0);
        REQUIRE(s.test.size() == 0);
    }
    SECTION("same seed gives identical partitions, different seeds differ") {
        Corpus c = small_corpus(50);
        CorpusSplits a = split_corpus(c, {0.8, 0.1, 0.1}, 7);
        CorpusSplits b = split_corpus(c, {0.8, 0.1, 0.1}, 7);
        REQUIRE(a.train == b.train);
        REQUIRE(a.validation == b.validation);
        REQUIRE(a.test == b.test);
        CorpusSplits d = split_corpus(c, {0.8, 0.1, 0.1}, 8);
        REQUIRE_FALSE(a.train == d.train);
    }
    SECTION("splits form a partition of the input as a multiset") {
        Corpus c = small_corpus(23);
        CorpusSplits s = split_corpus(c, {0.6, 0.2, 0.2}, 3);
        REQUIRE(s.train.size() + s.validation.size() + s.test.size() == 23);
        std::map<std::string, int> seen, expected;
        for (const auto& it : c.interactions) ++expected[it.utterance.text];
        for (const auto* split : {&s.train, &s.validation, &s.test})
            for (const auto& it : split->interactions) ++seen[it.utterance.text];
        REQUIRE(seen == expected);
    }
    SECTION("bad fractions refused") {
        Corpus c = small_corpus(4);
        REQUIRE_THROWS_AS(split_corpus(c, {0.5, 0.2, 0.2}, 1), std::invalid_argument);
    }
}
