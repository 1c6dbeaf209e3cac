#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "irp/rng.hpp"
#include "irp/text.hpp"

namespace irp {

using json = nlohmann::json;

inline constexpr std::size_t kDefaultMaxProducts = 10;

struct Utterance {
    std::string text;
    std::string intent;

    bool operator==(const Utterance&) const = default;
};

struct Reviews {
    std::int64_t count = 0;
    double rating = 0.0;

    bool operator==(const Reviews&) const = default;
};

/// One retrieved product, described by its structured attribute set.
struct Product {
    std::string title;
    std::string brand;
    std::string size;
    std::string color;
    Reviews reviews;
    double price = 0.0;
    std::string style;
    std::string group;
    std::string type;

    bool operator==(const Product&) const = default;
};

/// One labeled example: the spoken query, the top-k retrieved products in
/// rank order, and the binary proxy label.
struct Interaction {
    Utterance utterance;
    std::vector<Product> products;
    int label = 0;

    bool operator==(const Interaction&) const = default;
};

enum class SplitTag { train, validation, test, unsplit };

inline std::string to_string(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::validation: return "validation";
        case SplitTag::test: return "test";
        case SplitTag::unsplit: return "unsplit";
    }
    return "unsplit";
}

struct Corpus {
    std::vector<Interaction> interactions;
    SplitTag split_tag = SplitTag::unsplit;

    std::size_t size() const { return interactions.size(); }
    bool operator==(const Corpus& o) const { return interactions == o.interactions; }
};

// --- JSON record schema -----------------------------------------------------

inline json to_json(const Product& p) {
    return json{{"title", p.title},
                {"brand", p.brand},
                {"size", p.size},
                {"color", p.color},
                {"reviews", json{{"count", p.reviews.count}, {"rating", p.reviews.rating}}},
                {"price", p.price},
                {"style", p.style},
                {"group", p.group},
                {"type", p.type}};
}

inline json to_json(const Interaction& it) {
    json products = json::array();
    for (const auto& p : it.products) products.push_back(to_json(p));
    return json{{"query", json{{"text", it.utterance.text}, {"intent", it.utterance.intent}}},
                {"products", std::move(products)},
                {"label", it.label}};
}

struct ValidationResult {
    std::optional<Interaction> interaction;
    std::vector<std::string> errors;

    bool ok() const { return errors.empty() && interaction.has_value(); }
};

namespace detail {

inline bool get_string(const json& j, const char* key, std::string& out,
                       std::vector<std::string>& errors, const std::string& where) {
    if (!j.contains(key)) {
        errors.push_back("missing field: " + where + key);
        return false;
    }
    if (!j.at(key).is_string()) {
        errors.push_back("field is not a string: " + where + key);
        return false;
    }
    out = j.at(key).get<std::string>();
    return true;
}

inline std::optional<Product> parse_product(const json& j, std::size_t index,
                                            std::vector<std::string>& errors) {
    const std::string where = "products[" + std::to_string(index) + "].";
    if (!j.is_object()) {
        errors.push_back(where + " is not an object");
        return std::nullopt;
    }
    Product p;
    bool ok = true;
    ok &= get_string(j, "title", p.title, errors, where);
    ok &= get_string(j, "brand", p.brand, errors, where);
    ok &= get_string(j, "size", p.size, errors, where);
    ok &= get_string(j, "color", p.color, errors, where);
    ok &= get_string(j, "style", p.style, errors, where);
    ok &= get_string(j, "group", p.group, errors, where);
    ok &= get_string(j, "type", p.type, errors, where);
    if (!j.contains("price") || !j.at("price").is_number()) {
        errors.push_back("missing or non-numeric field: " + where + "price");
        ok = false;
    } else {
        p.price = j.at("price").get<double>();
    }
    if (!j.contains("reviews") || !j.at("reviews").is_object()) {
        errors.push_back("missing field: " + where + "reviews");
        ok = false;
    } else {
        const json& r = j.at("reviews");
        if (!r.contains("count") || !r.at("count").is_number_integer()) {
            errors.push_back("missing or non-integer field: " + where + "reviews.count");
            ok = false;
        } else {
            p.reviews.count = r.at("count").get<std::int64_t>();
        }
        if (!r.contains("rating") || !r.at("rating").is_number()) {
            errors.push_back("missing or non-numeric field: " + where + "reviews.rating");
            ok = false;
        } else {
            p.reviews.rating = r.at("rating").get<double>();
        }
    }
    if (!ok) return std::nullopt;
    if (p.title.empty()) errors.push_back(where + "title is empty");
    if (p.price < 0.0) errors.push_back(where + "price is negative");
    if (!(p.reviews.rating >= 0.0 && p.reviews.rating <= 5.0))
        errors.push_back(where + "reviews.rating out of range [0,5]");
    if (p.reviews.count < 0) errors.push_back(where + "reviews.count is negative");
    return p;
}

} // namespace detail

/// Checks every invariant and reports every violation, not just the first.
inline ValidationResult validate_interaction(const json& raw, std::size_t k_max = kDefaultMaxProducts) {
    ValidationResult res;
    if (!raw.is_object()) {
        res.errors.push_back("record is not an object");
        return res;
    }
    Interaction it;
    if (!raw.contains("query") || !raw.at("query").is_object()) {
        res.errors.push_back("missing field: query");
    } else {
        detail::get_string(raw.at("query"), "text", it.utterance.text, res.errors, "query.");
        detail::get_string(raw.at("query"), "intent", it.utterance.intent, res.errors, "query.");
        if (raw.at("query").contains("text") && normalize(it.utterance.text).empty())
            res.errors.push_back("query.text is empty after normalization");
        if (raw.at("query").contains("intent") && normalize_intent(it.utterance.intent).empty())
            res.errors.push_back("query.intent is empty");
    }
    if (!raw.contains("label")) {
        res.errors.push_back("missing field: label");
    } else if (!raw.at("label").is_number_integer() ||
               (raw.at("label").get<int>() != 0 && raw.at("label").get<int>() != 1)) {
        res.errors.push_back("label not in {0,1}");
    } else {
        it.label = raw.at("label").get<int>();
    }
    if (!raw.contains("products") || !raw.at("products").is_array()) {
        res.errors.push_back("missing field: products");
    } else {
        const json& arr = raw.at("products");
        if (arr.empty()) res.errors.push_back("k = 0: products list is empty");
        if (arr.size() > k_max)
            res.errors.push_back("k = " + std::to_string(arr.size()) + " exceeds k_max = " + std::to_string(k_max));
        for (std::size_t i = 0; i < arr.size(); ++i) {
            auto p = detail::parse_product(arr[i], i, res.errors);
            if (p) it.products.push_back(std::move(*p));
        }
    }
    if (res.errors.empty()) res.interaction = std::move(it);
    return res;
}

/// One interaction per line. Aborts with the line number on the first
/// malformed or invalid line; input order is preserved.
inline Corpus load_corpus(std::istream& in, std::size_t k_max = kDefaultMaxProducts) {
    Corpus corpus;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("line " + std::to_string(lineno) + ": parse error: " + e.what());
        }
        ValidationResult res = validate_interaction(j, k_max);
        if (!res.ok()) {
            std::string msg = "line " + std::to_string(lineno) + ": invalid record:";
            for (const auto& e : res.errors) msg += " " + e + ";";
            throw std::runtime_error(msg);
        }
        corpus.interactions.push_back(std::move(*res.interaction));
    }
    return corpus;
}

inline void save_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& it : corpus.interactions) {
        out << to_json(it).dump() << '\n';
        if (!out) throw std::runtime_error("save_corpus: write failure");
    }
    out.flush();
    if (!out) throw std::runtime_error("save_corpus: write failure");
}

struct SplitFractions {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

struct CorpusSplits {
    Corpus train;
    Corpus validation;
    Corpus test;
};

/// Deterministic shuffled partition. Split sizes are floor(n * fraction)
/// with the remainder assigned to train.
inline CorpusSplits split_corpus(const Corpus& corpus, const SplitFractions& f, std::uint64_t seed) {
    if (f.train <= 0.0 || f.validation < 0.0 || f.test < 0.0 ||
        std::fabs(f.train + f.validation + f.test - 1.0) > 1e-9)
        throw std::invalid_argument("split_corpus: fractions must be positive and sum to 1");
    const std::size_t n = corpus.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.validation));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.test));
    const std::size_t n_train = n - n_val - n_test;
    CorpusSplits s;
    s.train.split_tag = SplitTag::train;
    s.validation.split_tag = SplitTag::validation;
    s.test.split_tag = SplitTag::test;
    for (std::size_t i = 0; i < n; ++i) {
        const Interaction& it = corpus.interactions[idx[i]];
        if (i < n_train) s.train.interactions.push_back(it);
        else if (i < n_train + n_val) s.validation.interactions.push_back(it);
        else s.test.interactions.push_back(it);
    }
    return s;
}

} // namespace irp
