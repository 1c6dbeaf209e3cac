#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "irp/domain.hpp"
#include "irp/losses.hpp"
#include "irp/rng.hpp"

namespace irp {

/// Token lists driving the generator. The four signal-bearing lexicons
/// (modifiers and palettes) are pairwise disjoint so that lexicon-class
/// membership is unambiguous from the text.
struct Lexicons {
    std::vector<std::string> visual_modifiers;
    std::vector<std::string> functional_modifiers;
    std::vector<std::string> vivid_colors;
    std::vector<std::string> muted_colors;
    std::vector<std::string> vivid_styles;
    std::vector<std::string> muted_styles;
    std::vector<std::string> nouns;
    std::vector<std::string> brands;
    std::vector<std::string> sizes;

    static const Lexicons& builtin();
    static Lexicons parse(std::istream& in);
    std::string serialize() const;

    bool contains_visual_modifier(const std::string& t) const {
        return std::find(visual_modifiers.begin(), visual_modifiers.end(), t) != visual_modifiers.end();
    }
    bool contains_vivid(const std::string& t) const {
        return std::find(vivid_colors.begin(), vivid_colors.end(), t) != vivid_colors.end() ||
               std::find(vivid_styles.begin(), vivid_styles.end(), t) != vivid_styles.end();
    }
};

inline constexpr std::string_view kBuiltinLexiconText =
    "[visual_modifiers]\n"
    "shiny\nglittery\ncolorful\nsparkling\npatterned\nstriped\nfloral\nglossy\n"
    "vibrant\nbright\ndazzling\niridescent\ngleaming\npolished\nornate\npicturesque\n"
    "[functional_modifiers]\n"
    "cheap\ndurable\nwireless\nportable\nergonomic\ncompact\nlightweight\nrechargeable\n"
    "adjustable\nwaterproof\nsturdy\nquiet\nefficient\nfoldable\nwashable\nreliable\n"
    "[vivid_colors]\n"
    "red\ncrimson\nscarlet\nmagenta\nturquoise\nemerald\nviolet\nfuchsia\nteal\ncoral\namber\nindigo\n"
    "[muted_colors]\n"
    "gray\nbeige\ntaupe\ncharcoal\nslate\nsand\nstone\nash\nkhaki\nfog\nsmoke\npewter\n"
    "[vivid_styles]\n"
    "sequined\nholographic\nneon\nmetallic\nembroidered\ntiedye\nrainbow\njeweled\n"
    "[muted_styles]\n"
    "plain\nbasic\nclassic\nminimal\nstandard\nsimple\ncasual\neveryday\n"
    "[nouns]\n"
    "dress\nlamp\nsofa\nheadphones\nbackpack\nsneakers\nwatch\nblender\njacket\nrug\n"
    "curtains\nmug\nkeyboard\nmonitor\ndesk\nchair\nblanket\npillow\nkettle\ntoaster\n"
    "bottle\numbrella\nwallet\nscarf\ngloves\nhelmet\ntent\ngrill\nvase\nmirror\n"
    "clock\nspeaker\ncamera\ntablet\ncharger\nrouter\nprinter\nnotebook\nstroller\ndrone\n"
    "[brands]\n"
    "acme\nzenith\nnorthpeak\nlumina\nvertex\nbluefin\noakline\nsundial\ncobalt\nmeridian\n"
    "harbor\nquartz\npinnacle\natlas\ncrescent\nember\nhorizon\njuniper\nkeystone\nmarble\n"
    "[sizes]\n"
    "small\nmedium\nlarge\nxs\nxl\nonesize\n";

inline Lexicons Lexicons::parse(std::istream& in) {
    Lexicons lex;
    std::vector<std::string>* cur = nullptr;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            const std::string name = line.substr(1, line.size() - 2);
            if (name == "visual_modifiers") cur = &lex.visual_modifiers;
            else if (name == "functional_modifiers") cur = &lex.functional_modifiers;
            else if (name == "vivid_colors") cur = &lex.vivid_colors;
            else if (name == "muted_colors") cur = &lex.muted_colors;
            else if (name == "vivid_styles") cur = &lex.vivid_styles;
            else if (name == "muted_styles") cur = &lex.muted_styles;
            else if (name == "nouns") cur = &lex.nouns;
            else if (name == "brands") cur = &lex.brands;
            else if (name == "sizes") cur = &lex.sizes;
            else throw std::runtime_error("Lexicons::parse: unknown section " + name);
            continue;
        }
        if (!cur) throw std::runtime_error("Lexicons::parse: token before any section");
        cur->push_back(line);
    }
    for (const auto* v : {&lex.visual_modifiers, &lex.functional_modifiers, &lex.vivid_colors,
                          &lex.muted_colors, &lex.vivid_styles, &lex.muted_styles, &lex.nouns,
                          &lex.brands, &lex.sizes})
        if (v->empty()) throw std::runtime_error("Lexicons::parse: a section is empty");
    return lex;
}

inline std::string Lexicons::serialize() const {
    std::ostringstream os;
    auto dump = [&](const char* name, const std::vector<std::string>& v) {
        os << '[' << name << "]\n";
        for (const auto& t : v) os << t << '\n';
    };
    dump("visual_modifiers", visual_modifiers);
    dump("functional_modifiers", functional_modifiers);
    dump("vivid_colors", vivid_colors);
    dump("muted_colors", muted_colors);
    dump("vivid_styles", vivid_styles);
    dump("muted_styles", muted_styles);
    dump("nouns", nouns);
    dump("brands", brands);
    dump("sizes", sizes);
    return os.str();
}

inline const Lexicons& Lexicons::builtin() {
    static const Lexicons lex = [] {
        std::istringstream is{std::string(kBuiltinLexiconText)};
        return parse(is);
    }();
    return lex;
}

struct CueStrength {
    double given_visual = 0.9;     // P(visual-lexicon modifier | v = 1)
    double given_nonvisual = 0.05; // P(visual-lexicon modifier | v = 0)
};

struct GeneratorConfig {
    std::size_t n = 10000;
    double positive_rate = 0.20; // rho: P(latent visual intent)
    double label_noise = 0.10;   // eta_n: symmetric flip probability
    std::size_t k = 10;          // products per interaction
    CueStrength cue_strength;
    double product_signal = 0.8; // P(vivid palette | v = 1); muted otherwise
    std::size_t category_count = 40;
    std::uint64_t seed = 1;

    void validate() const {
        for (double p : {positive_rate, label_noise, cue_strength.given_visual,
                         cue_strength.given_nonvisual, product_signal})
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("GeneratorConfig: probability out of [0,1]");
        if (n < 1 || k < 1 || category_count < 1)
            throw std::invalid_argument("GeneratorConfig: n, k and category_count must be >= 1");
    }
};

namespace detail {

struct Category {
    std::string noun;
    std::array<std::string, 3> brands;
    double price_lo, price_hi;
    std::string group;
    std::string type;
};

inline Category category_of(std::size_t c, const Lexicons& lex) {
    static constexpr std::array<std::string_view, 6> kTypes = {
        "apparel", "electronics", "home", "kitchen", "outdoor", "accessories"};
    static constexpr std::array<std::string_view, 6> kGroups = {
        "clothing", "devices", "furnishings", "cookware", "gear", "addons"};
    Category cat;
    cat.noun = lex.nouns[c % lex.nouns.size()];
    const std::size_t nb = lex.brands.size();
    cat.brands = {lex.brands[c % nb], lex.brands[(c + 7) % nb], lex.brands[(c + 13) % nb]};
    cat.price_lo = 5.0 + 3.0 * static_cast<double>(c % 40);
    cat.price_hi = cat.price_lo + 40.0 + static_cast<double>(c % 40);
    cat.type = std::string(kTypes[c % kTypes.size()]);
    cat.group = std::string(kGroups[c % kGroups.size()]);
    return cat;
}

inline double round_to(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

} // namespace detail

/// Generate a proxy-labeled corpus with a planted visual-intent signal:
/// the latent intent v drives the utterance modifier lexicon and, for
/// positives, a per-interaction vivid product palette; the label is v with
/// symmetric flip noise. Deterministic in the seed; interaction i draws from
/// a sub-stream derived from (seed, i).
inline Corpus generate(const GeneratorConfig& cfg, const Lexicons& lex = Lexicons::builtin()) {
    cfg.validate();
    Corpus corpus;
    corpus.interactions.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        Rng rng(derive_seed(cfg.seed, "interaction", i));
        const bool v = rng.bernoulli(cfg.positive_rate);
        const bool visual_modifier =
            rng.bernoulli(v ? cfg.cue_strength.given_visual : cfg.cue_strength.given_nonvisual);
        const auto& modifiers = visual_modifier ? lex.visual_modifiers : lex.functional_modifiers;
        const std::string modifier = modifiers[rng.next_index(modifiers.size())];
        const std::size_t cat_idx = rng.next_index(cfg.category_count);
        const detail::Category cat = detail::category_of(cat_idx, lex);

        Interaction it;
        it.utterance.text = "find me a " + modifier + " " + cat.noun;
        it.utterance.intent = rng.bernoulli(0.9) ? "product_search" : "browse";

        const bool vivid = v && rng.bernoulli(cfg.product_signal);
        const auto& colors = vivid ? lex.vivid_colors : lex.muted_colors;
        const auto& styles = vivid ? lex.vivid_styles : lex.muted_styles;
        for (std::size_t j = 0; j < cfg.k; ++j) {
            Product p;
            p.brand = cat.brands[rng.next_index(cat.brands.size())];
            p.color = colors[rng.next_index(colors.size())];
            p.style = styles[rng.next_index(styles.size())];
            p.title = p.brand + " " + p.color + " " + cat.noun;
            p.size = lex.sizes[rng.next_index(lex.sizes.size())];
            p.price = detail::round_to(rng.uniform(cat.price_lo, cat.price_hi), 2);
            p.reviews.count = static_cast<std::int64_t>(rng.next_index(501));
            p.reviews.rating = detail::round_to(rng.uniform(1.0, 5.0), 1);
            p.group = cat.group;
            p.type = cat.type;
            it.products.push_back(std::move(p));
        }
        bool y = v;
        if (rng.bernoulli(cfg.label_noise)) y = !y;
        it.label = y ? 1 : 0;
        corpus.interactions.push_back(std::move(it));
    }
    return corpus;
}

struct BayesReport {
    double precision = 0.0;
    double recall = 0.0;
    double f05 = 0.0;
    double posterior_threshold = 1.0;
};

/// Exact Bayes-optimal metrics over the generator's observation space.
/// Observations collapse to (modifier lexicon class) x (product palette
/// class); every other generated attribute is independent of the latent
/// intent given those two bits. The posterior is thresholded at the value
/// maximizing F_0.5, ties broken toward the higher threshold.
inline BayesReport bayes_report(const GeneratorConfig& cfg) {
    cfg.validate();
    const double rho = cfg.positive_rate;
    const double eta = cfg.label_noise;
    const double c1 = cfg.cue_strength.given_visual;
    const double c0 = cfg.cue_strength.given_nonvisual;
    const double s = cfg.product_signal;

    struct Cell {
        double mass;
        double posterior; // P(y = 1 | observation)
    };
    std::vector<Cell> cells;
    const double p_y1_given_v1 = 1.0 - eta;
    const double p_y1_given_v0 = eta;
    for (int m = 0; m < 2; ++m) {     // 1: visual-lexicon modifier
        for (int g = 0; g < 2; ++g) { // 1: vivid palette
            const double pm1 = m ? c1 : 1.0 - c1;
            const double pm0 = m ? c0 : 1.0 - c0;
            const double pg1 = g ? s : 1.0 - s;
            const double pg0 = g ? 0.0 : 1.0;
            const double mass1 = rho * pm1 * pg1;
            const double mass0 = (1.0 - rho) * pm0 * pg0;
            const double mass = mass1 + mass0;
            if (mass <= 0.0) continue;
            const double posterior = (mass1 * p_y1_given_v1 + mass0 * p_y1_given_v0) / mass;
            cells.push_back({mass, posterior});
        }
    }
    double total_pos = 0.0;
    for (const Cell& c : cells) total_pos += c.mass * c.posterior;

    // candidate thresholds: the distinct posteriors, highest first
    std::vector<double> thresholds;
    for (const Cell& c : cells) thresholds.push_back(c.posterior);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    BayesReport best; // the empty decision rule scores F = 0
    for (double t : thresholds) {
        double tp = 0.0, fp = 0.0;
        for (const Cell& c : cells) {
            if (c.posterior >= t) {
                tp += c.mass * c.posterior;
                fp += c.mass * (1.0 - c.posterior);
            }
        }
        const double prec = (tp + fp) > 0.0 ? tp / (tp + fp) : 0.0;
        const double rec = total_pos > 0.0 ? tp / total_pos : 0.0;
        const double f = f_beta(prec, rec, 0.5);
        if (f > best.f05) {
            best = {prec, rec, f, t};
        }
    }
    return best;
}

/// Expected observed positive rate under the generator:
/// rho (1 - eta) + (1 - rho) eta.
inline double expected_positive_rate(const GeneratorConfig& cfg) {
    return cfg.positive_rate * (1.0 - cfg.label_noise) +
           (1.0 - cfg.positive_rate) * cfg.label_noise;
}

} // namespace irp
