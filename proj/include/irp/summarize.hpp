#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "irp/domain.hpp"
#include "irp/pipeline_types.hpp"

namespace irp {

enum class SummarizerMode { mean, mmr };

struct SummarizerConfig {
    SummarizerMode mode = SummarizerMode::mean;
    double mmr_lambda = 0.7;
    std::size_t mmr_select_n = 16;
    int decimals = 0; // numeric rendering precision

    bool valid() const {
        return mmr_lambda >= 0.0 && mmr_lambda <= 1.0 && mmr_select_n >= 1 && decimals >= 0;
    }
};

/// Field-wise aggregate of the top-k products: numeric fields hold a mean,
/// text fields hold a plurality value (ties broken by best retrieval rank).
struct SummaryRecord {
    std::string title;
    std::string brand;
    std::string size;
    std::string color;
    std::string style;
    std::string group;
    std::string type;
    std::optional<double> price;
    std::optional<double> review_count;
    std::optional<double> rating;
    FeatureMask mask;
};

/// Rounded numeric token, e.g. price 20.0 at 0 decimals -> "price_20".
inline std::string render_numeric_token(std::string_view field, double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return std::string(field) + "_" + buf;
}

namespace detail {

// Plurality over non-empty values; ties go to the value first seen at the
// lowest rank.
inline std::string plurality(const std::vector<Product>& products,
                             std::string Product::* field) {
    struct Entry { std::size_t count = 0; std::size_t first_rank = 0; };
    std::map<std::string, Entry> counts;
    for (std::size_t r = 0; r < products.size(); ++r) {
        const std::string& v = products[r].*field;
        if (v.empty()) continue;
        auto [it, inserted] = counts.try_emplace(v);
        if (inserted) it->second.first_rank = r;
        ++it->second.count;
    }
    std::string best;
    Entry best_e;
    for (const auto& [v, e] : counts) {
        if (best.empty() || e.count > best_e.count ||
            (e.count == best_e.count && e.first_rank < best_e.first_rank)) {
            best = v;
            best_e = e;
        }
    }
    return best;
}

} // namespace detail

/// f_sum: aggregate the top-k product records field by field.
inline SummaryRecord summarize_mean(const std::vector<Product>& products, const FeatureMask& mask) {
    if (products.empty()) throw std::invalid_argument("summarize_mean: empty product list");
    SummaryRecord s;
    s.mask = mask;
    const double k = static_cast<double>(products.size());
    if (mask.has(Feature::title)) s.title = detail::plurality(products, &Product::title);
    if (mask.has(Feature::brand)) s.brand = detail::plurality(products, &Product::brand);
    if (mask.has(Feature::size)) s.size = detail::plurality(products, &Product::size);
    if (mask.has(Feature::color)) s.color = detail::plurality(products, &Product::color);
    if (mask.has(Feature::style)) s.style = detail::plurality(products, &Product::style);
    if (mask.has(Feature::group)) s.group = detail::plurality(products, &Product::group);
    if (mask.has(Feature::type)) s.type = detail::plurality(products, &Product::type);
    if (mask.has(Feature::price)) {
        double sum = 0.0;
        for (const auto& p : products) sum += p.price;
        s.price = sum / k;
    }
    if (mask.has(Feature::reviews)) {
        double csum = 0.0, rsum = 0.0;
        for (const auto& p : products) {
            csum += static_cast<double>(p.reviews.count);
            rsum += p.reviews.rating;
        }
        s.review_count = csum / k;
        s.rating = rsum / k;
    }
    for (auto v : {s.price, s.review_count, s.rating})
        if (v && !std::isfinite(*v)) throw std::runtime_error("summarize_mean: non-finite aggregate");
    return s;
}

/// Cosine similarity; 0 by convention when either vector has zero norm.
inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

/// Greedy maximal marginal relevance. At each step picks the unselected
/// candidate maximizing lambda*cos(d, query) - (1-lambda)*max_s cos(d, s);
/// the first pick maximizes pure relevance. Ties break toward the lowest
/// index. Returns min(n, |candidates|) indices in selection order.
inline std::vector<std::size_t> mmr_select(const std::vector<std::vector<double>>& candidates,
                                           const std::vector<double>& query,
                                           double lambda, std::size_t n) {
    if (candidates.empty()) throw std::invalid_argument("mmr_select: empty candidate list");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("mmr_select: lambda out of [0,1]");
    if (n < 1) throw std::invalid_argument("mmr_select: n must be >= 1");
    const std::size_t m = candidates.size();
    std::vector<double> rel(m);
    for (std::size_t i = 0; i < m; ++i) rel[i] = cosine(candidates[i], query);
    std::vector<bool> selected(m, false);
    // running max similarity to the selected set; meaningful once non-empty
    std::vector<double> max_sim(m, 0.0);
    std::vector<std::size_t> order;
    const std::size_t want = std::min(n, m);
    for (std::size_t step = 0; step < want; ++step) {
        std::size_t best = m;
        double best_score = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (selected[i]) continue;
            const double score = step == 0 ? rel[i]
                                           : lambda * rel[i] - (1.0 - lambda) * max_sim[i];
            if (best == m || score > best_score) {
                best = i;
                best_score = score;
            }
        }
        selected[best] = true;
        order.push_back(best);
        for (std::size_t i = 0; i < m; ++i) {
            if (selected[i]) continue;
            const double c = cosine(candidates[i], candidates[best]);
            max_sim[i] = step == 0 ? c : std::max(max_sim[i], c);
        }
    }
    return order;
}

} // namespace irp
