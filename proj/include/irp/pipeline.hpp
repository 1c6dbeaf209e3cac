#pragma once

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "irp/domain.hpp"
#include "irp/pipeline_types.hpp"
#include "irp/summarize.hpp"
#include "irp/tensor.hpp"
#include "irp/text.hpp"

namespace irp {

/// Word-level vocabulary over utterance text, intent labels and the product
/// text fields. Ids are assigned by descending frequency, ties broken
/// lexicographically, capped at max_size entries. Pure function of
/// (corpus, min_freq, max_size).
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_freq = 2,
                              std::size_t max_size = 20000) {
    if (corpus.size() == 0) throw std::invalid_argument("build_vocab: empty corpus");
    std::unordered_map<std::string, std::size_t> freq;
    auto count_text = [&](const std::string& text) {
        for (auto& t : normalize(text)) ++freq[t];
    };
    for (const auto& it : corpus.interactions) {
        count_text(it.utterance.text);
        const std::string intent = normalize_intent(it.utterance.intent);
        if (!intent.empty()) ++freq[intent];
        for (const auto& p : it.products) {
            count_text(p.title);
            count_text(p.brand);
            count_text(p.size);
            count_text(p.color);
            count_text(p.style);
            count_text(p.group);
            count_text(p.type);
        }
    }
    std::vector<std::pair<std::string, std::size_t>> entries;
    entries.reserve(freq.size());
    for (auto& [tok, n] : freq)
        if (n >= min_freq) entries.emplace_back(tok, n);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [tok, n] : entries) {
        if (vocab.size() >= max_size) break;
        vocab.add(tok);
    }
    return vocab;
}

/// f_up: [CLS], utterance tokens, [SEP], intent token, [SEP].
/// Features outside the mask are omitted together with their [SEP]; an
/// intent-only input is [CLS] intent [SEP].
inline TokenSequence tokenize_utterance(const Utterance& u, const Vocabulary& vocab,
                                        const FeatureMask& mask = FeatureMask{Feature::utterance, Feature::intent},
                                        std::ostream* warn = nullptr) {
    TokenSequence seq;
    seq.push(kClsId, Segment::special);
    if (mask.has(Feature::utterance)) {
        const auto tokens = normalize(u.text);
        if (tokens.empty() && warn)
            *warn << "tokenize_utterance: utterance empty after normalization\n";
        for (const auto& t : tokens) seq.push(vocab.id_of(t), Segment::utterance);
        seq.push(kSepId, Segment::special);
    }
    if (mask.has(Feature::intent)) {
        const std::string intent = normalize_intent(u.intent);
        if (!intent.empty()) seq.push(vocab.id_of(intent), Segment::utterance);
        seq.push(kSepId, Segment::special);
    }
    return seq;
}

/// f_pp: [SEP], field tokens, [SEP], ..., [SEP] with fields in the fixed
/// order title, brand, size, color, reviews, price, style, group, type.
/// Empty fields collapse into a single delimiter.
inline TokenSequence tokenize_product_summary(const SummaryRecord& s, const Vocabulary& vocab,
                                              int decimals = 0) {
    TokenSequence seq;
    seq.push(kSepId, Segment::special);
    auto add_text = [&](const std::string& text) {
        const auto tokens = normalize(text);
        if (tokens.empty()) return;
        for (const auto& t : tokens) seq.push(vocab.id_of(t), Segment::product);
        seq.push(kSepId, Segment::special);
    };
    auto add_token = [&](const std::string& tok) {
        seq.push(vocab.id_of(tok), Segment::product);
    };
    if (s.mask.has(Feature::title)) add_text(s.title);
    if (s.mask.has(Feature::brand)) add_text(s.brand);
    if (s.mask.has(Feature::size)) add_text(s.size);
    if (s.mask.has(Feature::color)) add_text(s.color);
    if (s.mask.has(Feature::reviews) && s.review_count && s.rating) {
        add_token(render_numeric_token("reviews", *s.review_count, decimals));
        add_token(render_numeric_token("rating", *s.rating, decimals));
        seq.push(kSepId, Segment::special);
    }
    if (s.mask.has(Feature::price) && s.price) {
        add_token(render_numeric_token("price", *s.price, decimals));
        seq.push(kSepId, Segment::special);
    }
    if (s.mask.has(Feature::style)) add_text(s.style);
    if (s.mask.has(Feature::group)) add_text(s.group);
    if (s.mask.has(Feature::type)) add_text(s.type);
    if (seq.size() == 1) seq.push(kSepId, Segment::special);
    return seq;
}

namespace detail {

inline void append_field_tokens(std::vector<std::string>& pool, const Product& p, Feature f,
                                int decimals) {
    switch (f) {
        case Feature::title: for (auto& t : normalize(p.title)) pool.push_back(std::move(t)); break;
        case Feature::brand: for (auto& t : normalize(p.brand)) pool.push_back(std::move(t)); break;
        case Feature::size: for (auto& t : normalize(p.size)) pool.push_back(std::move(t)); break;
        case Feature::color: for (auto& t : normalize(p.color)) pool.push_back(std::move(t)); break;
        case Feature::reviews:
            pool.push_back(render_numeric_token("reviews", static_cast<double>(p.reviews.count), decimals));
            pool.push_back(render_numeric_token("rating", p.reviews.rating, decimals));
            break;
        case Feature::price: pool.push_back(render_numeric_token("price", p.price, decimals)); break;
        case Feature::style: for (auto& t : normalize(p.style)) pool.push_back(std::move(t)); break;
        case Feature::group: for (auto& t : normalize(p.group)) pool.push_back(std::move(t)); break;
        case Feature::type: for (auto& t : normalize(p.type)) pool.push_back(std::move(t)); break;
        default: break;
    }
}

inline std::vector<double> embedding_row(const Tensor& table, std::int32_t id) {
    std::vector<double> v(table.cols());
    for (std::size_t c = 0; c < table.cols(); ++c) v[c] = table.at(static_cast<std::size_t>(id), c);
    return v;
}

} // namespace detail

/// MMR path of the product pipeline: build the deduplicated token pool over
/// all active fields of all k products (rank-then-field order), score it
/// against the mean utterance-token embedding, and keep the MMR selection.
/// Output layout: [SEP], selected tokens in selection order, [SEP].
inline TokenSequence select_product_tokens(const std::vector<Product>& products,
                                           const TokenSequence& utterance_seq,
                                           const Tensor& embeddings,
                                           const SummarizerConfig& config,
                                           const FeatureMask& mask,
                                           const Vocabulary& vocab,
                                           std::ostream* warn = nullptr) {
    std::vector<std::string> raw_pool;
    for (const auto& p : products)
        for (Feature f : kProductFeatures)
            if (mask.has(f)) detail::append_field_tokens(raw_pool, p, f, config.decimals);

    // dedupe by encoded id, first occurrence kept
    std::vector<std::int32_t> pool;
    for (const auto& tok : raw_pool) {
        const std::int32_t id = vocab.id_of(tok);
        bool seen = false;
        for (std::int32_t existing : pool)
            if (existing == id) { seen = true; break; }
        if (!seen) pool.push_back(id);
    }

    TokenSequence seq;
    seq.push(kSepId, Segment::special);
    if (pool.empty()) {
        if (warn) *warn << "select_product_tokens: empty candidate pool\n";
        seq.push(kSepId, Segment::special);
        return seq;
    }

    // query vector: mean embedding of non-special utterance positions
    std::vector<double> query(embeddings.cols(), 0.0);
    std::size_t n_utt = 0;
    for (std::size_t i = 0; i < utterance_seq.size(); ++i) {
        if (utterance_seq.segment[i] != Segment::utterance) continue;
        for (std::size_t c = 0; c < embeddings.cols(); ++c)
            query[c] += embeddings.at(static_cast<std::size_t>(utterance_seq.ids[i]), c);
        ++n_utt;
    }
    if (n_utt > 0)
        for (double& q : query) q /= static_cast<double>(n_utt);

    std::vector<std::vector<double>> cands;
    cands.reserve(pool.size());
    for (std::int32_t id : pool) cands.push_back(detail::embedding_row(embeddings, id));

    for (std::size_t idx : mmr_select(cands, query, config.mmr_lambda, config.mmr_select_n))
        seq.push(pool[idx], Segment::product);
    seq.push(kSepId, Segment::special);
    return seq;
}

/// f_fusion: utterance sequence followed by the product sequence with its
/// leading [SEP] dropped. If the result exceeds max_len, product tokens are
/// truncated from the tail, always keeping the final [SEP]; utterance tokens
/// are never truncated.
inline TokenSequence fuse(const TokenSequence& seq_u, const std::optional<TokenSequence>& seq_p,
                          std::size_t max_len) {
    if (seq_u.size() == 0 || seq_u.ids[0] != kClsId)
        throw std::invalid_argument("fuse: utterance sequence must start with [CLS]");
    if (seq_u.size() > max_len)
        throw std::invalid_argument("fuse: utterance sequence alone exceeds max_len");
    TokenSequence x = seq_u;
    if (!seq_p || seq_p->size() == 0) return x;

    const TokenSequence& p = *seq_p;
    std::size_t start = (p.ids[0] == kSepId) ? 1 : 0;
    const std::size_t avail = p.size() - start;
    const std::size_t budget = max_len - x.size();
    if (avail <= budget) {
        for (std::size_t i = start; i < p.size(); ++i) x.push(p.ids[i], p.segment[i]);
    } else if (budget > 0) {
        for (std::size_t i = start; i < start + budget - 1; ++i) x.push(p.ids[i], p.segment[i]);
        x.push(kSepId, Segment::special);
    }
    return x;
}

} // namespace irp
