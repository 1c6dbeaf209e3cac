#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "irp/domain.hpp"
#include "irp/losses.hpp"
#include "irp/model.hpp"
#include "irp/optimizer.hpp"
#include "irp/rng.hpp"

namespace irp {

struct TrainConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    LossConfig loss;
    FeatureMask features = FeatureMask::all();
    SummarizerConfig summarizer;
    ModelConfig model; // vocab_size is filled in from the vocabulary at train time
    std::uint64_t seed = 7;
    bool stratified_batches = true;

    /// Small-corpus defaults: a from-scratch encoder this size wants a much
    /// larger step than a pretrained-backbone fine-tune.
    static TrainConfig desk_defaults() { return TrainConfig{}; }

    /// The published recipe: 20 epochs, batch 128, lr 2e-5, weight decay 1e-2.
    static TrainConfig paper_preset() {
        TrainConfig c;
        c.epochs = 20;
        c.batch_size = 128;
        c.learning_rate = 2e-5;
        c.weight_decay = 1e-2;
        return c;
    }

    void validate() const {
        if (epochs < 1 || batch_size < 1)
            throw std::invalid_argument("TrainConfig: epochs and batch_size must be >= 1");
        if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: negative learning rate");
        loss.validate();
        if (!summarizer.valid()) throw std::invalid_argument("TrainConfig: bad summarizer config");
    }
};

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f05 = 0.0;
    ConfusionCounts counts;
    double threshold = 0.5;
    std::string split = "unsplit";
};

struct EpochStats {
    double train_loss = 0.0;
    EvalReport validation;
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> history;
};

inline EvalReport make_report(std::span<const double> probs, std::span<const int> labels,
                              double threshold, const std::string& split) {
    EvalReport r;
    r.counts = confusion(probs, labels, threshold);
    r.precision = precision(r.counts);
    r.recall = recall(r.counts);
    r.f05 = f_beta(r.counts, 0.5);
    r.threshold = threshold;
    r.split = split;
    return r;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> plan_batches(const std::vector<int>& labels,
                                                          std::size_t batch_size,
                                                          bool stratified, Rng& rng) {
    const std::size_t n = labels.size();
    const std::size_t n_batches = (n + batch_size - 1) / batch_size;
    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    if (!stratified || pos.size() < n_batches || pos.empty() || neg.empty()) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t b = 0; b < n_batches; ++b) {
            const std::size_t lo = b * batch_size;
            const std::size_t hi = std::min(n, lo + batch_size);
            batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                 order.begin() + static_cast<std::ptrdiff_t>(hi));
        }
        return batches;
    }
    // one shuffled positive reserved per batch, remainder shuffled on top
    rng.shuffle(pos);
    std::vector<std::size_t> rest(pos.begin() + static_cast<std::ptrdiff_t>(n_batches), pos.end());
    rest.insert(rest.end(), neg.begin(), neg.end());
    rng.shuffle(rest);
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t size = std::min(batch_size, n - b * batch_size);
        std::vector<std::size_t> batch;
        batch.push_back(pos[b]);
        while (batch.size() < size) batch.push_back(rest[cursor++]);
        batches.push_back(std::move(batch));
    }
    return batches;
}

} // namespace detail

/// Per-example probabilities over a corpus, dropout off. Runs in padded
/// mini-batches; padding is attention-masked so the numbers are identical to
/// one-at-a-time inference.
inline std::vector<double> predict_probs(const ModelParams& params, const Corpus& corpus,
                                         const Vocabulary& vocab, const FeatureMask& mask,
                                         const SummarizerConfig& summarizer,
                                         std::size_t eval_batch = 64) {
    std::vector<double> probs;
    probs.reserve(corpus.size());
    std::vector<TokenSequence> chunk;
    auto flush = [&]() {
        if (chunk.empty()) return;
        Tape tape;
        BoundParams bound = bind_params(tape, params, false);
        Value out = forward_batch(tape, bound, chunk, false, nullptr);
        const Tensor& t = out.val();
        for (std::size_t i = 0; i < t.numel(); ++i) probs.push_back(t[i]);
        chunk.clear();
    };
    for (const auto& it : corpus.interactions) {
        chunk.push_back(build_input_sequence(it, vocab, mask, summarizer, params));
        if (chunk.size() == eval_batch) flush();
    }
    flush();
    return probs;
}

inline std::vector<int> corpus_labels(const Corpus& corpus) {
    std::vector<int> y;
    y.reserve(corpus.size());
    for (const auto& it : corpus.interactions) y.push_back(it.label);
    return y;
}

inline EvalReport evaluate(const ModelParams& params, const Corpus& split, const Vocabulary& vocab,
                           const FeatureMask& mask, const SummarizerConfig& summarizer,
                           double threshold) {
    if (split.size() == 0) throw std::invalid_argument("evaluate: empty split");
    const auto probs = predict_probs(params, split, vocab, mask, summarizer);
    const auto labels = corpus_labels(split);
    return make_report(probs, labels, threshold, to_string(split.split_tag));
}

/// F_beta-maximizing threshold over the candidate set {distinct predicted
/// probabilities} + {0.5}; ties break toward the higher threshold.
inline double calibrate_threshold_for_scores(std::span<const double> probs, std::span<const int> labels,
                                             double beta_f = 0.5) {
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw std::invalid_argument("calibrate_threshold: split must contain both classes");
    std::vector<double> cands(probs.begin(), probs.end());
    cands.push_back(0.5);
    std::sort(cands.begin(), cands.end(), std::greater<>());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    double best_t = 0.5, best_f = -1.0;
    for (double t : cands) {
        if (!(t > 0.0 && t < 1.0)) continue;
        const ConfusionCounts c = confusion(probs, labels, t);
        const double f = f_beta(precision(c), recall(c), beta_f);
        if (f > best_f) {
            best_f = f;
            best_t = t;
        }
    }
    return best_t;
}

inline double calibrate_threshold(const ModelParams& params, const Corpus& validation,
                                  const Vocabulary& vocab, const FeatureMask& mask,
                                  const SummarizerConfig& summarizer, double beta_f = 0.5) {
    if (validation.size() == 0) throw std::invalid_argument("calibrate_threshold: empty split");
    const auto probs = predict_probs(params, validation, vocab, mask, summarizer);
    const auto labels = corpus_labels(validation);
    return calibrate_threshold_for_scores(probs, labels, beta_f);
}

/// Deterministic training loop: seeded shuffles (stratified when flagged),
/// AdamW updates, dropout on, one validation report per epoch at threshold
/// 0.5. Fully reproducible from (config, seed).
inline TrainResult train(const TrainConfig& config, const CorpusSplits& splits,
                         const Vocabulary& vocab, std::ostream* log = nullptr) {
    config.validate();
    if (splits.train.size() == 0) throw std::invalid_argument("train: empty train split");

    ModelConfig mc = config.model;
    mc.vocab_size = vocab.size();
    mc.fusion_mode = config.summarizer.mode == SummarizerMode::mmr ? FusionMode::mmr
                                                                   : FusionMode::full_concat;
    TrainResult result{init_params(mc, config.seed), {}};
    ModelParams& params = result.params;

    const auto labels = corpus_labels(splits.train);
    const bool static_sequences = config.summarizer.mode == SummarizerMode::mean;
    std::vector<TokenSequence> cache;
    if (static_sequences) {
        cache.reserve(splits.train.size());
        for (const auto& it : splits.train.interactions)
            cache.push_back(build_input_sequence(it, vocab, config.features, config.summarizer, params));
    }

    AdamW optimizer({config.learning_rate, config.weight_decay});
    std::vector<Tensor*> param_ptrs;
    params.for_each_param([&](const std::string&, Tensor& t) { param_ptrs.push_back(&t); });

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
        Rng dropout_rng(derive_seed(config.seed, "dropout", epoch));
        const auto batches = detail::plan_batches(labels, config.batch_size,
                                                  config.stratified_batches, shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            std::vector<TokenSequence> seqs;
            std::vector<int> y;
            seqs.reserve(batches[b].size());
            for (std::size_t idx : batches[b]) {
                seqs.push_back(static_sequences
                                   ? cache[idx]
                                   : build_input_sequence(splits.train.interactions[idx], vocab,
                                                          config.features, config.summarizer, params));
                y.push_back(labels[idx]);
            }
            Tape tape;
            BoundParams bound = bind_params(tape, params, true);
            Value probs = forward_batch(tape, bound, seqs, true, &dropout_rng);
            Value loss = combined_loss_on_tape(tape, probs, y, config.loss);
            const double lval = loss.item();
            if (!std::isfinite(lval))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(b));
            tape.backward(loss);
            const auto grads = extract_grads(tape, bound);
            optimizer.step(param_ptrs, grads);
            loss_sum += lval;
        }
        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(batches.size());
        stats.validation = splits.validation.size() > 0
                               ? evaluate(params, splits.validation, vocab, config.features,
                                          config.summarizer, 0.5)
                               : EvalReport{};
        if (log)
            *log << "epoch " << (epoch + 1) << "/" << config.epochs
                 << " train_loss=" << stats.train_loss
                 << " val_p=" << stats.validation.precision
                 << " val_r=" << stats.validation.recall
                 << " val_f05=" << stats.validation.f05 << "\n";
        result.history.push_back(std::move(stats));
    }
    return result;
}

// --- ablation suites ---------------------------------------------------------

enum class AblationSuite { features, summarization, losses };

inline std::string to_string(AblationSuite s) {
    switch (s) {
        case AblationSuite::features: return "features";
        case AblationSuite::summarization: return "summarization";
        case AblationSuite::losses: return "losses";
    }
    return "features";
}

struct AblationCell {
    std::string suite;
    std::string row;
    std::string loss;
    EvalReport test;
    std::uint64_t seed = 0;
};

struct AblationReport {
    std::string suite;
    std::vector<AblationCell> cells;

    std::string to_text() const {
        std::string out = "suite: " + suite + "\n";
        char line[256];
        std::snprintf(line, sizeof(line), "%-28s %-10s %-10s %-10s %-10s %-12s %s\n",
                      "row", "loss", "precision", "recall", "f05", "threshold", "seed");
        out += line;
        for (const auto& c : cells) {
            std::snprintf(line, sizeof(line), "%-28s %-10s %-10.6f %-10.6f %-10.6f %-12.9f %llu\n",
                          c.row.c_str(), c.loss.c_str(), c.test.precision, c.test.recall,
                          c.test.f05, c.test.threshold,
                          static_cast<unsigned long long>(c.seed));
            out += line;
        }
        return out;
    }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& c : cells) {
            nlohmann::json j{{"suite", c.suite},       {"row", c.row},
                             {"loss", c.loss},         {"precision", c.test.precision},
                             {"recall", c.test.recall}, {"f05", c.test.f05},
                             {"threshold", c.test.threshold}, {"seed", c.seed}};
            out += j.dump();
            out += '\n';
        }
        return out;
    }
};

/// The seven feature combinations of the feature-contribution table, in its
/// row order.
inline std::vector<std::pair<std::string, FeatureMask>> feature_table_rows() {
    using F = Feature;
    return {
        {"utterance", FeatureMask{F::utterance}},
        {"intent", FeatureMask{F::intent}},
        {"title", FeatureMask{F::title}},
        {"utterance,intent", FeatureMask{F::utterance, F::intent}},
        {"intent,title", FeatureMask{F::intent, F::title}},
        {"utterance,title", FeatureMask{F::utterance, F::title}},
        {"utterance,intent,title", FeatureMask{F::utterance, F::intent, F::title}},
    };
}

namespace detail {

inline AblationCell run_cell(const std::string& suite, const std::string& row,
                             const TrainConfig& cfg, const CorpusSplits& splits,
                             const Vocabulary& vocab, std::ostream* log) {
    if (log) *log << "[ablate] " << suite << " / " << row << " / " << to_string(cfg.loss.kind) << "\n";
    TrainResult r = train(cfg, splits, vocab, nullptr);
    const double thr = calibrate_threshold(r.params, splits.validation, vocab, cfg.features,
                                           cfg.summarizer);
    AblationCell cell;
    cell.suite = suite;
    cell.row = row;
    cell.loss = to_string(cfg.loss.kind);
    cell.test = evaluate(r.params, splits.test, vocab, cfg.features, cfg.summarizer, thr);
    cell.seed = cfg.seed;
    return cell;
}

} // namespace detail

/// features: the 7 feature-combination rows; summarization: mean vs MMR with
/// all product attributes; losses: the full (8 feature configs) x (3 losses)
/// grid. Per-cell seeds derive deterministically from the base seed. Rows and
/// columns keep a fixed order regardless of metric values.
inline AblationReport run_ablation(AblationSuite suite, const TrainConfig& base,
                                   const CorpusSplits& splits, const Vocabulary& vocab,
                                   std::ostream* log = nullptr) {
    AblationReport report;
    report.suite = to_string(suite);
    const auto cell_seed = [&](const std::string& row, const std::string& loss) {
        return derive_seed(base.seed, report.suite + "/" + row + "/" + loss);
    };
    if (suite == AblationSuite::features) {
        for (const auto& [row, mask] : feature_table_rows()) {
            TrainConfig cfg = base;
            cfg.features = mask;
            cfg.seed = cell_seed(row, to_string(cfg.loss.kind));
            report.cells.push_back(detail::run_cell(report.suite, row, cfg, splits, vocab, log));
        }
    } else if (suite == AblationSuite::summarization) {
        for (const auto* row : {"mean", "mmr"}) {
            TrainConfig cfg = base;
            cfg.features = FeatureMask::all();
            cfg.summarizer.mode = std::string(row) == "mean" ? SummarizerMode::mean : SummarizerMode::mmr;
            cfg.seed = cell_seed(row, to_string(cfg.loss.kind));
            report.cells.push_back(detail::run_cell(report.suite, row, cfg, splits, vocab, log));
        }
    } else {
        auto rows = feature_table_rows();
        rows.emplace_back("irp", FeatureMask::all());
        for (const auto& [row, mask] : rows) {
            for (LossKind kind : {LossKind::bce, LossKind::precision, LossKind::sum}) {
                TrainConfig cfg = base;
                cfg.features = mask;
                cfg.loss.kind = kind;
                cfg.seed = cell_seed(row, to_string(kind));
                report.cells.push_back(detail::run_cell(report.suite, row, cfg, splits, vocab, log));
            }
        }
    }
    return report;
}

} // namespace irp
