#pragma once

#include <string>

#include <json.hpp>

#include "irp/losses.hpp"
#include "irp/model.hpp"
#include "irp/summarize.hpp"
#include "irp/synthetic.hpp"
#include "irp/train.hpp"

namespace irp {

// JSON bindings for the configuration structs surfaced through CLI config
// files and the checkpoint config block. Parsing starts from the struct's
// defaults; unknown keys are rejected nowhere (forward compatibility).

inline void to_json(json& j, const SummarizerConfig& c) {
    j = json{{"mode", c.mode == SummarizerMode::mmr ? "mmr" : "mean"},
             {"mmr_lambda", c.mmr_lambda},
             {"mmr_select_n", c.mmr_select_n},
             {"decimals", c.decimals}};
}

inline void from_json(const json& j, SummarizerConfig& c) {
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "mean") c.mode = SummarizerMode::mean;
        else if (m == "mmr") c.mode = SummarizerMode::mmr;
        else throw std::invalid_argument("summarizer mode must be \"mean\" or \"mmr\"");
    }
    if (j.contains("mmr_lambda")) c.mmr_lambda = j.at("mmr_lambda").get<double>();
    if (j.contains("mmr_select_n")) c.mmr_select_n = j.at("mmr_select_n").get<std::size_t>();
    if (j.contains("decimals")) c.decimals = j.at("decimals").get<int>();
    if (!c.valid()) throw std::invalid_argument("invalid summarizer config");
}

inline void to_json(json& j, const LossConfig& c) {
    j = json{{"kind", to_string(c.kind)},
             {"alpha", c.alpha},
             {"beta", c.beta_w},
             {"epsilon", c.epsilon}};
}

inline void from_json(const json& j, LossConfig& c) {
    if (j.contains("kind")) {
        const std::string k = j.at("kind").get<std::string>();
        if (k == "bce") c.kind = LossKind::bce;
        else if (k == "precision") c.kind = LossKind::precision;
        else if (k == "sum") c.kind = LossKind::sum;
        else throw std::invalid_argument("loss kind must be bce, precision or sum");
    }
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) c.beta_w = j.at("beta").get<double>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    c.validate();
}

inline void to_json(json& j, const ModelConfig& c) {
    j = json{{"vocab_size", c.vocab_size},
             {"d_model", c.d_model},
             {"n_layers", c.n_layers},
             {"n_heads", c.n_heads},
             {"d_ff", c.d_ff},
             {"max_len", c.max_len},
             {"dropout", c.dropout},
             {"fusion_mode", c.fusion_mode == FusionMode::mmr ? "mmr" : "full_concat"}};
}

inline void from_json(const json& j, ModelConfig& c) {
    if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<std::size_t>();
    if (j.contains("d_model")) c.d_model = j.at("d_model").get<std::size_t>();
    if (j.contains("n_layers")) c.n_layers = j.at("n_layers").get<std::size_t>();
    if (j.contains("n_heads")) c.n_heads = j.at("n_heads").get<std::size_t>();
    if (j.contains("d_ff")) c.d_ff = j.at("d_ff").get<std::size_t>();
    if (j.contains("max_len")) c.max_len = j.at("max_len").get<std::size_t>();
    if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
    if (j.contains("fusion_mode")) {
        const std::string m = j.at("fusion_mode").get<std::string>();
        if (m == "full_concat") c.fusion_mode = FusionMode::full_concat;
        else if (m == "mmr") c.fusion_mode = FusionMode::mmr;
        else throw std::invalid_argument("fusion_mode must be \"full_concat\" or \"mmr\"");
    }
}

inline void to_json(json& j, const SplitFractions& f) {
    j = json{{"train", f.train}, {"validation", f.validation}, {"test", f.test}};
}

inline void from_json(const json& j, SplitFractions& f) {
    if (j.contains("train")) f.train = j.at("train").get<double>();
    if (j.contains("validation")) f.validation = j.at("validation").get<double>();
    if (j.contains("test")) f.test = j.at("test").get<double>();
}

inline void to_json(json& j, const TrainConfig& c) {
    j = json{{"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"learning_rate", c.learning_rate},
             {"weight_decay", c.weight_decay},
             {"loss", c.loss},
             {"features", c.features.names()},
             {"summarizer", c.summarizer},
             {"model", c.model},
             {"seed", c.seed},
             {"stratified_batches", c.stratified_batches}};
}

inline void from_json(const json& j, TrainConfig& c) {
    if (j.contains("preset")) {
        const std::string p = j.at("preset").get<std::string>();
        if (p == "paper") c = TrainConfig::paper_preset();
        else if (p == "desk") c = TrainConfig::desk_defaults();
        else throw std::invalid_argument("preset must be \"desk\" or \"paper\"");
    }
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("loss")) c.loss = j.at("loss").get<LossConfig>();
    if (j.contains("features"))
        c.features = FeatureMask::from_names(j.at("features").get<std::vector<std::string>>());
    if (j.contains("summarizer")) c.summarizer = j.at("summarizer").get<SummarizerConfig>();
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("stratified_batches")) c.stratified_batches = j.at("stratified_batches").get<bool>();
    c.validate();
}

inline void to_json(json& j, const GeneratorConfig& c) {
    j = json{{"n", c.n},
             {"positive_rate", c.positive_rate},
             {"label_noise", c.label_noise},
             {"k", c.k},
             {"cue_strength", json{{"given_visual", c.cue_strength.given_visual},
                                   {"given_nonvisual", c.cue_strength.given_nonvisual}}},
             {"product_signal", c.product_signal},
             {"category_count", c.category_count},
             {"seed", c.seed}};
}

inline void from_json(const json& j, GeneratorConfig& c) {
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("positive_rate")) c.positive_rate = j.at("positive_rate").get<double>();
    if (j.contains("label_noise")) c.label_noise = j.at("label_noise").get<double>();
    if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
    if (j.contains("cue_strength")) {
        const json& cs = j.at("cue_strength");
        if (cs.contains("given_visual")) c.cue_strength.given_visual = cs.at("given_visual").get<double>();
        if (cs.contains("given_nonvisual"))
            c.cue_strength.given_nonvisual = cs.at("given_nonvisual").get<double>();
    }
    if (j.contains("product_signal")) c.product_signal = j.at("product_signal").get<double>();
    if (j.contains("category_count")) c.category_count = j.at("category_count").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
}

} // namespace irp
