// irp: command-line front end for the image-seeking intent prediction
// pipeline. Subcommands: gen-data, build-vocab, train, eval, ablate,
// predict, serve. Any failure exits nonzero with a one-line diagnostic.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "irp/irp.hpp"

namespace {

irp::json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    return irp::json::parse(is);
}

irp::Corpus read_corpus(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open corpus file " + path);
    return irp::load_corpus(is);
}

irp::Vocabulary read_vocab(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open vocabulary file " + path);
    return irp::Vocabulary::load(is);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << content;
    if (!os) throw std::runtime_error("write failure on " + path);
}

std::string format_report(const irp::EvalReport& r, const std::string& threshold_label) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "split: %s\n"
                  "threshold: %.12g (%s)\n"
                  "tp: %lld  fp: %lld  fn: %lld  tn: %lld\n"
                  "precision: %.6f\n"
                  "recall: %.6f\n"
                  "f05: %.6f\n",
                  r.split.c_str(), r.threshold, threshold_label.c_str(),
                  static_cast<long long>(r.counts.tp), static_cast<long long>(r.counts.fp),
                  static_cast<long long>(r.counts.fn), static_cast<long long>(r.counts.tn),
                  r.precision, r.recall, r.f05);
    return buf;
}

struct TrainFileConfig {
    irp::TrainConfig train;
    irp::SplitFractions split;
};

TrainFileConfig load_train_config(const std::string& path) {
    TrainFileConfig cfg;
    if (path.empty()) return cfg;
    const irp::json j = read_json_file(path);
    cfg.train = j.get<irp::TrainConfig>();
    if (j.contains("split")) cfg.split = j.at("split").get<irp::SplitFractions>();
    return cfg;
}

int cmd_gen_data(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out, const std::string& lexicon_path) {
    irp::GeneratorConfig cfg;
    if (!config_path.empty()) cfg = read_json_file(config_path).get<irp::GeneratorConfig>();
    if (seed) cfg.seed = *seed;
    irp::Lexicons lex = irp::Lexicons::builtin();
    if (!lexicon_path.empty()) {
        std::ifstream is(lexicon_path);
        if (!is) throw std::runtime_error("cannot open lexicon file " + lexicon_path);
        lex = irp::Lexicons::parse(is);
    }
    const irp::Corpus corpus = irp::generate(cfg, lex);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + out + " for writing");
    irp::save_corpus(corpus, os);
    std::cerr << "wrote " << corpus.size() << " interactions to " << out << "\n";
    return 0;
}

int cmd_build_vocab(const std::string& corpus_path, std::size_t min_freq, std::size_t max_size,
                    const std::string& out) {
    const irp::Corpus corpus = read_corpus(corpus_path);
    const irp::Vocabulary vocab = irp::build_vocab(corpus, min_freq, max_size);
    write_file(out, vocab.serialize());
    std::cerr << "vocabulary: " << vocab.size() << " tokens -> " << out << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& vocab_path,
              const std::string& config_path, const std::string& out) {
    const TrainFileConfig cfg = load_train_config(config_path);
    const irp::Corpus corpus = read_corpus(corpus_path);
    const irp::Vocabulary vocab = read_vocab(vocab_path);
    const std::uint64_t split_seed = irp::derive_seed(cfg.train.seed, "split");
    const irp::CorpusSplits splits = irp::split_corpus(corpus, cfg.split, split_seed);
    irp::TrainResult result = irp::train(cfg.train, splits, vocab, &std::cerr);

    double threshold = 0.5;
    if (splits.validation.size() > 0) {
        try {
            threshold = irp::calibrate_threshold(result.params, splits.validation, vocab,
                                                 cfg.train.features, cfg.train.summarizer);
        } catch (const std::exception& e) {
            std::cerr << "calibration skipped: " << e.what() << "\n";
        }
    }
    irp::CheckpointMeta meta;
    meta.summarizer = cfg.train.summarizer;
    meta.features = cfg.train.features;
    meta.threshold = threshold;
    meta.vocab_digest = irp::vocab_digest_hex(vocab);
    meta.vocab_tokens = vocab.tokens();
    meta.split = cfg.split;
    meta.split_seed = split_seed;
    irp::save_checkpoint(result.params, meta, out);
    std::cerr << "calibrated threshold: " << threshold << "\ncheckpoint -> " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path, const std::string& split,
             const std::string& vocab_path, const std::string& out) {
    irp::Checkpoint ckpt = irp::load_checkpoint(ckpt_path);
    if (!vocab_path.empty()) irp::require_vocab_match(ckpt, read_vocab(vocab_path));
    const irp::Vocabulary vocab = ckpt.vocabulary();
    const irp::Corpus corpus = read_corpus(corpus_path);

    irp::Corpus chosen;
    if (split == "all") {
        chosen = corpus;
    } else {
        irp::CorpusSplits splits = irp::split_corpus(corpus, ckpt.meta.split, ckpt.meta.split_seed);
        if (split == "train") chosen = std::move(splits.train);
        else if (split == "validation") chosen = std::move(splits.validation);
        else if (split == "test") chosen = std::move(splits.test);
        else throw std::runtime_error("unknown split: " + split);
    }
    const auto probs = irp::predict_probs(ckpt.params, chosen, vocab, ckpt.meta.features,
                                          ckpt.meta.summarizer);
    const auto labels = irp::corpus_labels(chosen);
    const std::string tag = split == "all" ? "all" : split;
    irp::EvalReport calibrated = irp::make_report(probs, labels, ckpt.meta.threshold, tag);
    irp::EvalReport at_half = irp::make_report(probs, labels, 0.5, tag);
    std::string text = format_report(calibrated, "calibrated");
    text += format_report(at_half, "default");
    std::cout << text;
    if (!out.empty()) write_file(out, text);
    return 0;
}

int cmd_ablate(const std::string& suite_name, const std::string& corpus_path,
               const std::string& vocab_path, const std::string& config_path,
               const std::string& out) {
    irp::AblationSuite suite;
    if (suite_name == "features") suite = irp::AblationSuite::features;
    else if (suite_name == "summarization") suite = irp::AblationSuite::summarization;
    else if (suite_name == "losses") suite = irp::AblationSuite::losses;
    else throw std::runtime_error("unknown suite: " + suite_name);

    const TrainFileConfig cfg = load_train_config(config_path);
    const irp::Corpus corpus = read_corpus(corpus_path);
    const irp::Vocabulary vocab = read_vocab(vocab_path);
    const irp::CorpusSplits splits =
        irp::split_corpus(corpus, cfg.split, irp::derive_seed(cfg.train.seed, "split"));
    const irp::AblationReport report = irp::run_ablation(suite, cfg.train, splits, vocab, &std::cerr);
    std::cout << report.to_text();
    if (!out.empty()) {
        write_file(out + ".txt", report.to_text());
        write_file(out + ".jsonl", report.to_jsonl());
        std::cerr << "report -> " << out << ".txt, " << out << ".jsonl\n";
    }
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input) {
    irp::Checkpoint ckpt = irp::load_checkpoint(ckpt_path);
    const irp::Vocabulary vocab = ckpt.vocabulary();
    std::vector<std::string> lines;
    if (!input.empty() && input.front() == '{') {
        lines.push_back(input);
    } else {
        std::ifstream is(input);
        if (!is) throw std::runtime_error("cannot open input file " + input);
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) lines.push_back(line);
    }
    for (const auto& line : lines) {
        irp::json body = irp::json::parse(line, nullptr, false);
        if (body.is_discarded()) throw std::runtime_error("input record is not valid JSON");
        std::vector<std::string> errors;
        const irp::Interaction it =
            irp::detail::parse_predict_request(body, ckpt.meta.features, errors);
        if (!errors.empty()) {
            std::string msg = errors[0];
            for (std::size_t i = 1; i < errors.size(); ++i) msg += "; " + errors[i];
            throw std::runtime_error(msg);
        }
        const irp::Prediction p = irp::predict(ckpt.params, it, vocab, ckpt.meta.features,
                                               ckpt.meta.summarizer, ckpt.meta.threshold);
        std::cout << irp::json{{"probability", p.probability},
                               {"decision", p.decision},
                               {"threshold", ckpt.meta.threshold},
                               {"model_version", ckpt.meta.model_version}}
                         .dump()
                  << "\n";
    }
    return 0;
}

int cmd_serve(const std::string& ckpt_path, int port) {
    auto ctx = std::make_shared<irp::ServeContext>(irp::load_checkpoint(ckpt_path));
    httplib::Server server;
    irp::configure_server(server, ctx);
    std::cerr << "model " << ctx->ckpt.meta.model_version << " listening on port " << port << "\n";
    if (!server.listen("0.0.0.0", port))
        throw std::runtime_error("cannot listen on port " + std::to_string(port));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"image-seeking intent prediction pipeline"};
    app.require_subcommand(1);

    std::string config_path, out, corpus_path, vocab_path, ckpt_path, input, split = "test";
    std::string lexicon_path, suite;
    std::optional<std::uint64_t> seed;
    std::size_t min_freq = 2, max_size = 20000;
    int port = 8080;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic proxy-labeled corpus");
    gen->add_option("--config", config_path, "generator config JSON");
    gen->add_option("--seed", seed, "override the config seed");
    gen->add_option("--out", out, "output corpus path")->required();
    gen->add_option("--lexicons", lexicon_path, "lexicon resource file");

    auto* bv = app.add_subcommand("build-vocab", "build a vocabulary from a corpus");
    bv->add_option("--corpus", corpus_path)->required();
    bv->add_option("--min-freq", min_freq, "minimum token frequency");
    bv->add_option("--max-size", max_size, "vocabulary size cap");
    bv->add_option("--out", out)->required();

    auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    tr->add_option("--corpus", corpus_path)->required();
    tr->add_option("--vocab", vocab_path)->required();
    tr->add_option("--config", config_path, "train config JSON");
    tr->add_option("--out", out, "checkpoint path")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a corpus split");
    ev->add_option("--ckpt", ckpt_path)->required();
    ev->add_option("--corpus", corpus_path)->required();
    ev->add_option("--split", split, "train|validation|test|all");
    ev->add_option("--vocab", vocab_path, "cross-check the vocabulary digest");
    ev->add_option("--out", out, "also write the report to a file");

    auto* ab = app.add_subcommand("ablate", "run an ablation suite");
    ab->add_option("--suite", suite, "features|summarization|losses")->required();
    ab->add_option("--corpus", corpus_path)->required();
    ab->add_option("--vocab", vocab_path)->required();
    ab->add_option("--config", config_path, "base train config JSON");
    ab->add_option("--out", out, "report path prefix (.txt and .jsonl)");

    auto* pr = app.add_subcommand("predict", "predict for a record file or inline JSON record");
    pr->add_option("--ckpt", ckpt_path)->required();
    pr->add_option("--input", input, "interaction file or inline record")->required();

    auto* sv = app.add_subcommand("serve", "run the HTTP prediction service");
    sv->add_option("--ckpt", ckpt_path)->required();
    sv->add_option("--port", port)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, seed, out, lexicon_path);
        if (bv->parsed()) return cmd_build_vocab(corpus_path, min_freq, max_size, out);
        if (tr->parsed()) return cmd_train(corpus_path, vocab_path, config_path, out);
        if (ev->parsed()) return cmd_eval(ckpt_path, corpus_path, split, vocab_path, out);
        if (ab->parsed()) return cmd_ablate(suite, corpus_path, vocab_path, config_path, out);
        if (pr->parsed()) return cmd_predict(ckpt_path, input);
        if (sv->parsed()) return cmd_serve(ckpt_path, port);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
