#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "irp/checkpoint.hpp"
#include "irp/domain.hpp"
#include "irp/model.hpp"

namespace irp {

/// Loaded model plus everything needed to answer predictions. Read-only
/// after construction; shared across request handler threads.
struct ServeContext {
    Checkpoint ckpt;
    Vocabulary vocab;

    explicit ServeContext(Checkpoint c) : ckpt(std::move(c)), vocab(ckpt.vocabulary()) {}
};

namespace detail {

/// Parse a prediction request: an interaction record without a label. A
/// label, if present, is ignored. Products are required only when the model
/// consumes product features.
inline Interaction parse_predict_request(const json& body, const FeatureMask& features,
                                         std::vector<std::string>& errors) {
    json record = body;
    if (!record.is_object()) {
        errors.push_back("request body is not a JSON object");
        return {};
    }
    record["label"] = 0; // label is not part of the request schema
    if (!record.contains("products")) {
        if (features.any_product_field()) {
            errors.push_back("missing field: products");
            return {};
        }
        // utterance-only models accept product-less requests
        record["products"] = json::array({to_json(Product{.title = "none"})});
        ValidationResult res = validate_interaction(record);
        if (!res.ok()) {
            errors = res.errors;
            return {};
        }
        res.interaction->products.clear();
        return *res.interaction;
    }
    ValidationResult res = validate_interaction(record);
    if (!res.ok()) {
        errors = res.errors;
        return {};
    }
    return *res.interaction;
}

} // namespace detail

/// Install the prediction routes on a server:
///   POST /predict  -> {probability, decision, threshold, model_version}
///   GET  /healthz  -> {status, model_version}
/// Malformed bodies get a 400 with a field-naming diagnostic. Weights are
/// immutable for the process lifetime, so identical requests always receive
/// identical responses.
inline void configure_server(httplib::Server& server, std::shared_ptr<const ServeContext> ctx) {
    server.set_payload_max_length(1024 * 1024); // oversized bodies -> 413

    server.Get("/healthz", [ctx](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"status", "ok"}, {"model_version", ctx->ckpt.meta.model_version}}.dump(),
                        "application/json");
    });

    server.Post("/predict", [ctx](const httplib::Request& req, httplib::Response& res) {
        auto fail = [&](int code, const std::string& message) {
            res.status = code;
            res.set_content(json{{"error", message}}.dump(), "application/json");
        };
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            fail(400, "request body is not valid JSON");
            return;
        }
        std::vector<std::string> errors;
        Interaction it = detail::parse_predict_request(body, ctx->ckpt.meta.features, errors);
        if (!errors.empty()) {
            std::string msg = errors[0];
            for (std::size_t i = 1; i < errors.size(); ++i) msg += "; " + errors[i];
            fail(400, msg);
            return;
        }
        try {
            const Prediction p = predict(ctx->ckpt.params, it, ctx->vocab, ctx->ckpt.meta.features,
                                         ctx->ckpt.meta.summarizer, ctx->ckpt.meta.threshold);
            res.set_content(json{{"probability", p.probability},
                                 {"decision", p.decision},
                                 {"threshold", ctx->ckpt.meta.threshold},
                                 {"model_version", ctx->ckpt.meta.model_version}}
                                .dump(),
                            "application/json");
        } catch (const std::exception& e) {
            fail(400, e.what());
        }
    });
}

} // namespace irp
