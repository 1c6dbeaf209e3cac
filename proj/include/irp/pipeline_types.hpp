#pragma once

#include <array>
#include <bitset>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace irp {

/// Input features the model may consume: the two utterance-side features and
/// the nine product attribute fields, in the fixed field order used
/// throughout the pipeline.
enum class Feature : std::size_t {
    utterance = 0,
    intent,
    title,
    brand,
    size,
    color,
    reviews,
    price,
    style,
    group,
    type,
};

inline constexpr std::size_t kFeatureCount = 11;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "utterance", "intent", "title", "brand", "size", "color",
    "reviews",   "price",  "style", "group", "type"};

inline constexpr std::array<Feature, 9> kProductFeatures = {
    Feature::title, Feature::brand, Feature::size,  Feature::color, Feature::reviews,
    Feature::price, Feature::style, Feature::group, Feature::type};

struct FeatureMask {
    std::bitset<kFeatureCount> bits;

    FeatureMask() = default;
    FeatureMask(std::initializer_list<Feature> fs) {
        for (Feature f : fs) set(f);
    }

    bool has(Feature f) const { return bits.test(static_cast<std::size_t>(f)); }
    FeatureMask& set(Feature f, bool on = true) {
        bits.set(static_cast<std::size_t>(f), on);
        return *this;
    }

    bool any_product_field() const {
        for (Feature f : kProductFeatures)
            if (has(f)) return true;
        return false;
    }

    bool empty() const { return bits.none(); }

    static FeatureMask all() {
        FeatureMask m;
        m.bits.set();
        return m;
    }

    static FeatureMask utterance_only() { return FeatureMask{Feature::utterance}; }

    static Feature feature_from_name(std::string_view name) {
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            if (kFeatureNames[i] == name) return static_cast<Feature>(i);
        throw std::invalid_argument("unknown feature name: " + std::string(name));
    }

    static FeatureMask from_names(const std::vector<std::string>& names) {
        FeatureMask m;
        for (const auto& n : names) {
            if (n == "all" || n == "irp") return all();
            if (n == "products") {
                for (Feature f : kProductFeatures) m.set(f);
                continue;
            }
            m.set(feature_from_name(n));
        }
        return m;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            if (bits.test(i)) out.emplace_back(kFeatureNames[i]);
        return out;
    }

    bool operator==(const FeatureMask&) const = default;
};

} // namespace irp
