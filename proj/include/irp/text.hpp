#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace irp {

// Reserved vocabulary ids.
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kClsId = 2;
inline constexpr std::int32_t kSepId = 3;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

namespace detail {
inline bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }
inline bool is_ascii_space(unsigned char c) { return c < 0x80 && std::isspace(c) != 0; }
} // namespace detail

/// Lowercase, split on whitespace, strip punctuation off token edges and
/// drop tokens that were punctuation only. Interior punctuation (hyphens,
/// underscores) is kept. Bytes >= 0x80 pass through untouched.
inline std::vector<std::string> normalize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&]() {
        std::size_t b = 0, e = cur.size();
        while (b < e && detail::is_ascii_punct(static_cast<unsigned char>(cur[b]))) ++b;
        while (e > b && detail::is_ascii_punct(static_cast<unsigned char>(cur[e - 1]))) --e;
        if (e > b) out.emplace_back(cur.substr(b, e - b));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (detail::is_ascii_space(c)) {
            flush();
        } else {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return out;
}

/// Intent labels are one opaque token: lowercased, inner whitespace folded
/// to underscores.
inline std::string normalize_intent(std::string_view intent) {
    std::string out;
    for (char ch : intent) {
        const auto c = static_cast<unsigned char>(ch);
        if (detail::is_ascii_space(c)) {
            if (!out.empty() && out.back() != '_') out.push_back('_');
        } else {
            out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

enum class Segment : std::uint8_t { utterance, product, special };

/// A model-ready id sequence plus a per-position segment marker.
struct TokenSequence {
    std::vector<std::int32_t> ids;
    std::vector<Segment> segment;

    std::size_t size() const { return ids.size(); }

    void push(std::int32_t id, Segment s) {
        ids.push_back(id);
        segment.push_back(s);
    }

    bool operator==(const TokenSequence& o) const = default;
};

/// Token <-> id bijection with fixed reserved ids. Immutable once built.
class Vocabulary {
public:
    Vocabulary() {
        add_reserved();
    }

    static Vocabulary from_tokens(const std::vector<std::string>& tokens_in_id_order) {
        Vocabulary v;
        if (tokens_in_id_order.size() < 4 ||
            tokens_in_id_order[0] != kPadToken || tokens_in_id_order[1] != kUnkToken ||
            tokens_in_id_order[2] != kClsToken || tokens_in_id_order[3] != kSepToken)
            throw std::invalid_argument("Vocabulary: reserved tokens must occupy ids 0-3");
        for (std::size_t i = 4; i < tokens_in_id_order.size(); ++i) v.add(tokens_in_id_order[i]);
        return v;
    }

    std::size_t size() const { return id_to_token_.size(); }

    std::int32_t add(const std::string& token) {
        auto it = token_to_id_.find(token);
        if (it != token_to_id_.end()) return it->second;
        const auto id = static_cast<std::int32_t>(id_to_token_.size());
        token_to_id_.emplace(token, id);
        id_to_token_.push_back(token);
        return id;
    }

    std::int32_t id_of(std::string_view token) const {
        auto it = token_to_id_.find(std::string(token));
        return it == token_to_id_.end() ? kUnkId : it->second;
    }

    bool contains(std::string_view token) const {
        return token_to_id_.count(std::string(token)) > 0;
    }

    const std::string& token_of(std::int32_t id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
            throw std::out_of_range("Vocabulary: id out of range");
        return id_to_token_[static_cast<std::size_t>(id)];
    }

    const std::vector<std::string>& tokens() const { return id_to_token_; }

    /// Line-delimited "token<TAB>id", sorted by id.
    void save(std::ostream& os) const {
        for (std::size_t i = 0; i < id_to_token_.size(); ++i)
            os << id_to_token_[i] << '\t' << i << '\n';
    }

    std::string serialize() const {
        std::ostringstream ss;
        save(ss);
        return ss.str();
    }

    static Vocabulary load(std::istream& is) {
        std::vector<std::string> toks;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw std::runtime_error("vocabulary line " + std::to_string(lineno) + ": missing tab");
            const std::string tok = line.substr(0, tab);
            const long id = std::stol(line.substr(tab + 1));
            if (id != static_cast<long>(toks.size()))
                throw std::runtime_error("vocabulary line " + std::to_string(lineno) + ": ids must be dense and sorted");
            toks.push_back(tok);
        }
        return from_tokens(toks);
    }

private:
    void add_reserved() {
        add(std::string(kPadToken));
        add(std::string(kUnkToken));
        add(std::string(kClsToken));
        add(std::string(kSepToken));
    }

    std::unordered_map<std::string, std::int32_t> token_to_id_;
    std::vector<std::string> id_to_token_;
};

inline std::vector<std::int32_t> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::vector<std::int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
    return ids;
}

inline std::vector<std::string> decode(const std::vector<std::int32_t>& ids, const Vocabulary& vocab) {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (auto id : ids) tokens.push_back(vocab.token_of(id));
    return tokens;
}

} // namespace irp
