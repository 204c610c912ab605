#include "ckbert/vocab.hpp"

#include <algorithm>
#include <fstream>

#include "ckbert/errors.hpp"

namespace ckbert {

bool is_marker(std::string_view token) noexcept {
    return token == special::dep_open || token == special::dep_close || token == special::sdp_open ||
           token == special::sdp_close;
}

namespace {

std::size_t utf8_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;  // stray continuation byte; pass it through alone
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_word(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (is_ascii_space(c)) {
            ++i;
        } else if (is_ascii_word(c)) {
            std::size_t j = i;
            while (j < text.size() && is_ascii_word(text[j])) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            const auto len = std::min(utf8_length(static_cast<unsigned char>(c)), text.size() - i);
            out.emplace_back(text.substr(i, len));
            i += len;
        }
    }
    return out;
}

Vocab Vocab::with_reserved(const std::vector<std::string>& tokens) {
    Vocab v;
    auto add = [&v](std::string_view t) {
        if (v.index_.try_emplace(std::string(t), static_cast<TokenId>(v.tokens_.size())).second) {
            v.tokens_.emplace_back(t);
        }
    };
    for (auto r : special::all) add(r);
    for (const auto& t : tokens) add(t);
    return v;
}

Vocab Vocab::load(std::istream& in) {
    Vocab v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw ParseError(line_no, "empty vocabulary entry");
        if (!v.index_.try_emplace(line, static_cast<TokenId>(v.tokens_.size())).second) {
            throw ParseError(line_no, "duplicate vocabulary entry '" + line + "'");
        }
        v.tokens_.push_back(line);
    }
    for (std::size_t i = 0; i < special::all.size(); ++i) {
        if (i >= v.tokens_.size() || v.tokens_[i] != special::all[i]) {
            throw DataError("vocabulary must start with reserved token " + std::string(special::all[i]) +
                            " at id " + std::to_string(i));
        }
    }
    return v;
}

Vocab Vocab::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    return load(in);
}

void Vocab::save(std::ostream& out) const {
    for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const { return find(token).value_or(kUnkId); }

std::optional<TokenId> Vocab::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw LookupError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

}  // namespace ckbert
