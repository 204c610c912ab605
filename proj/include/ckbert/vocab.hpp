#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ckbert {

using TokenId = std::int32_t;

// Reserved entries occupy the first ids of every vocabulary, in this order.
namespace special {
inline constexpr std::string_view pad = "[PAD]";
inline constexpr std::string_view unk = "[UNK]";
inline constexpr std::string_view cls = "[CLS]";
inline constexpr std::string_view sep = "[SEP]";
inline constexpr std::string_view mask = "[MASK]";
inline constexpr std::string_view dep_open = "[DEP]";
inline constexpr std::string_view dep_close = "[/DEP]";
inline constexpr std::string_view sdp_open = "[SDP]";
inline constexpr std::string_view sdp_close = "[/SDP]";

inline constexpr std::array<std::string_view, 9> all = {pad,      unk,       cls,      sep,      mask,
                                                        dep_open, dep_close, sdp_open, sdp_close};
}  // namespace special

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;

bool is_marker(std::string_view token) noexcept;

// Splits on whitespace; each non-ASCII code point becomes its own token,
// ASCII letter/digit runs stay whole, other ASCII symbols stand alone.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
public:
    // Vocabulary with the reserved entries followed by `tokens` (duplicates
    // and reserved strings in `tokens` are skipped).
    static Vocab with_reserved(const std::vector<std::string>& tokens);

    // One token per line, id = line index. Reserved entries must appear
    // first, in canonical order.
    static Vocab load(std::istream& in);
    static Vocab load_file(const std::string& path);

    void save(std::ostream& out) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    TokenId id(std::string_view token) const;  // kUnkId when absent
    std::optional<TokenId> find(std::string_view token) const;
    const std::string& token(TokenId id) const;

    std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace ckbert
