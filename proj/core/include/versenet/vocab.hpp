#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace versenet {

using TokenId = std::int32_t;

// Shared token inventory for all trainable models in a run. Built once from
// the initialization corpus; ids are stable and the specials occupy fixed
// slots so checkpoints stay portable.
class Vocab {
public:
    static constexpr TokenId kBos = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kLineBreak = 2;
    static constexpr TokenId kPositiveTag = 3;
    static constexpr TokenId kNegativeTag = 4;
    static constexpr TokenId kUnk = 5;
    static constexpr TokenId kNumSpecials = 6;

    Vocab();

    // Adds corpus tokens in first-occurrence order after the specials.
    static Vocab from_tokens(const std::vector<std::string>& tokens);

    TokenId add(const std::string& token);
    TokenId id(std::string_view token) const;  // unknown tokens map to kUnk
    const std::string& token(TokenId id) const;
    std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }
    bool is_special(TokenId id) const { return id >= 0 && id < kNumSpecials; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    // Multi-line text to token ids; lines are joined with kLineBreak. No BOS or
    // EOS; callers that need sequence framing add those.
    std::vector<TokenId> encode_text(std::string_view text) const;
    // Inverse direction for generated sequences: kLineBreak becomes a newline,
    // other specials are dropped, word tokens are space-separated.
    std::string decode(const std::vector<TokenId>& ids) const;

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace versenet
