#include "versenet/vocab.hpp"

#include "versenet/errors.hpp"
#include "versenet/text.hpp"

namespace versenet {

namespace {
const char* kSpecialNames[Vocab::kNumSpecials] = {
    "<bos>", "<eos>", "<nl>", "<positive>", "<negative>", "<unk>",
};
}

Vocab::Vocab() {
    for (TokenId i = 0; i < kNumSpecials; ++i) add(kSpecialNames[i]);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    for (const auto& t : tokens) v.add(t);
    return v;
}

TokenId Vocab::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const TokenId id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
}

TokenId Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || id >= size()) throw Error("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode_text(std::string_view text) const {
    std::vector<TokenId> out;
    bool first_line = true;
    for (const auto& line : split_lines(text)) {
        const auto words = tokenize(line);
        if (words.empty()) continue;
        if (!first_line) out.push_back(kLineBreak);
        first_line = false;
        for (const auto& w : words) out.push_back(id(w));
    }
    return out;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    bool at_line_start = true;
    for (TokenId id : ids) {
        if (id == kLineBreak) {
            out.push_back('\n');
            at_line_start = true;
            continue;
        }
        if (is_special(id)) continue;
        if (!at_line_start) out.push_back(' ');
        out += token(id);
        at_line_start = false;
    }
    return out;
}

}  // namespace versenet
