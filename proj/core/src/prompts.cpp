#include "versenet/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "versenet/errors.hpp"
#include "versenet/text.hpp"

namespace versenet {

namespace {

const char* kStep1SystemTail =
    "\nNow you read poems composed by A: A is your friend and you appreciate the work from A "
    "to the extent that you adjust your composition as similar to A's work as possible.\n"
    "Remember, your task is to compose similarly to your friend A.\n"
    "Here I list some points you can pay attention to learn from and improve upon: topics, "
    "semantics, emotions, or imagery.\n"
    "The works returned must be a numbered list in the format:\n"
    "#. your work";

const char* kStep1User =
    "Now you read the work from your friend.\n"
    "A: !<INPUT>!\n"
    "Remember, you want to compose similarly to your friend. Now, please compose a short poem "
    "with less than 100 words in total.\n"
    "Your composition:";

const char* kStep2System =
    "You are a poet and you compose short poems based on your latest knowledge.\n"
    "Now you read poems composed by B: B is your foe and you want to be as different from B's "
    "work as possible.\n"
    "Remember: your task is to rewrite your work to be as dissimilar to your foe B as possible.\n"
    "Here I list some points you can pay attention to learn from and improve upon: topics, "
    "semantics, emotions, and imagery.\n"
    "The works returned must be a numbered list in the format:\n"
    "#. your work";

const char* kStep2User =
    "You read the work from your foe.\n"
    "B: !<INPUT>!\n"
    "Here is the work from you: !<INPUT>!\n"
    "Remember, you want to compose dissimilarly to your foe. Now, please rewrite the short poem "
    "you just composed. The composition should have less than 100 words in total.\n"
    "Your composition:";

const char* kJointSystem =
    "You are a poet and you compose short poems based on your latest knowledge.\n"
    "Now you read poems composed by A and B: A is your friend and you appreciate the work from A "
    "to the extent that you adjust your composition as similar to A's work as possible. On the "
    "other hand, B is your foe and you want to be as different from B's work as possible.\n"
    "Remember, your task is to write similarly to your friend A and at the same time, "
    "dissimilarly to your foe B.\n"
    "Here I list some points you can learn from and improve upon: topics, semantics, emotions, "
    "or imagery.\n"
    "The works returned must be a numbered list in the format:\n"
    "#. your work";

const char* kJointUser =
    "Now you read the work from your friend.\n"
    "A: !<INPUT>!\n"
    "You also read the work from your foe.\n"
    "B: !<INPUT>!\n"
    "Remember, you want to compose similarly to your friend A while dissimilarly to your foe B. "
    "Now please compose one poem with less than 100 words in total.\n"
    "Your composition:";

// Poems are untrusted input; a literal placeholder inside one must not open a
// second substitution slot.
std::string escape_input(std::string text) {
    std::size_t pos = 0;
    while ((pos = text.find(kInputPlaceholder, pos)) != std::string::npos) {
        text.replace(pos, std::string(kInputPlaceholder).size(), "[input]");
        pos += 7;
    }
    return text;
}

std::string substitute(std::string tmpl, const std::vector<std::string>& inputs) {
    for (const auto& input : inputs) {
        const auto pos = tmpl.find(kInputPlaceholder);
        if (pos == std::string::npos) throw Error("template slot count mismatch");
        tmpl.replace(pos, std::string(kInputPlaceholder).size(), escape_input(input));
    }
    if (tmpl.find(kInputPlaceholder) != std::string::npos) {
        throw Error("template slot left unsubstituted");
    }
    return tmpl;
}

std::string sample_from(const std::vector<std::string>& poems, SeededRng& rng) {
    return poems[static_cast<std::size_t>(rng.uniform_u64(poems.size()))];
}

int word_count(const std::string& text) {
    int words = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

}  // namespace

void Memory::append(AgentId agent, int iteration, const std::string& poem) {
    store_[{agent, iteration}].push_back(poem);
}

const std::vector<std::string>& Memory::poems(AgentId agent, int iteration) const {
    static const std::vector<std::string> kEmpty;
    auto it = store_.find({agent, iteration});
    return it == store_.end() ? kEmpty : it->second;
}

bool Memory::has(AgentId agent, int iteration) const {
    auto it = store_.find({agent, iteration});
    return it != store_.end() && !it->second.empty();
}

PromptBundle render_chain_step1(const Profile& profile,
                                const std::vector<std::string>& friend_poems) {
    if (friend_poems.empty()) throw EmptyInput("chain step 1 needs at least one friend poem");
    if (profile.persona.empty()) throw EmptyInput("profile persona is empty");
    PromptBundle bundle;
    bundle.system = escape_input(profile.persona) + kStep1SystemTail;
    bundle.user = substitute(kStep1User, {join(friend_poems, "\n")});
    return bundle;
}

PromptBundle render_chain_step2(const std::string& own_poem, const std::string& foe_poem) {
    if (own_poem.empty() || foe_poem.empty()) {
        throw EmptyInput("chain step 2 needs both an own poem and a foe poem");
    }
    PromptBundle bundle;
    bundle.system = kStep2System;
    bundle.user = substitute(kStep2User, {foe_poem, own_poem});
    return bundle;
}

PromptBundle render_joint(const std::vector<std::string>& friend_poems,
                          const std::vector<std::string>& foe_poems) {
    if (friend_poems.empty() || foe_poems.empty()) {
        throw EmptyInput("joint prompting needs friend and foe poems");
    }
    PromptBundle bundle;
    bundle.system = kJointSystem;
    bundle.user = substitute(kJointUser, {join(friend_poems, "\n"), join(foe_poems, "\n")});
    return bundle;
}

std::string call_chat(ChatClient& client, const PromptBundle& bundle) {
    return client.call(bundle.system, bundle.user);
}

std::vector<std::string> parse_numbered_list(const std::string& response) {
    if (response.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw EmptyResponse("chat response is empty");
    }

    auto item_start = [](const std::string& line) -> std::size_t {
        std::size_t i = line.find_first_not_of(" \t");
        if (i == std::string::npos) return std::string::npos;
        std::size_t j = i;
        if (line[j] == '#') {
            ++j;
        } else {
            while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
            if (j == i) return std::string::npos;
        }
        if (j >= line.size() || (line[j] != '.' && line[j] != ')')) return std::string::npos;
        ++j;
        while (j < line.size() && (line[j] == ' ' || line[j] == '\t')) ++j;
        return j;
    };

    std::vector<std::string> items;
    std::string current;
    bool in_item = false;
    for (const auto& line : split_lines(response)) {
        const std::size_t start = item_start(line);
        if (start != std::string::npos) {
            if (in_item) items.push_back(current);
            current = line.substr(start);
            in_item = true;
        } else if (in_item) {
            current += "\n" + line;
        }
    }
    if (in_item) items.push_back(current);

    for (auto& item : items) {
        while (!item.empty() && (item.back() == '\n' || item.back() == ' ' || item.back() == '\r')) {
            item.pop_back();
        }
    }
    items.erase(std::remove_if(items.begin(), items.end(),
                               [](const std::string& s) { return s.empty(); }),
                items.end());

    if (items.empty()) {
        // fallback: unnumbered response is a single poem
        std::string whole = response;
        const auto first = whole.find_first_not_of(" \t\r\n");
        const auto last = whole.find_last_not_of(" \t\r\n");
        return {whole.substr(first, last - first + 1)};
    }
    return items;
}

const char* strategy_name(PromptStrategy s) {
    switch (s) {
        case PromptStrategy::kChain: return "chain";
        case PromptStrategy::kJoint: return "joint";
        case PromptStrategy::kPositiveOnly: return "positive_only";
        case PromptStrategy::kNegativeOnly: return "negative_only";
    }
    return "?";
}

PromptStrategy strategy_from_name(const std::string& name) {
    if (name == "chain") return PromptStrategy::kChain;
    if (name == "joint") return PromptStrategy::kJoint;
    if (name == "positive_only") return PromptStrategy::kPositiveOnly;
    if (name == "negative_only") return PromptStrategy::kNegativeOnly;
    throw ConfigError("unknown prompting strategy: " + name);
}

PromptResult prompt_generate(PromptAgent& agent, const AgentTuple& tuple, const Memory& memory,
                             PromptStrategy strategy, ChatClient& client, SeededRng& rng,
                             int iteration) {
    const int prev = iteration - 1;
    auto peer_poems = [&](const std::vector<AgentId>& peers) {
        std::vector<std::string> out;
        for (AgentId peer : peers) {
            const auto& pool = memory.poems(peer, prev);
            if (pool.empty()) {
                throw EmptyInput("agent " + std::to_string(peer) + " has no poems at iteration " +
                                 std::to_string(prev));
            }
            out.push_back(sample_from(pool, rng));
        }
        return out;
    };

    PromptResult result;
    auto first_poem = [&](const std::string& response) {
        return parse_numbered_list(response).front();
    };

    switch (strategy) {
        case PromptStrategy::kChain: {
            agent.profile.friend_poems = peer_poems(tuple.in_group);
            const std::string draft =
                first_poem(call_chat(client, render_chain_step1(agent.profile,
                                                                agent.profile.friend_poems)));
            ++result.transport_calls;
            const AgentId foe = tuple.out_group[static_cast<std::size_t>(
                rng.uniform_u64(tuple.out_group.size()))];
            agent.profile.foe_poems = peer_poems({foe});
            result.text =
                first_poem(call_chat(client, render_chain_step2(draft, agent.profile.foe_poems[0])));
            ++result.transport_calls;
            break;
        }
        case PromptStrategy::kPositiveOnly: {
            agent.profile.friend_poems = peer_poems(tuple.in_group);
            result.text = first_poem(
                call_chat(client, render_chain_step1(agent.profile, agent.profile.friend_poems)));
            ++result.transport_calls;
            break;
        }
        case PromptStrategy::kNegativeOnly: {
            const auto& own = memory.poems(agent.id, prev);
            if (own.empty()) {
                throw EmptyInput("agent " + std::to_string(agent.id) +
                                 " has no own poem at iteration " + std::to_string(prev));
            }
            const std::string own_poem = sample_from(own, rng);
            const AgentId foe = tuple.out_group[static_cast<std::size_t>(
                rng.uniform_u64(tuple.out_group.size()))];
            agent.profile.foe_poems = peer_poems({foe});
            result.text =
                first_poem(call_chat(client, render_chain_step2(own_poem,
                                                                agent.profile.foe_poems[0])));
            ++result.transport_calls;
            break;
        }
        case PromptStrategy::kJoint: {
            agent.profile.friend_poems = peer_poems(tuple.in_group);
            agent.profile.foe_poems = peer_poems(tuple.out_group);
            result.text = first_poem(call_chat(
                client, render_joint(agent.profile.friend_poems, agent.profile.foe_poems)));
            ++result.transport_calls;
            break;
        }
    }

    result.over_length = word_count(result.text) >= 100;
    return result;
}

}  // namespace versenet
