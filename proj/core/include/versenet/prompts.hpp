#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "versenet/chat.hpp"
#include "versenet/network.hpp"
#include "versenet/rng.hpp"

namespace versenet {

// Fully substituted system/user message pair; the input placeholder never
// survives rendering.
struct PromptBundle {
    std::string system;
    std::string user;
};

inline constexpr const char* kInputPlaceholder = "!<INPUT>!";

// Role definition plus the peer poems currently loaded into the prompt
// context.
struct Profile {
    std::string persona =
        "You are a poet and you compose short poems based on your latest knowledge.";
    std::vector<std::string> friend_poems;
    std::vector<std::string> foe_poems;
};

// Per-agent, per-iteration store of generated poems. Append-only within a run.
class Memory {
public:
    void append(AgentId agent, int iteration, const std::string& poem);
    const std::vector<std::string>& poems(AgentId agent, int iteration) const;
    bool has(AgentId agent, int iteration) const;

private:
    std::map<std::pair<AgentId, int>, std::vector<std::string>> store_;
};

// Step 1 of chain prompting: compose similarly to the friend poems.
PromptBundle render_chain_step1(const Profile& profile,
                                const std::vector<std::string>& friend_poems);
// Step 2 of chain prompting: rewrite the own draft dissimilarly to the foe.
PromptBundle render_chain_step2(const std::string& own_poem, const std::string& foe_poem);
// Single-call joint prompting with friend and foe poems side by side.
PromptBundle render_joint(const std::vector<std::string>& friend_poems,
                          const std::vector<std::string>& foe_poems);

std::string call_chat(ChatClient& client, const PromptBundle& bundle);

// Extracts "1. ..." style items; continuation lines attach to the current
// item. A response without numbering is one single poem.
std::vector<std::string> parse_numbered_list(const std::string& response);

enum class PromptStrategy { kChain, kJoint, kPositiveOnly, kNegativeOnly };

const char* strategy_name(PromptStrategy s);
PromptStrategy strategy_from_name(const std::string& name);

struct PromptAgent {
    AgentId id = 0;
    Group group = Group::A;
    Profile profile;
};

struct PromptResult {
    std::string text;
    int transport_calls = 0;
    bool over_length = false;  // word-limit instruction is advisory, not enforced
};

// One generated poem via the configured strategy, reading peer poems from the
// previous iteration of `memory`. The caller appends the result to memory at
// the iteration barrier.
PromptResult prompt_generate(PromptAgent& agent, const AgentTuple& tuple, const Memory& memory,
                             PromptStrategy strategy, ChatClient& client, SeededRng& rng,
                             int iteration);

}  // namespace versenet
