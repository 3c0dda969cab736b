#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "versenet/network.hpp"

namespace versenet {

// One generated quatrain-style text with full provenance: every poem resolves
// to (agent, group, iteration, strategy, seed) plus the version of the model
// that produced it.
struct Poem {
    std::string text;
    AgentId agent = 0;
    Group group = Group::A;
    int iteration = 0;
    std::string strategy;
    std::uint64_t seed = 0;
    int model_version = 0;
};

// All poems generated at one iteration (S_t).
struct PoemPool {
    int iteration = 0;
    std::vector<Poem> poems;

    std::vector<const Poem*> by_agent(AgentId agent) const {
        std::vector<const Poem*> out;
        for (const auto& p : poems) {
            if (p.agent == agent) out.push_back(&p);
        }
        return out;
    }
    std::vector<const Poem*> by_agents(const std::vector<AgentId>& agents) const {
        std::vector<const Poem*> out;
        for (const auto& p : poems) {
            for (AgentId a : agents) {
                if (p.agent == a) {
                    out.push_back(&p);
                    break;
                }
            }
        }
        return out;
    }
};

}  // namespace versenet
