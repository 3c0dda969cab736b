#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "versenet/rng.hpp"

namespace versenet {

using AgentId = std::int32_t;

enum class Group : std::uint8_t { A, B };

const char* group_name(Group g);
Group group_from_name(char name);

// Target agent plus its friends (same group, target excluded) and foes (other
// group). The three roles partition the network.
struct AgentTuple {
    AgentId target = 0;
    std::vector<AgentId> in_group;
    std::vector<AgentId> out_group;
};

// Two-group friend/foe network over m agents. Immutable after construction and
// safe to share across generation workers. Iteration order over agents is
// ascending index everywhere.
class SignedNetwork {
public:
    static SignedNetwork build(int m, const std::map<AgentId, Group>& group_of);

    int size() const { return static_cast<int>(assignment_.size()); }
    Group group_of(AgentId agent) const;
    AgentTuple agent_tuple(AgentId target) const;
    std::vector<AgentId> agents() const;
    std::vector<AgentId> members(Group g) const;

private:
    std::vector<Group> assignment_;
};

struct InteractiveSubsets {
    std::vector<AgentId> in_subset;
    std::vector<AgentId> out_subset;
};

// Picks the peers whose logits enter one decoding step. n_agents counts the
// target model plus the selected peers: n_agents=2 selects one foe only
// (negative decoding), n_agents=3 one friend and one foe, n_agents=4 one
// friend and two foes. Selection is uniform without replacement.
InteractiveSubsets select_interactive(const AgentTuple& tuple, int n_agents, SeededRng& rng);

}  // namespace versenet
