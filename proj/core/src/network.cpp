#include "versenet/network.hpp"

#include <string>

#include "versenet/errors.hpp"

namespace versenet {

const char* group_name(Group g) { return g == Group::A ? "A" : "B"; }

Group group_from_name(char name) {
    if (name == 'A' || name == 'a') return Group::A;
    if (name == 'B' || name == 'b') return Group::B;
    throw ConfigError(std::string("unknown group label: ") + name);
}

SignedNetwork SignedNetwork::build(int m, const std::map<AgentId, Group>& group_of) {
    if (m < 2) throw SizeMismatch("network needs at least 2 agents, got " + std::to_string(m));
    if (static_cast<int>(group_of.size()) != m) {
        throw SizeMismatch("assignment covers " + std::to_string(group_of.size()) +
                           " agents, expected " + std::to_string(m));
    }
    SignedNetwork net;
    net.assignment_.resize(static_cast<std::size_t>(m));
    int count_a = 0;
    int count_b = 0;
    for (const auto& [agent, group] : group_of) {
        if (agent < 0 || agent >= m) {
            throw SizeMismatch("agent index " + std::to_string(agent) + " out of range for m=" +
                               std::to_string(m));
        }
        net.assignment_[static_cast<std::size_t>(agent)] = group;
        (group == Group::A ? count_a : count_b)++;
    }
    if (count_a == 0) throw EmptyGroup("group A has no members");
    if (count_b == 0) throw EmptyGroup("group B has no members");
    return net;
}

Group SignedNetwork::group_of(AgentId agent) const {
    if (agent < 0 || agent >= size()) {
        throw UnknownAgent("agent " + std::to_string(agent) + " not in network of size " +
                           std::to_string(size()));
    }
    return assignment_[static_cast<std::size_t>(agent)];
}

AgentTuple SignedNetwork::agent_tuple(AgentId target) const {
    const Group own = group_of(target);
    AgentTuple tuple;
    tuple.target = target;
    for (AgentId a = 0; a < size(); ++a) {
        if (a == target) continue;
        (assignment_[static_cast<std::size_t>(a)] == own ? tuple.in_group : tuple.out_group)
            .push_back(a);
    }
    return tuple;
}

std::vector<AgentId> SignedNetwork::agents() const {
    std::vector<AgentId> out(static_cast<std::size_t>(size()));
    for (AgentId a = 0; a < size(); ++a) out[static_cast<std::size_t>(a)] = a;
    return out;
}

std::vector<AgentId> SignedNetwork::members(Group g) const {
    std::vector<AgentId> out;
    for (AgentId a = 0; a < size(); ++a) {
        if (assignment_[static_cast<std::size_t>(a)] == g) out.push_back(a);
    }
    return out;
}

InteractiveSubsets select_interactive(const AgentTuple& tuple, int n_agents, SeededRng& rng) {
    if (n_agents < 2) throw InsufficientPeers("n_agents must be at least 2");
    if (tuple.out_group.empty()) throw InsufficientPeers("target has no out-group peers");

    const int peers = n_agents - 1;
    const int n_friends = peers / 2;
    const int n_foes = peers - n_friends;
    if (n_friends > static_cast<int>(tuple.in_group.size())) {
        throw InsufficientPeers("requested " + std::to_string(n_friends) + " friends, only " +
                                std::to_string(tuple.in_group.size()) + " available");
    }
    if (n_foes > static_cast<int>(tuple.out_group.size())) {
        throw InsufficientPeers("requested " + std::to_string(n_foes) + " foes, only " +
                                std::to_string(tuple.out_group.size()) + " available");
    }

    InteractiveSubsets subsets;
    for (std::size_t i : rng.sample_indices(tuple.in_group.size(), static_cast<std::size_t>(n_friends))) {
        subsets.in_subset.push_back(tuple.in_group[i]);
    }
    for (std::size_t i : rng.sample_indices(tuple.out_group.size(), static_cast<std::size_t>(n_foes))) {
        subsets.out_subset.push_back(tuple.out_group[i]);
    }
    return subsets;
}

}  // namespace versenet
