#include "dialeval/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "dialeval/judge.hpp"
#include "dialeval/kernels.hpp"
#include "dialeval/rng.hpp"

namespace dialeval {

int CooccurrenceGraph::index_of(const std::string& goal) const {
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] == goal) return static_cast<int>(i);
    }
    return -1;
}

int CooccurrenceGraph::degree(int node) const {
    return static_cast<int>(adj[static_cast<size_t>(node)].size());
}

long long CooccurrenceGraph::weight_sum(int node) const {
    long long total = 0;
    for (const auto& [neighbor, weight] : adj[static_cast<size_t>(node)]) total += weight;
    return total;
}

int CooccurrenceGraph::weight(int a, int b) const {
    for (const auto& [neighbor, w] : adj[static_cast<size_t>(a)]) {
        if (neighbor == b) return w;
    }
    return 0;
}

CooccurrenceGraph build_graph(const std::vector<GoalSequence>& sequences) {
    if (sequences.empty()) throw EmptyCorpusError();

    CooccurrenceGraph g;
    std::map<std::string, int> index;
    std::vector<std::vector<int>> id_sequences;
    id_sequences.reserve(sequences.size());
    for (const GoalSequence& seq : sequences) {
        std::vector<int> ids;
        ids.reserve(seq.size());
        for (const std::string& goal : seq) {
            auto [it, inserted] = index.try_emplace(goal, static_cast<int>(g.nodes.size()));
            if (inserted) g.nodes.push_back(goal);
            ids.push_back(it->second);
        }
        id_sequences.push_back(std::move(ids));
    }

    const int n = static_cast<int>(g.nodes.size());
    const std::vector<uint32_t> counts = cooccurrence_counts_serial(id_sequences, n);

    g.adj.assign(static_cast<size_t>(n), {});
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            const uint32_t w = counts[static_cast<size_t>(a) * n + b];
            if (w > 0) g.adj[static_cast<size_t>(a)].push_back({b, static_cast<int>(w)});
        }
    }
    int endpoint_count = 0;
    for (const auto& row : g.adj) endpoint_count += static_cast<int>(row.size());
    g.edge_count = endpoint_count / 2;
    return g;
}

GraphStats compute_stats(const CooccurrenceGraph& g) {
    GraphStats s;
    s.node_count = static_cast<int>(g.nodes.size());
    s.edge_count = g.edge_count;

    if (s.node_count >= 2) {
        s.density_num = 2LL * s.edge_count;
        s.density_den = static_cast<long long>(s.node_count) * (s.node_count - 1);
        s.density = static_cast<double>(s.density_num) / static_cast<double>(s.density_den);
        s.density_defined = true;
    } else {
        s.density_num = 0;
        s.density_den = 0;
        s.density = 0.0;
        s.density_defined = false;
    }
    s.avg_degree =
        s.node_count > 0 ? 2.0 * s.edge_count / static_cast<double>(s.node_count) : 0.0;

    s.max_degree = 0;
    s.min_degree = 0;
    if (s.node_count > 0) {
        s.min_degree = g.degree(0);
        for (int i = 0; i < s.node_count; ++i) {
            const int d = g.degree(i);
            s.max_degree = std::max(s.max_degree, d);
            s.min_degree = std::min(s.min_degree, d);
        }
    }

    // Connected components by iterative DFS.
    std::vector<char> seen(static_cast<size_t>(s.node_count), 0);
    for (int start = 0; start < s.node_count; ++start) {
        if (seen[static_cast<size_t>(start)]) continue;
        ++s.connected_component_count;
        std::vector<int> stack{start};
        seen[static_cast<size_t>(start)] = 1;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            for (const auto& [neighbor, weight] : g.adj[static_cast<size_t>(node)]) {
                if (!seen[static_cast<size_t>(neighbor)]) {
                    seen[static_cast<size_t>(neighbor)] = 1;
                    stack.push_back(neighbor);
                }
            }
        }
    }
    return s;
}

ojson stats_to_json(const GraphStats& s) {
    ojson j = ojson::object();
    j["total_nodes"] = s.node_count;
    j["total_edges"] = s.edge_count;
    j["graph_density"] = s.density;
    j["average_degree"] = s.avg_degree;
    j["max_degree"] = s.max_degree;
    j["min_degree"] = s.min_degree;
    j["connected_components"] = s.connected_component_count;
    j["density_defined"] = s.density_defined;
    return j;
}

ojson graph_to_json(const CooccurrenceGraph& g) {
    ojson j = ojson::object();
    j["nodes"] = g.nodes;
    ojson edges = ojson::array();
    for (size_t a = 0; a < g.adj.size(); ++a) {
        for (const auto& [b, w] : g.adj[a]) {
            if (static_cast<int>(a) < b) {
                edges.push_back(ojson::array({g.nodes[a], g.nodes[static_cast<size_t>(b)], w}));
            }
        }
    }
    j["edges"] = edges;
    return j;
}

CooccurrenceGraph graph_from_json(const ojson& j) {
    CooccurrenceGraph g;
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    std::map<std::string, int> index;
    for (size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i]] = static_cast<int>(i);
    g.adj.assign(g.nodes.size(), {});
    for (const auto& edge : j.at("edges")) {
        const std::string from = edge.at(0).get<std::string>();
        const std::string to = edge.at(1).get<std::string>();
        const int w = edge.at(2).get<int>();
        auto fi = index.find(from);
        auto ti = index.find(to);
        if (fi == index.end() || ti == index.end()) {
            throw SchemaError("graph edge references unknown node: " + from + " - " + to);
        }
        g.adj[static_cast<size_t>(fi->second)].push_back({ti->second, w});
        g.adj[static_cast<size_t>(ti->second)].push_back({fi->second, w});
        ++g.edge_count;
    }
    for (auto& row : g.adj) std::sort(row.begin(), row.end());
    return g;
}

std::vector<GoalSequence> load_seed_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);

    std::vector<GoalSequence> sequences;
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        ojson parsed = ojson::parse(line, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_array()) {
            throw MalformedLineError(path, line_number,
                                     "expected a JSON array of \"domain.intent\" strings");
        }
        GoalSequence seq;
        for (const auto& item : parsed) {
            if (!item.is_string()) {
                throw MalformedLineError(path, line_number, "sequence entries must be strings");
            }
            const std::string goal = item.get<std::string>();
            if (goal.find('.') == std::string::npos) {
                throw MalformedLineError(path, line_number,
                                         "goal '" + goal + "' is not in domain.intent form");
            }
            seq.push_back(goal);
        }
        if (seq.size() < 2) {
            throw MalformedLineError(path, line_number,
                                     "goal sequences must contain at least 2 goals");
        }
        sequences.push_back(std::move(seq));
    }
    if (sequences.empty()) throw EmptyCorpusError(path + " contains no goal sequences");
    return sequences;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

SampleResult sample_trajectory(const CooccurrenceGraph& g, int target_size, uint64_t rng_seed) {
    const int n = static_cast<int>(g.nodes.size());
    if (target_size < 2) throw SchemaError("target_size must be at least 2");
    const int budget = 50 * target_size;
    if (n < target_size) throw UnsatisfiableError(target_size, budget);

    std::mt19937_64 rng(rng_seed);

    // Degree terciles: nodes sorted by (degree asc, index asc), split in three.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&g](int a, int b) { return g.degree(a) < g.degree(b); });
    std::vector<std::vector<int>> strata(3);
    for (int pos = 0; pos < n; ++pos) {
        const int s = std::min(2, pos * 3 / n);
        strata[static_cast<size_t>(s)].push_back(order[static_cast<size_t>(pos)]);
    }
    std::vector<int> non_empty;
    for (int s = 0; s < 3; ++s) {
        if (!strata[static_cast<size_t>(s)].empty()) non_empty.push_back(s);
    }

    const int stratum = non_empty[draw_index(rng, non_empty.size())];
    const auto& bucket = strata[static_cast<size_t>(stratum)];
    const int start = bucket[draw_index(rng, bucket.size())];

    SampleResult result;
    result.start_node = g.nodes[static_cast<size_t>(start)];
    result.stratum = stratum;

    std::set<int> visited{start};
    result.goals.push_back(g.nodes[static_cast<size_t>(start)]);

    int current = start;
    int steps = 0;
    while (static_cast<int>(visited.size()) < target_size) {
        const auto& neighbors = g.adj[static_cast<size_t>(current)];
        if (neighbors.empty() || steps >= budget) {
            throw UnsatisfiableError(target_size, budget);
        }
        // Weight-proportional step over all neighbors; revisits just move the
        // walker without growing the set.
        const long long total = g.weight_sum(current);
        long long pick = static_cast<long long>(draw_index(rng, static_cast<uint64_t>(total)));
        int next = neighbors.back().first;
        for (const auto& [neighbor, weight] : neighbors) {
            if (pick < weight) {
                next = neighbor;
                break;
            }
            pick -= weight;
        }
        ++steps;
        if (visited.insert(next).second) {
            result.goals.push_back(g.nodes[static_cast<size_t>(next)]);
        }
        current = next;
    }
    result.steps_used = steps;
    return result;
}

// ---------------------------------------------------------------------------
// Complexity classification
// ---------------------------------------------------------------------------

std::string_view to_string(ClassificationMethod m) {
    return m == ClassificationMethod::pre_defined ? "pre_defined" : "model_based";
}

int dependency_count(const Trajectory& t) {
    int count = 0;
    for (const Goal& g : t.goal_list) count += static_cast<int>(g.dependencies.size());
    return count;
}

ComplexityDecision classify_complexity(const Trajectory& t, JudgeGateway* judge,
                                       const ComplexityCriteria& criteria) {
    const int goals = static_cast<int>(t.goal_list.size());
    const int turns = t.metadata.estimated_turns.value_or(0);
    const int deps = dependency_count(t);
    const bool proactive = t.metadata.proactivity;
    bool defective = false;
    for (const Goal& g : t.goal_list) defective = defective || g.defectiveness_label;

    const bool complex_fires = goals >= criteria.complex_goals_min ||
                               turns >= criteria.complex_turns_min ||
                               (deps >= criteria.complex_min_dependencies && proactive) ||
                               defective;
    const bool medium_fires = goals >= criteria.medium_goals_min &&
                              goals <= criteria.medium_goals_max &&
                              turns >= criteria.medium_turns_min &&
                              turns <= criteria.medium_turns_max &&
                              deps <= criteria.medium_max_dependencies && !proactive;

    if (complex_fires != medium_fires) {
        return {complex_fires ? ComplexityClass::complex_ : ComplexityClass::medium,
                ClassificationMethod::pre_defined};
    }

    // Both or neither rule fired: tie-break.
    if (judge != nullptr) {
        std::set<std::string> domains;
        for (const Goal& g : t.goal_list) domains.insert(g.domain);
        std::string domain_list;
        for (const std::string& d : domains) {
            if (!domain_list.empty()) domain_list += ", ";
            domain_list += d;
        }
        std::string attributes;
        if (t.metadata.async_execution) attributes += "async_execution ";
        if (t.metadata.interleaving) attributes += "interleaving ";
        if (t.metadata.proactivity) attributes += "proactivity ";
        if (defective) attributes += "defectiveness ";
        if (attributes.empty()) attributes = "none";

        JudgeRequest request;
        request.template_id = TemplateId::tiebreak_complexity;
        request.variables = {{"num_goals", std::to_string(goals)},
                             {"estimated_turns", std::to_string(turns)},
                             {"dependency_count", std::to_string(deps)},
                             {"domains", domain_list},
                             {"attributes", attributes}};
        const JudgeResponse response = judge->dispatch(request);
        return {parse_complexity_class(response.parsed["complexity"].get<std::string>()),
                ClassificationMethod::model_based};
    }

    return {deps >= criteria.complex_min_dependencies ? ComplexityClass::complex_
                                                      : ComplexityClass::medium,
            ClassificationMethod::pre_defined};
}

}  // namespace dialeval
