#include "sea/relation_dag.hpp"

#include <algorithm>
#include <queue>

namespace sea {

void RelationDag::add_sources(std::span<const NewSource> sources, std::int64_t t) {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (lookup_.contains(sources[i].id)) {
      throw DagError("source " + sources[i].id + " admitted twice");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (sources[j].id == sources[i].id) {
        throw DagError("source " + sources[i].id + " admitted twice");
      }
    }
  }
  // Validate every edge before mutating anything.
  for (const auto& s : sources) {
    for (const auto& from : s.provenance) {
      auto it = lookup_.find(from);
      if (it != lookup_.end() && nodes_[it->second].step >= t) {
        throw DagError("edge " + from + " -> " + s.id + " does not go forward in time");
      }
    }
  }
  for (const auto& s : sources) {
    const auto idx = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(DagNode{s.id, t, s.error, true});
    out_.emplace_back();
    lookup_.emplace(s.id, idx);
    std::vector<std::uint32_t> parents;
    for (const auto& from : s.provenance) {
      auto it = lookup_.find(from);
      if (it == lookup_.end() || nodes_[it->second].step >= t) continue;
      parents.push_back(it->second);
    }
    std::sort(parents.begin(), parents.end());
    parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
    for (auto p : parents) {
      edges_.push_back(DagEdge{p, idx, t});
      out_[p].push_back(idx);
    }
  }
  if (verify_ && !is_acyclic()) throw DagError("relation graph contains a cycle");
}

std::optional<std::uint32_t> RelationDag::find(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> RelationDag::descendants(std::uint32_t node) const {
  if (node >= nodes_.size()) throw DagError("unknown node");
  // Children always have larger indices, so one forward sweep suffices.
  std::vector<char> seen(nodes_.size(), 0);
  for (auto c : out_[node]) seen[c] = 1;
  std::vector<std::uint32_t> out;
  for (std::size_t i = node + 1; i < nodes_.size(); ++i) {
    if (!seen[i]) continue;
    out.push_back(static_cast<std::uint32_t>(i));
    for (auto c : out_[i]) seen[c] = 1;
  }
  return out;
}

std::optional<double> RelationDag::cumulative_error(std::uint32_t node) const {
  const auto desc = descendants(node);
  if (desc.empty()) return std::nullopt;
  double sum = 0.0;
  for (auto d : desc) sum += nodes_[d].error;
  return sum / static_cast<double>(desc.size());
}

std::optional<double> RelationDag::cumulative_error(std::string_view id) const {
  auto n = find(id);
  if (!n) throw DagError("unknown node " + std::string(id));
  return cumulative_error(*n);
}

std::vector<std::string> RelationDag::prune(double gamma) {
  std::vector<std::uint32_t> victims;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].active) continue;
    auto pi = cumulative_error(i);
    if (pi && *pi < gamma) victims.push_back(i);
  }
  std::vector<std::string> out;
  for (auto v : victims) {
    nodes_[v].active = false;
    out.push_back(nodes_[v].id);
  }
  return out;
}

std::vector<std::string> RelationDag::active_ids() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.active) out.push_back(n.id);
  }
  return out;
}

bool RelationDag::is_acyclic() const {
  std::vector<std::size_t> indeg(nodes_.size(), 0);
  for (const auto& e : edges_) ++indeg[e.to];
  std::queue<std::uint32_t> q;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (indeg[i] == 0) q.push(i);
  }
  std::size_t seen = 0;
  std::vector<std::vector<std::uint32_t>> adj(nodes_.size());
  for (const auto& e : edges_) adj[e.from].push_back(e.to);
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    ++seen;
    for (auto v : adj[u]) {
      if (--indeg[v] == 0) q.push(v);
    }
  }
  return seen == nodes_.size();
}

}  // namespace sea
