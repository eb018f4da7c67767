#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <string>
#include <unordered_map>
#include <vector>

namespace sea {

struct DagNode {
  std::string id;
  std::int64_t step = 0;
  double error = 0.0;
  bool active = true;
};

struct DagEdge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::int64_t step = 0;
};

struct NewSource {
  std::string id;
  double error = 0.0;
  /// Ids of the sources whose retrieval produced this paragraph. Ids that are
  /// not nodes are ignored.
  std::vector<std::string> provenance;
};

class DagError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Relation graph over source errors. Edges always point from an earlier
/// admission step to a later one, so node insertion order is a topological
/// order and the graph cannot contain a cycle.
class RelationDag {
 public:
  /// Inserts the sources admitted at step t, all active. Throws DagError on a
  /// duplicate id or a provenance node admitted at step >= t.
  void add_sources(std::span<const NewSource> sources, std::int64_t t);

  /// Mean error over all nodes reachable from `id` by at least one edge;
  /// nullopt (exempt) when there are none. Throws DagError for unknown ids.
  std::optional<double> cumulative_error(std::string_view id) const;
  std::optional<double> cumulative_error(std::uint32_t node) const;

  /// Deactivates every active, non-exempt node whose cumulative error is
  /// below gamma. All values are computed before any node changes.
  std::vector<std::string> prune(double gamma);

  std::vector<std::uint32_t> descendants(std::uint32_t node) const;

  const std::vector<DagNode>& nodes() const { return nodes_; }
  const std::vector<DagEdge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<std::uint32_t> find(std::string_view id) const;
  std::vector<std::string> active_ids() const;
  /// Used when restoring a checkpoint.
  void set_active(std::uint32_t node, bool active) { nodes_.at(node).active = active; }
  const std::vector<std::uint32_t>& children(std::uint32_t node) const { return out_.at(node); }

  /// Kahn's algorithm over the stored edges; independent of the construction
  /// guarantee. Used by tests and, when enabled, after every mutation.
  bool is_acyclic() const;
  void set_verify(bool on) { verify_ = on; }

 private:
  std::vector<DagNode> nodes_;
  std::vector<DagEdge> edges_;
  std::vector<std::vector<std::uint32_t>> out_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
  bool verify_ = false;
};

}  // namespace sea
