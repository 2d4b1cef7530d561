#pragma once

// Holarchic memory cells: a forest of world-model cells, each with a bounded
// FIFO buffer of latent vectors, a context register, and an optional
// reference to a local expert bank. Parents broadcast context downward
// (pre-order, alpha-blend); children report summaries upward (post-order
// reduction over own buffer plus child summaries). Single parent per cell:
// every edge insertion is checked against the descendant set so no op
// sequence can create a cycle.

#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsse/linalg.hpp"

namespace hsse {

enum class Reduce { mean, max, last };

Reduce reduce_from_string(const std::string& name);

struct AkashaCell {
    std::string id;
    int bank_ref = -1;  // index into an external bank registry; -1 = none
    std::size_t capacity = 0;
    int latent_dim = 0;
    std::deque<Vec> buffer;            // FIFO, length <= capacity
    Vec context;                       // blended broadcast register
    std::vector<std::string> children; // insertion order, fixed for traversals
    std::optional<std::string> parent;
};

class CellGraph {
public:
    void add_cell(const std::string& id, int latent_dim, std::size_t capacity, int bank_ref = -1);

    // Attaches child under parent. Throws CycleError (with the offending
    // path) if parent is a descendant of child, and ValidationError if the
    // child already has a parent.
    void add_child(const std::string& parent_id, const std::string& child_id);

    void insert_memory(const std::string& id, const Vec& item);

    void broadcast_context(const std::string& root_id, const Vec& context, double alpha);

    Vec report_summary(const std::string& root_id, Reduce mode) const;

    const AkashaCell& cell(const std::string& id) const;
    bool has_cell(const std::string& id) const { return cells_.count(id) > 0; }
    std::size_t size() const { return cells_.size(); }
    std::vector<std::string> roots() const;
    std::vector<std::string> ids() const;

    // Reachability via child edges (id itself excluded).
    bool is_descendant(const std::string& ancestor, const std::string& maybe_descendant) const;

    nlohmann::json snapshot() const;
    static CellGraph from_snapshot(const nlohmann::json& doc);

private:
    AkashaCell& cell_mut(const std::string& id);
    std::map<std::string, AkashaCell> cells_;  // ordered for deterministic iteration
};

}  // namespace hsse
