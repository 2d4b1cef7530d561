#include "hsse/cells.hpp"

#include <algorithm>
#include <functional>

#include <nlohmann/json.hpp>

#include "hsse/errors.hpp"

namespace hsse {

using nlohmann::json;

Reduce reduce_from_string(const std::string& name) {
    if (name == "mean") return Reduce::mean;
    if (name == "max") return Reduce::max;
    if (name == "last") return Reduce::last;
    throw ConfigError("unknown reduce mode '" + name + "' (expected mean|max|last)");
}

void CellGraph::add_cell(const std::string& id, int latent_dim, std::size_t capacity, int bank_ref) {
    if (id.empty()) throw ValidationError("id", "add_cell: empty id");
    if (latent_dim < 1) throw ValidationError("latent_dim", "add_cell: latent_dim must be >= 1");
    if (capacity < 1) throw ValidationError("capacity", "add_cell: capacity must be >= 1");
    if (cells_.count(id)) throw ValidationError("id", "add_cell: duplicate id '" + id + "'");
    AkashaCell cell;
    cell.id = id;
    cell.bank_ref = bank_ref;
    cell.capacity = capacity;
    cell.latent_dim = latent_dim;
    cell.context.assign(static_cast<std::size_t>(latent_dim), 0.0);
    cells_.emplace(id, std::move(cell));
}

const AkashaCell& CellGraph::cell(const std::string& id) const {
    auto it = cells_.find(id);
    if (it == cells_.end()) throw ValidationError("id", "unknown cell id '" + id + "'");
    return it->second;
}

AkashaCell& CellGraph::cell_mut(const std::string& id) {
    auto it = cells_.find(id);
    if (it == cells_.end()) throw ValidationError("id", "unknown cell id '" + id + "'");
    return it->second;
}

std::vector<std::string> CellGraph::roots() const {
    std::vector<std::string> out;
    for (const auto& [id, c] : cells_)
        if (!c.parent) out.push_back(id);
    return out;
}

std::vector<std::string> CellGraph::ids() const {
    std::vector<std::string> out;
    out.reserve(cells_.size());
    for (const auto& [id, c] : cells_) out.push_back(id);
    return out;
}

bool CellGraph::is_descendant(const std::string& ancestor, const std::string& maybe_descendant) const {
    const AkashaCell& a = cell(ancestor);
    for (const auto& child : a.children) {
        if (child == maybe_descendant) return true;
        if (is_descendant(child, maybe_descendant)) return true;
    }
    return false;
}

void CellGraph::add_child(const std::string& parent_id, const std::string& child_id) {
    AkashaCell& parent = cell_mut(parent_id);
    AkashaCell& child = cell_mut(child_id);
    if (parent_id == child_id)
        throw CycleError({parent_id, child_id}, "add_child: cell cannot parent itself");
    if (child.parent)
        throw ValidationError("parent", "add_child: '" + child_id + "' already has parent '" +
                                            *child.parent + "'");
    // A cycle appears exactly when parent is reachable from child; report
    // the downward path child -> ... -> parent plus the closing edge.
    std::vector<std::string> path;
    std::function<bool(const std::string&)> find_path = [&](const std::string& cur) {
        path.push_back(cur);
        if (cur == parent_id) return true;
        for (const auto& next : cell(cur).children)
            if (find_path(next)) return true;
        path.pop_back();
        return false;
    };
    if (find_path(child_id)) {
        path.push_back(child_id);  // closing edge
        std::string joined;
        for (std::size_t i = 0; i < path.size(); ++i) joined += (i ? "->" : "") + path[i];
        throw CycleError(path, "add_child: edge " + parent_id + "->" + child_id +
                                   " would create cycle " + joined);
    }
    parent.children.push_back(child_id);
    child.parent = parent_id;
}

void CellGraph::insert_memory(const std::string& id, const Vec& item) {
    AkashaCell& c = cell_mut(id);
    if (static_cast<int>(item.size()) != c.latent_dim)
        throw DimensionError("insert_memory: item dimension " + std::to_string(item.size()) +
                             " does not match cell latent_dim " + std::to_string(c.latent_dim));
    if (!all_finite(std::span<const double>(item))) throw NonFiniteError("insert_memory: non-finite item");
    if (c.buffer.size() == c.capacity) c.buffer.pop_front();
    c.buffer.push_back(item);
}

void CellGraph::broadcast_context(const std::string& root_id, const Vec& context, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ValidationError("alpha", "broadcast_context: blend weight must lie in [0, 1]");
    AkashaCell& root = cell_mut(root_id);
    if (static_cast<int>(context.size()) != root.latent_dim)
        throw DimensionError("broadcast_context: context dimension mismatch");
    std::function<void(const std::string&, const Vec&)> visit = [&](const std::string& id,
                                                                    const Vec& incoming) {
        AkashaCell& c = cell_mut(id);
        for (std::size_t i = 0; i < c.context.size(); ++i)
            c.context[i] = alpha * incoming[i] + (1.0 - alpha) * c.context[i];
        for (const auto& child : c.children) visit(child, c.context);
    };
    visit(root_id, context);
}

namespace {

Vec reduce_vectors(const std::vector<Vec>& items, Reduce mode, int dim) {
    Vec out(static_cast<std::size_t>(dim), 0.0);
    if (items.empty()) return out;  // empty contributes the zero vector
    switch (mode) {
        case Reduce::mean:
            for (const auto& v : items)
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
            for (auto& x : out) x /= static_cast<double>(items.size());
            break;
        case Reduce::max:
            out = items.front();
            for (const auto& v : items)
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], v[i]);
            break;
        case Reduce::last:
            out = items.back();
            break;
    }
    return out;
}

}  // namespace

Vec CellGraph::report_summary(const std::string& root_id, Reduce mode) const {
    const AkashaCell& root = cell(root_id);
    const int dim = root.latent_dim;
    std::function<Vec(const std::string&)> visit = [&](const std::string& id) -> Vec {
        const AkashaCell& c = cell(id);
        const Vec own = reduce_vectors(std::vector<Vec>(c.buffer.begin(), c.buffer.end()), mode, dim);
        if (c.children.empty()) return own;
        std::vector<Vec> parts{own};
        for (const auto& child : c.children) parts.push_back(visit(child));
        return reduce_vectors(parts, mode, dim);
    };
    return visit(root_id);
}

json CellGraph::snapshot() const {
    json cells = json::array();
    for (const auto& [id, c] : cells_) {
        json buf = json::array();
        for (const auto& v : c.buffer) buf.push_back(v);
        cells.push_back({{"id", id},
                         {"bank_ref", c.bank_ref},
                         {"capacity", c.capacity},
                         {"latent_dim", c.latent_dim},
                         {"buffer", buf},
                         {"context", c.context},
                         {"children", c.children},
                         {"parent", c.parent ? json(*c.parent) : json(nullptr)}});
    }
    return json{{"cells", cells}};
}

CellGraph CellGraph::from_snapshot(const json& doc) {
    CellGraph g;
    for (const auto& jc : doc.at("cells")) {
        g.add_cell(jc.at("id").get<std::string>(), jc.at("latent_dim").get<int>(),
                   jc.at("capacity").get<std::size_t>(), jc.at("bank_ref").get<int>());
    }
    for (const auto& jc : doc.at("cells")) {
        const std::string id = jc.at("id").get<std::string>();
        for (const auto& child : jc.at("children")) g.add_child(id, child.get<std::string>());
    }
    for (const auto& jc : doc.at("cells")) {
        AkashaCell& c = g.cell_mut(jc.at("id").get<std::string>());
        for (const auto& item : jc.at("buffer")) {
            Vec v = item.get<Vec>();
            if (static_cast<int>(v.size()) != c.latent_dim)
                throw DimensionError("from_snapshot: buffer item dimension mismatch");
            c.buffer.push_back(std::move(v));
        }
        if (c.buffer.size() > c.capacity) throw ValidationError("buffer", "from_snapshot: buffer over capacity");
        c.context = jc.at("context").get<Vec>();
    }
    return g;
}

}  // namespace hsse
