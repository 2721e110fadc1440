#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shnol/errors.hpp"

namespace shnol {

using VertexId = std::int64_t;

/// Finitely supported real function on vertices. Value is 0 off support.
/// Support ids are kept sorted; lookups are binary searches.
class VertexFunction {
public:
    VertexFunction() = default;

    /// Builds from (id, value) pairs. Ids must be unique.
    static VertexFunction from_pairs(std::vector<std::pair<VertexId, double>> pairs);

    /// Builds from parallel arrays; `ids` must be sorted and unique.
    static VertexFunction from_sorted(std::vector<VertexId> ids, std::vector<double> vals);

    double value(VertexId v) const;
    bool in_support(VertexId v) const;

    std::span<const VertexId> ids() const { return ids_; }
    std::span<const double> values() const { return vals_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    double max_abs() const;

private:
    std::vector<VertexId> ids_;
    std::vector<double> vals_;
};

/// Vertex-indexed scalar field: a base value plus finitely many overrides.
/// Doubles as the spec's bounded potential (W, kappa) and the vertex measure.
struct Potential {
    double base = 0.0;
    std::vector<std::pair<VertexId, double>> overrides; // sorted by id

    double at(VertexId v) const;
    /// sup |value| over the whole (possibly infinite) vertex set.
    double sup_abs() const;
    double min_value() const;
    bool trivially_zero() const { return base == 0.0 && overrides.empty(); }

    static Potential zero() { return {}; }
    static Potential constant(double c) { return Potential{c, {}}; }
    static Potential indicator(std::span<const VertexId> support, double value = 1.0);

    void canonicalize();
};

/// A finite truncation of a weighted graph: symmetric edge weights b,
/// zero-order term kappa, vertex measure m > 0. Immutable after construction.
struct WeightedGraph {
    std::vector<VertexId> ids;  // sorted ascending
    // adjacency by local index; each edge stored in both directions
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
    std::vector<double> kappa;
    std::vector<double> measure;
    bool contiguous_ids = false; // ids == {0, 1, ..., n-1}

    std::size_t size() const { return ids.size(); }
    std::optional<std::uint32_t> index_of(VertexId v) const;

    double weight_sum(std::uint32_t i) const;
    std::size_t ordered_pair_count() const;
    /// b(x, y); 0 when (x, y) is not an edge of this truncation.
    double edge_weight(VertexId x, VertexId y) const;
};

/// Lazy handle on a countable graph: a generator plus cached finite
/// truncations. Truncation values are immutable; the cache is guarded.
class GraphSource {
public:
    enum class Kind { Lattice, Tree, Explicit };

    static std::shared_ptr<const GraphSource>
    lattice(int dim, double edge_weight, Potential kappa, Potential measure);

    static std::shared_ptr<const GraphSource>
    regular_tree(int degree, double edge_weight, Potential kappa, Potential measure);

    /// Wraps an explicit finite graph (file graphs, transform images).
    static std::shared_ptr<const GraphSource>
    explicit_graph(WeightedGraph g, VertexId root);

    Kind kind() const { return kind_; }
    int lattice_dim() const { return dim_; }
    int tree_degree() const { return degree_; }
    double generator_edge_weight() const { return edge_weight_; }
    VertexId root() const { return root_; }

    /// Closed ball of the given radius, materialized and cached.
    std::shared_ptr<const WeightedGraph> truncation(int radius) const;

    /// Sorted ids with dist(root, v) <= radius.
    std::vector<VertexId> ball(int radius) const;

    /// Graph distance from the root (shell index).
    int radius_of(VertexId v) const;
    /// Smallest radius whose closed ball contains all given ids.
    int cover_radius(std::span<const VertexId> ids) const;
    /// Largest meaningful ball radius (INT_MAX for generators).
    int max_radius() const;

    /// Lattice only: canonical id of a coordinate (materializes as needed).
    VertexId lattice_id(std::span<const std::int64_t> coords) const;
    std::vector<std::int64_t> lattice_coords(VertexId v) const;

    /// Infimum of kappa over the whole vertex set (generators only).
    double kappa_min() const { return kappa_spec_.min_value(); }

private:
    GraphSource() = default;

    void extend_locked(int radius) const;
    std::int64_t ball_count(int radius) const; // lattice closed form

    Kind kind_ = Kind::Explicit;
    int dim_ = 0;
    int degree_ = 0;
    double edge_weight_ = 0.0;
    Potential kappa_spec_;
    Potential measure_spec_;
    VertexId root_ = 0;

    mutable std::mutex mutex_;
    mutable std::shared_ptr<const WeightedGraph> cache_;
    mutable int cached_radius_ = -1;
    // shell_start_[r] = first id of shell r; shell_start_.back() = total count
    mutable std::vector<std::size_t> shell_start_;
    mutable std::vector<std::vector<std::int64_t>> coords_; // lattice: id -> coords

    // explicit graphs: fixed data
    std::shared_ptr<const WeightedGraph> fixed_;
    std::vector<int> level_of_;           // by local index
    std::vector<std::size_t> level_start_; // prefix offsets into bfs_order_
    std::vector<VertexId> bfs_order_;
    int eccentricity_ = 0;
};

/// Nested regions B_1 ⊆ B_2 ⊆ ... exhausting the graph. region(n) is the
/// open ball {dist(root, ·) < n}, so B_1 = {root}.
struct Exhaustion {
    std::shared_ptr<const GraphSource> source;

    VertexId root() const { return source->root(); }
    std::vector<VertexId> region(int n) const;
    /// Truncation that contains region(n) together with all its neighbors.
    std::shared_ptr<const WeightedGraph> cover(int n) const;
    int max_index() const;
};

struct GraphModel {
    std::shared_ptr<const GraphSource> source;
    Exhaustion exhaustion;
};

GraphModel build_lattice(int dim, int radius, double edge_weight = 0.5,
                         Potential kappa = Potential::zero(),
                         Potential measure = Potential::constant(1.0));

GraphModel build_regular_tree(int degree, int depth, double edge_weight = 0.5,
                              Potential kappa = Potential::zero(),
                              Potential measure = Potential::constant(1.0));

GraphModel load_graph(const std::string& path);
GraphModel parse_graph_json(const std::string& text);

/// Canonical serialization: vertices by id, each undirected edge once as
/// {u:min, v:max}, alphabetical keys. Re-export of an export is bit-identical.
std::string graph_to_json(const GraphSource& src);
void save_graph(const GraphSource& src, const std::string& path);

} // namespace shnol
