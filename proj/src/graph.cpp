#include "shnol/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace shnol {

// ---------------------------------------------------------------------------
// VertexFunction

VertexFunction VertexFunction::from_pairs(std::vector<std::pair<VertexId, double>> pairs) {
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    VertexFunction f;
    f.ids_.reserve(pairs.size());
    f.vals_.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i > 0 && pairs[i].first == pairs[i - 1].first)
            throw ConfigError("duplicate vertex id in function support");
        f.ids_.push_back(pairs[i].first);
        f.vals_.push_back(pairs[i].second);
    }
    return f;
}

VertexFunction VertexFunction::from_sorted(std::vector<VertexId> ids, std::vector<double> vals) {
    if (ids.size() != vals.size())
        throw ConfigError("id/value arrays of different length");
    VertexFunction f;
    f.ids_ = std::move(ids);
    f.vals_ = std::move(vals);
    return f;
}

double VertexFunction::value(VertexId v) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), v);
    if (it == ids_.end() || *it != v) return 0.0;
    return vals_[static_cast<std::size_t>(it - ids_.begin())];
}

bool VertexFunction::in_support(VertexId v) const {
    return std::binary_search(ids_.begin(), ids_.end(), v);
}

double VertexFunction::max_abs() const {
    double m = 0.0;
    for (double x : vals_) m = std::max(m, std::abs(x));
    return m;
}

// ---------------------------------------------------------------------------
// Potential

double Potential::at(VertexId v) const {
    auto it = std::lower_bound(overrides.begin(), overrides.end(), v,
                               [](const auto& p, VertexId id) { return p.first < id; });
    if (it != overrides.end() && it->first == v) return it->second;
    return base;
}

double Potential::sup_abs() const {
    double s = std::abs(base);
    for (const auto& [id, v] : overrides) s = std::max(s, std::abs(v));
    return s;
}

double Potential::min_value() const {
    double m = base;
    for (const auto& [id, v] : overrides) m = std::min(m, v);
    return m;
}

Potential Potential::indicator(std::span<const VertexId> support, double value) {
    Potential p;
    p.base = 0.0;
    for (VertexId v : support) p.overrides.emplace_back(v, value);
    p.canonicalize();
    return p;
}

void Potential::canonicalize() {
    std::sort(overrides.begin(), overrides.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < overrides.size(); ++i)
        if (overrides[i].first == overrides[i - 1].first)
            throw ConfigError("duplicate vertex id in potential overrides");
}

// ---------------------------------------------------------------------------
// WeightedGraph

std::optional<std::uint32_t> WeightedGraph::index_of(VertexId v) const {
    if (contiguous_ids) {
        if (v < 0 || static_cast<std::size_t>(v) >= ids.size()) return std::nullopt;
        return static_cast<std::uint32_t>(v);
    }
    auto it = std::lower_bound(ids.begin(), ids.end(), v);
    if (it == ids.end() || *it != v) return std::nullopt;
    return static_cast<std::uint32_t>(it - ids.begin());
}

double WeightedGraph::weight_sum(std::uint32_t i) const {
    double s = 0.0;
    for (const auto& [j, b] : adj[i]) s += b;
    return s;
}

std::size_t WeightedGraph::ordered_pair_count() const {
    std::size_t c = 0;
    for (const auto& row : adj) c += row.size();
    return c;
}

double WeightedGraph::edge_weight(VertexId x, VertexId y) const {
    auto ix = index_of(x);
    auto iy = index_of(y);
    if (!ix || !iy) return 0.0;
    for (const auto& [j, b] : adj[*ix])
        if (j == *iy) return b;
    return 0.0;
}

// ---------------------------------------------------------------------------
// GraphSource: lattice / tree generators

namespace {

constexpr std::int64_t kCoordOffset = 1 << 20;

std::int64_t pack_coords(std::span<const std::int64_t> c) {
    std::int64_t key = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (std::abs(c[i]) >= kCoordOffset)
            throw ConfigError("lattice coordinate out of supported range");
        key |= (c[i] + kCoordOffset) << (21 * i);
    }
    return key;
}

// Lexicographic enumeration of the sup-norm shell {max |x_i| = r}.
void enumerate_shell(int dim, std::int64_t r,
                     const std::function<void(std::span<const std::int64_t>)>& emit) {
    std::vector<std::int64_t> x(static_cast<std::size_t>(dim), -r);
    if (r == 0) {
        emit(x);
        return;
    }
    while (true) {
        std::int64_t sup = 0;
        for (std::int64_t xi : x) sup = std::max(sup, std::abs(xi));
        if (sup == r) emit(x);
        int i = dim - 1;
        while (i >= 0 && x[static_cast<std::size_t>(i)] == r) {
            x[static_cast<std::size_t>(i)] = -r;
            --i;
        }
        if (i < 0) break;
        ++x[static_cast<std::size_t>(i)];
    }
}

} // namespace

std::shared_ptr<const GraphSource>
GraphSource::lattice(int dim, double edge_weight, Potential kappa, Potential measure) {
    if (dim < 1) throw ConfigError("lattice dimension must be >= 1");
    if (!(edge_weight > 0.0)) throw ConfigError("edge weight must be positive");
    if (!(measure.min_value() > 0.0)) throw ConfigError("vertex measure must be positive");
    kappa.canonicalize();
    measure.canonicalize();
    auto src = std::shared_ptr<GraphSource>(new GraphSource());
    src->kind_ = Kind::Lattice;
    src->dim_ = dim;
    src->edge_weight_ = edge_weight;
    src->kappa_spec_ = std::move(kappa);
    src->measure_spec_ = std::move(measure);
    src->root_ = 0;
    return src;
}

std::shared_ptr<const GraphSource>
GraphSource::regular_tree(int degree, double edge_weight, Potential kappa, Potential measure) {
    if (degree < 3)
        throw ConfigError("tree degree must be >= 3 (degree 2 is the line; use a lattice)");
    if (!(edge_weight > 0.0)) throw ConfigError("edge weight must be positive");
    if (!(measure.min_value() > 0.0)) throw ConfigError("vertex measure must be positive");
    kappa.canonicalize();
    measure.canonicalize();
    auto src = std::shared_ptr<GraphSource>(new GraphSource());
    src->kind_ = Kind::Tree;
    src->degree_ = degree;
    src->edge_weight_ = edge_weight;
    src->kappa_spec_ = std::move(kappa);
    src->measure_spec_ = std::move(measure);
    src->root_ = 0;
    return src;
}

std::shared_ptr<const GraphSource>
GraphSource::explicit_graph(WeightedGraph g, VertexId root) {
    auto root_idx = g.index_of(root);
    if (!root_idx) throw ConfigError("root vertex not present in graph");
    auto src = std::shared_ptr<GraphSource>(new GraphSource());
    src->kind_ = Kind::Explicit;
    src->root_ = root;

    const std::size_t n = g.size();
    std::vector<int> level(n, -1);
    std::vector<VertexId> order;
    order.reserve(n);
    std::deque<std::uint32_t> queue;
    level[*root_idx] = 0;
    queue.push_back(*root_idx);
    std::vector<std::size_t> level_start = {0};
    int cur_level = 0;
    while (!queue.empty()) {
        std::uint32_t i = queue.front();
        queue.pop_front();
        if (level[i] > cur_level) {
            level_start.push_back(order.size());
            cur_level = level[i];
        }
        order.push_back(g.ids[i]);
        for (const auto& [j, b] : g.adj[i]) {
            (void)b;
            if (level[j] < 0) {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    if (order.size() != n)
        throw ConfigError("graph is not connected from the declared root");
    level_start.push_back(order.size());

    src->eccentricity_ = cur_level;
    src->level_of_.assign(level.begin(), level.end());
    src->level_start_ = std::move(level_start);
    src->bfs_order_ = std::move(order);
    src->fixed_ = std::make_shared<const WeightedGraph>(std::move(g));
    return src;
}

void GraphSource::extend_locked(int radius) const {
    // Rebuild the truncation from scratch at the requested radius. Ids are
    // shell-major, so every smaller ball is an id prefix of the new value.
    auto g = std::make_shared<WeightedGraph>();
    if (kind_ == Kind::Lattice) {
        std::unordered_map<std::int64_t, VertexId> coord_to_id;
        std::vector<std::vector<std::int64_t>> coords;
        std::vector<std::size_t> shell_start;
        for (int r = 0; r <= radius; ++r) {
            shell_start.push_back(coords.size());
            enumerate_shell(dim_, r, [&](std::span<const std::int64_t> c) {
                VertexId id = static_cast<VertexId>(coords.size());
                coord_to_id.emplace(pack_coords(c), id);
                coords.emplace_back(c.begin(), c.end());
            });
        }
        shell_start.push_back(coords.size());

        const std::size_t n = coords.size();
        g->ids.resize(n);
        g->adj.resize(n);
        g->kappa.resize(n);
        g->measure.resize(n);
        g->contiguous_ids = true;
        for (std::size_t i = 0; i < n; ++i) {
            g->ids[i] = static_cast<VertexId>(i);
            g->kappa[i] = kappa_spec_.at(static_cast<VertexId>(i));
            g->measure[i] = measure_spec_.at(static_cast<VertexId>(i));
            auto c = coords[i];
            for (int axis = 0; axis < dim_; ++axis) {
                for (int sgn : {-1, 1}) {
                    c[static_cast<std::size_t>(axis)] += sgn;
                    auto it = coord_to_id.find(pack_coords(c));
                    if (it != coord_to_id.end())
                        g->adj[i].emplace_back(static_cast<std::uint32_t>(it->second),
                                               edge_weight_);
                    c[static_cast<std::size_t>(axis)] -= sgn;
                }
            }
            std::sort(g->adj[i].begin(), g->adj[i].end());
        }
        coords_ = std::move(coords);
        shell_start_ = std::move(shell_start);
    } else { // Tree
        std::vector<std::size_t> shell_start = {0, 1};
        std::size_t n = 1;
        std::size_t prev_shell = 1;
        for (int r = 1; r <= radius; ++r) {
            prev_shell = (r == 1) ? static_cast<std::size_t>(degree_)
                                  : prev_shell * static_cast<std::size_t>(degree_ - 1);
            n += prev_shell;
            shell_start.push_back(n);
        }
        g->ids.resize(n);
        g->adj.resize(n);
        g->kappa.resize(n);
        g->measure.resize(n);
        g->contiguous_ids = true;
        for (std::size_t i = 0; i < n; ++i) {
            g->ids[i] = static_cast<VertexId>(i);
            g->kappa[i] = kappa_spec_.at(static_cast<VertexId>(i));
            g->measure[i] = measure_spec_.at(static_cast<VertexId>(i));
        }
        // children of shell r-1 fill shell r in order
        for (int r = 1; r <= radius; ++r) {
            std::size_t parent_begin = shell_start[static_cast<std::size_t>(r - 1)];
            std::size_t parent_end = shell_start[static_cast<std::size_t>(r)];
            std::size_t child = shell_start[static_cast<std::size_t>(r)];
            std::size_t per_parent =
                (r == 1) ? static_cast<std::size_t>(degree_)
                         : static_cast<std::size_t>(degree_ - 1);
            for (std::size_t p = parent_begin; p < parent_end; ++p) {
                for (std::size_t k = 0; k < per_parent; ++k, ++child) {
                    g->adj[p].emplace_back(static_cast<std::uint32_t>(child), edge_weight_);
                    g->adj[child].emplace_back(static_cast<std::uint32_t>(p), edge_weight_);
                }
            }
        }
        for (auto& row : g->adj) std::sort(row.begin(), row.end());
        shell_start_ = std::move(shell_start);
    }
    cache_ = std::move(g);
    cached_radius_ = radius;
}

std::shared_ptr<const WeightedGraph> GraphSource::truncation(int radius) const {
    if (radius < 0) throw ConfigError("truncation radius must be nonnegative");
    if (kind_ == Kind::Explicit) return fixed_;
    std::lock_guard<std::mutex> lock(mutex_);
    if (radius > cached_radius_) extend_locked(radius);
    return cache_;
}

std::vector<VertexId> GraphSource::ball(int radius) const {
    if (kind_ == Kind::Explicit) {
        int r = std::min(radius, eccentricity_);
        std::vector<VertexId> out(bfs_order_.begin(),
                                  bfs_order_.begin() +
                                      static_cast<std::ptrdiff_t>(
                                          level_start_[static_cast<std::size_t>(r) + 1]));
        std::sort(out.begin(), out.end());
        return out;
    }
    truncation(radius); // ensure shells are known
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t count = shell_start_[static_cast<std::size_t>(radius) + 1];
    std::vector<VertexId> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<VertexId>(i);
    return out;
}

int GraphSource::radius_of(VertexId v) const {
    if (kind_ == Kind::Explicit) {
        auto idx = fixed_->index_of(v);
        if (!idx) throw ConfigError("vertex id not present in graph");
        return level_of_[*idx];
    }
    if (v < 0) throw ConfigError("negative vertex id");
    // shell-major ids: the shell index follows from the closed-form ball
    // sizes, independent of what is materialized
    if (kind_ == Kind::Lattice) {
        double count = static_cast<double>(v) + 1.0;
        int r = static_cast<int>(
            std::ceil((std::pow(count, 1.0 / dim_) - 1.0) / 2.0 - 1e-9));
        while (r > 0 && v < ball_count(r - 1)) --r;
        while (v >= ball_count(r)) ++r;
        return r;
    }
    std::size_t total = 1, shell = 1;
    int r = 0;
    while (static_cast<std::size_t>(v) >= total) {
        shell = (r == 0) ? static_cast<std::size_t>(degree_)
                         : shell * static_cast<std::size_t>(degree_ - 1);
        total += shell;
        ++r;
    }
    return r;
}

std::int64_t GraphSource::ball_count(int radius) const {
    std::int64_t side = 2 * static_cast<std::int64_t>(radius) + 1;
    std::int64_t c = 1;
    for (int j = 0; j < dim_; ++j) c *= side;
    return c;
}

int GraphSource::cover_radius(std::span<const VertexId> ids) const {
    int r = 0;
    for (VertexId v : ids) r = std::max(r, radius_of(v));
    return r;
}

int GraphSource::max_radius() const {
    return kind_ == Kind::Explicit ? eccentricity_ : std::numeric_limits<int>::max();
}

VertexId GraphSource::lattice_id(std::span<const std::int64_t> coords) const {
    if (kind_ != Kind::Lattice) throw ConfigError("not a lattice graph");
    if (static_cast<int>(coords.size()) != dim_)
        throw ConfigError("coordinate dimension mismatch");
    std::int64_t sup = 0;
    for (std::int64_t c : coords) sup = std::max(sup, std::abs(c));
    truncation(static_cast<int>(sup));
    std::lock_guard<std::mutex> lock(mutex_);
    // shell-major: scan the shell of the right radius
    std::size_t lo = shell_start_[static_cast<std::size_t>(sup)];
    std::size_t hi = shell_start_[static_cast<std::size_t>(sup) + 1];
    for (std::size_t i = lo; i < hi; ++i) {
        if (std::equal(coords.begin(), coords.end(), coords_[i].begin()))
            return static_cast<VertexId>(i);
    }
    throw ConfigError("coordinate not found (internal)");
}

std::vector<std::int64_t> GraphSource::lattice_coords(VertexId v) const {
    if (kind_ != Kind::Lattice) throw ConfigError("not a lattice graph");
    std::lock_guard<std::mutex> lock(mutex_);
    if (v < 0 || static_cast<std::size_t>(v) >= coords_.size())
        throw ConfigError("vertex id not materialized");
    return coords_[static_cast<std::size_t>(v)];
}

// ---------------------------------------------------------------------------
// Exhaustion

std::vector<VertexId> Exhaustion::region(int n) const {
    if (n < 1) throw ConfigError("exhaustion index must be >= 1");
    return source->ball(n - 1);
}

std::shared_ptr<const WeightedGraph> Exhaustion::cover(int n) const {
    if (n < 1) throw ConfigError("exhaustion index must be >= 1");
    return source->truncation(std::min(n, source->max_radius()));
}

int Exhaustion::max_index() const {
    int mr = source->max_radius();
    return mr == std::numeric_limits<int>::max() ? mr : mr + 1;
}

// ---------------------------------------------------------------------------
// Builders

GraphModel build_lattice(int dim, int radius, double edge_weight,
                         Potential kappa, Potential measure) {
    if (radius < 1) throw ConfigError("lattice radius must be >= 1");
    auto src = GraphSource::lattice(dim, edge_weight, std::move(kappa), std::move(measure));
    src->truncation(radius);
    return GraphModel{src, Exhaustion{src}};
}

GraphModel build_regular_tree(int degree, int depth, double edge_weight,
                              Potential kappa, Potential measure) {
    if (depth < 1) throw ConfigError("tree depth must be >= 1");
    auto src = GraphSource::regular_tree(degree, edge_weight, std::move(kappa),
                                         std::move(measure));
    src->truncation(depth);
    return GraphModel{src, Exhaustion{src}};
}

// ---------------------------------------------------------------------------
// JSON graph files

GraphModel parse_graph_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid graph JSON: ") + e.what());
    }
    if (!j.contains("root") || !j.contains("vertices") || !j.contains("edges"))
        throw ConfigError("graph JSON must contain root, vertices, edges");

    struct VertexRow {
        VertexId id;
        double kappa;
        double m;
    };
    std::vector<VertexRow> rows;
    for (const auto& v : j.at("vertices")) {
        VertexRow row{v.at("id").get<VertexId>(),
                      v.value("kappa", 0.0),
                      v.value("m", 1.0)};
        if (!(row.m > 0.0))
            throw ConfigError("nonpositive measure at vertex " + std::to_string(row.id));
        rows.push_back(row);
    }
    if (rows.empty()) throw ConfigError("graph has no vertices");
    std::sort(rows.begin(), rows.end(),
              [](const VertexRow& a, const VertexRow& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].id == rows[i - 1].id)
            throw ConfigError("duplicate vertex id " + std::to_string(rows[i].id));

    WeightedGraph g;
    const std::size_t n = rows.size();
    g.ids.resize(n);
    g.kappa.resize(n);
    g.measure.resize(n);
    g.adj.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.ids[i] = rows[i].id;
        g.kappa[i] = rows[i].kappa;
        g.measure[i] = rows[i].m;
    }
    g.contiguous_ids = g.ids.front() == 0 && g.ids.back() == static_cast<VertexId>(n - 1);

    // collect undirected edges, reject conflicting duplicates
    std::map<std::pair<VertexId, VertexId>, double> edges;
    for (const auto& e : j.at("edges")) {
        VertexId u = e.at("u").get<VertexId>();
        VertexId v = e.at("v").get<VertexId>();
        double b = e.at("b").get<double>();
        if (u == v) throw ConfigError("self-loop at vertex " + std::to_string(u));
        if (!(b >= 0.0)) throw ConfigError("negative edge weight");
        auto key = std::minmax(u, v);
        auto [it, inserted] = edges.emplace(std::make_pair(key.first, key.second), b);
        if (!inserted && it->second != b)
            throw ConfigError("conflicting weights for duplicate edge (" +
                              std::to_string(u) + "," + std::to_string(v) + ")");
    }
    for (const auto& [key, b] : edges) {
        if (b == 0.0) continue;
        auto iu = g.index_of(key.first);
        auto iv = g.index_of(key.second);
        if (!iu || !iv) throw ConfigError("edge references unknown vertex");
        g.adj[*iu].emplace_back(*iv, b);
        g.adj[*iv].emplace_back(*iu, b);
    }
    for (auto& row : g.adj) std::sort(row.begin(), row.end());

    VertexId root = j.at("root").get<VertexId>();
    auto src = GraphSource::explicit_graph(std::move(g), root);
    return GraphModel{src, Exhaustion{src}};
}

GraphModel load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open graph file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_graph_json(ss.str());
}

std::string graph_to_json(const GraphSource& src) {
    std::shared_ptr<const WeightedGraph> g =
        src.truncation(std::min(src.max_radius(), 1 << 20));
    nlohmann::json j;
    j["root"] = src.root();
    auto vertices = nlohmann::json::array();
    for (std::size_t i = 0; i < g->size(); ++i) {
        vertices.push_back({{"id", g->ids[i]},
                            {"kappa", g->kappa[i]},
                            {"m", g->measure[i]}});
    }
    j["vertices"] = std::move(vertices);
    auto edges = nlohmann::json::array();
    for (std::size_t i = 0; i < g->size(); ++i) {
        for (const auto& [k, b] : g->adj[i]) {
            if (g->ids[i] < g->ids[k])
                edges.push_back({{"u", g->ids[i]}, {"v", g->ids[k]}, {"b", b}});
        }
    }
    j["edges"] = std::move(edges);
    return j.dump(1) + "\n";
}

void save_graph(const GraphSource& src, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write graph file: " + path);
    out << graph_to_json(src);
}

} // namespace shnol
