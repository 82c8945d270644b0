#include "madql/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace madql {

CityMap::CityMap(double width, double depth, std::vector<Building> buildings)
    : width_(width), depth_(depth), buildings_(std::move(buildings))
{
    if (!(width_ > 0.0) || !(depth_ > 0.0))
        throw ConfigError("map: width and depth must be positive");
    for (std::size_t i = 0; i < buildings_.size(); ++i) {
        const Building& b = buildings_[i];
        if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max) || !(b.height > 0.0))
            throw ConfigError(fmt::format("map.buildings[{}]: degenerate footprint or non-positive height", i));
        if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > width_ || b.y_max > depth_)
            throw ConfigError(fmt::format("map.buildings[{}]: footprint outside the map", i));
        max_height_ = std::max(max_height_, b.height);
    }
}

double CityMap::diagonal() const { return std::hypot(width_, depth_); }

bool CityMap::inside_any_footprint(const Vec2& p) const
{
    return std::any_of(buildings_.begin(), buildings_.end(), [&](const Building& b) { return b.contains(p.x, p.y); });
}

CityMap generate_city(std::uint64_t seed, double width, double depth, const BlockSpec& spec)
{
    if (!(width > 0.0) || !(depth > 0.0))
        throw ConfigError("generate_city: width and depth must be positive");
    if (spec.blocks_x <= 0 || spec.blocks_y <= 0)
        throw ConfigError("generate_city: block grid must have at least one block");
    const double pitch_x = width / spec.blocks_x;
    const double pitch_y = depth / spec.blocks_y;
    const double half = spec.street_width / 2.0;
    if (!(spec.street_width >= 0.0) || spec.street_width >= pitch_x || spec.street_width >= pitch_y)
        throw ConfigError("generate_city: street width leaves no room for buildings");
    if (!(spec.min_height > 0.0) || spec.min_height > spec.max_height || !(spec.rayleigh_scale > 0.0))
        throw ConfigError("generate_city: invalid height distribution");

    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Building> buildings;
    buildings.reserve(static_cast<std::size_t>(spec.blocks_x * spec.blocks_y));
    for (int j = 0; j < spec.blocks_y; ++j) {
        for (int i = 0; i < spec.blocks_x; ++i) {
            // Rayleigh by inversion, then clipped to the allowed range.
            const double u = unit(rng);
            const double h = spec.rayleigh_scale * std::sqrt(-2.0 * std::log1p(-u));
            buildings.push_back({i * pitch_x + half, j * pitch_y + half, (i + 1) * pitch_x - half,
                                 (j + 1) * pitch_y - half, std::clamp(h, spec.min_height, spec.max_height)});
        }
    }
    return CityMap(width, depth, std::move(buildings));
}

namespace {

struct Segment {
    Vec3 ground;
    Vec3 delta;
    int samples = 1;  // number of intervals n; sample i sits at t = i / n

    Vec3 at(int i) const
    {
        const double t = static_cast<double>(i) / samples;
        return {ground.x + t * delta.x, ground.y + t * delta.y, ground.z + t * delta.z};
    }
};

Segment make_segment(const Vec3& uav, const Vec3& ground, double resolution)
{
    Segment s{ground, uav - ground, 1};
    const double len = std::hypot(s.delta.x, s.delta.y);
    s.samples = std::max(1, static_cast<int>(std::ceil(len / resolution)));
    return s;
}

void check_endpoints(const Vec3& uav, const Vec3& ground)
{
    if (!(uav.z > ground.z) || !(ground.z >= 0.0))
        throw UsageError("is_los: requires uav.z > ground.z >= 0");
}

// Parameter interval of the ground projection inside [lo, hi] along one axis.
bool slab(double origin, double dir, double lo, double hi, double& t0, double& t1)
{
    if (dir == 0.0)
        return origin >= lo && origin <= hi;
    double a = (lo - origin) / dir;
    double b = (hi - origin) / dir;
    if (a > b)
        std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    return true;
}

}  // namespace

bool is_los(const CityMap& map, const Vec3& uav, const Vec3& ground)
{
    check_endpoints(uav, ground);
    const Segment seg = make_segment(uav, ground, 1.0);
    const double bx_lo = std::min(uav.x, ground.x), bx_hi = std::max(uav.x, ground.x);
    const double by_lo = std::min(uav.y, ground.y), by_hi = std::max(uav.y, ground.y);

    for (const Building& b : map.buildings()) {
        if (b.x_max < bx_lo || b.x_min > bx_hi || b.y_max < by_lo || b.y_min > by_hi)
            continue;
        if (b.height < ground.z)
            continue;
        double t0 = 0.0, t1 = 1.0;
        if (!slab(ground.x, seg.delta.x, b.x_min, b.x_max, t0, t1))
            continue;
        if (!slab(ground.y, seg.delta.y, b.y_min, b.y_max, t0, t1))
            continue;
        constexpr double kSlack = 1e-9;
        if (t0 > t1 + kSlack)
            continue;
        // Segment height grows with t, so the lowest sample inside the footprint
        // is the binding one. Locate it, then confirm with the exact sample test.
        if (ground.z + t0 * seg.delta.z >= b.height + kSlack)
            continue;
        const int n = seg.samples;
        int i = std::clamp(static_cast<int>(std::ceil(t0 * n - kSlack)), 0, n);
        const int i_max = std::clamp(static_cast<int>(std::floor(t1 * n + kSlack)) + 1, 0, n);
        auto inside = [&](int k) {
            const Vec3 p = seg.at(k);
            return b.contains(p.x, p.y);
        };
        while (i > 0 && inside(i - 1))
            --i;
        while (i <= i_max && !inside(i))
            ++i;
        if (i > i_max)
            continue;
        if (!(seg.at(i).z > b.height))
            return false;
    }
    return true;
}

bool is_los_sampled(const CityMap& map, const Vec3& uav, const Vec3& ground, double resolution)
{
    check_endpoints(uav, ground);
    const Segment seg = make_segment(uav, ground, resolution);
    for (int i = 0; i <= seg.samples; ++i) {
        const Vec3 p = seg.at(i);
        for (const Building& b : map.buildings()) {
            if (b.contains(p.x, p.y) && !(p.z > b.height))
                return false;
        }
    }
    return true;
}

std::vector<int> NodeSet::anchors() const
{
    std::vector<int> out;
    for (int k = 0; k < size(); ++k)
        if (known[k])
            out.push_back(k);
    return out;
}

std::vector<int> NodeSet::unknowns() const
{
    std::vector<int> out;
    for (int k = 0; k < size(); ++k)
        if (!known[k])
            out.push_back(k);
    return out;
}

NodeSet place_nodes(std::uint64_t seed, const CityMap& map, int count, int anchors, double margin,
                    double min_separation)
{
    if (count < 2 || anchors < 1 || anchors >= count)
        throw ConfigError("nodes: need at least one anchor and at least one unknown node");
    Rng rng(seed);
    std::uniform_real_distribution<double> ux(margin, map.width() - margin);
    std::uniform_real_distribution<double> uy(margin, map.depth() - margin);
    NodeSet nodes;
    int attempts = 0;
    while (nodes.size() < count) {
        if (++attempts > 100000)
            throw ConfigError("nodes: could not place nodes on street area with the requested separation");
        const Vec2 p{ux(rng), uy(rng)};
        if (map.inside_any_footprint(p))
            continue;
        const bool crowded = std::any_of(nodes.positions.begin(), nodes.positions.end(),
                                         [&](const Vec2& q) { return distance(p, q) < min_separation; });
        if (crowded)
            continue;
        nodes.positions.push_back(p);
        nodes.known.push_back(nodes.size() <= anchors);
    }
    return nodes;
}

Vec3 displacement(Action a, double step)
{
    switch (a) {
    case Action::kHover:
        return {0.0, 0.0, 0.0};
    case Action::kRight:
        return {step, 0.0, 0.0};
    case Action::kLeft:
        return {-step, 0.0, 0.0};
    case Action::kUp:
        return {0.0, step, 0.0};
    case Action::kDown:
        return {0.0, -step, 0.0};
    }
    throw UsageError("displacement: invalid action");
}

double battery_cost(Action a) { return a == Action::kHover ? 0.5 : 1.0; }

std::string_view action_name(Action a)
{
    static constexpr std::array<std::string_view, kNumActions> kNames = {"hover", "right", "left", "up", "down"};
    return kNames.at(static_cast<std::size_t>(a));
}

Action action_from_name(std::string_view name)
{
    for (Action a : kAllActions)
        if (action_name(a) == name)
            return a;
    throw ConfigError(fmt::format("unknown action '{}'", name));
}

namespace {

bool integral(double v, double& out)
{
    out = std::round(v);
    return std::abs(v - out) <= 1e-9 * std::max(1.0, std::abs(v));
}

}  // namespace

bool on_lattice(const Vec3& p, const Vec3& origin, double step)
{
    double ix = 0.0, iy = 0.0;
    return p.z == origin.z && integral((p.x - origin.x) / step, ix) && integral((p.y - origin.y) / step, iy);
}

double shortest_path_cost(const Vec3& from, const Vec3& to, double step)
{
    double nx = 0.0, ny = 0.0;
    if (!(step > 0.0) || from.z != to.z || !integral((to.x - from.x) / step, nx) ||
        !integral((to.y - from.y) / step, ny))
        throw ConfigError(fmt::format("shortest_path: ({}, {}, {}) and ({}, {}, {}) are not on a common step-{} lattice",
                                      from.x, from.y, from.z, to.x, to.y, to.z, step));
    return std::abs(nx) + std::abs(ny);
}

ShortestPath shortest_path(const Vec3& from, const Vec3& to, double step)
{
    ShortestPath sp;
    sp.cost = shortest_path_cost(from, to, step);
    const int nx = static_cast<int>(std::lround((to.x - from.x) / step));
    const int ny = static_cast<int>(std::lround((to.y - from.y) / step));
    sp.actions.reserve(static_cast<std::size_t>(sp.cost));
    sp.actions.insert(sp.actions.end(), static_cast<std::size_t>(std::abs(nx)), nx > 0 ? Action::kRight : Action::kLeft);
    sp.actions.insert(sp.actions.end(), static_cast<std::size_t>(std::abs(ny)), ny > 0 ? Action::kUp : Action::kDown);
    return sp;
}

}  // namespace madql
