#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "madql/common.hpp"

namespace madql {

struct Building {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    double height = 0.0;

    // Closed rectangle test on the ground projection.
    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }

    friend bool operator==(const Building&, const Building&) = default;
};

class CityMap {
public:
    CityMap() = default;
    CityMap(double width, double depth, std::vector<Building> buildings);

    double width() const { return width_; }
    double depth() const { return depth_; }
    double diagonal() const;
    const std::vector<Building>& buildings() const { return buildings_; }
    double max_height() const { return max_height_; }

    bool in_bounds(const Vec2& p) const { return p.x >= 0.0 && p.x <= width_ && p.y >= 0.0 && p.y <= depth_; }
    bool inside_any_footprint(const Vec2& p) const;

    friend bool operator==(const CityMap& a, const CityMap& b)
    {
        return a.width_ == b.width_ && a.depth_ == b.depth_ && a.buildings_ == b.buildings_;
    }

private:
    double width_ = 0.0;
    double depth_ = 0.0;
    std::vector<Building> buildings_;
    double max_height_ = 0.0;
};

/// Manhattan grid: blocks_x × blocks_y blocks, one building per block, separated
/// by streets of the given width (half-width streets along the map border).
struct BlockSpec {
    int blocks_x = 5;
    int blocks_y = 5;
    double street_width = 30.0;
    double rayleigh_scale = 18.0;
    double min_height = 5.0;
    double max_height = 40.0;

    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

CityMap generate_city(std::uint64_t seed, double width, double depth, const BlockSpec& spec);

// LoS iff every 1 m ground-projection sample of the segment that falls inside a
// footprint lies strictly above that building. Requires uav.z > ground.z >= 0.
bool is_los(const CityMap& map, const Vec3& uav, const Vec3& ground);

// Same predicate evaluated by brute-force sampling at an arbitrary resolution.
bool is_los_sampled(const CityMap& map, const Vec3& uav, const Vec3& ground, double resolution);

struct NodeSet {
    std::vector<Vec2> positions;
    std::vector<bool> known;  // true = anchor

    int size() const { return static_cast<int>(positions.size()); }
    bool is_anchor(int k) const { return known.at(k); }
    std::vector<int> anchors() const;
    std::vector<int> unknowns() const;

    friend bool operator==(const NodeSet&, const NodeSet&) = default;
};

// Places `count` nodes uniformly on street area, at least `margin` from the map
// border and `min_separation` apart; the first `anchors` nodes are anchors.
NodeSet place_nodes(std::uint64_t seed, const CityMap& map, int count, int anchors, double margin,
                    double min_separation);

struct MissionSpec {
    Vec3 start;
    Vec3 end;
    double altitude = 60.0;
    double step = 50.0;
    int max_steps = 20;
    double battery_max = 20.0;

    friend bool operator==(const MissionSpec&, const MissionSpec&) = default;
};

enum class Action : int { kHover = 0, kRight = 1, kLeft = 2, kUp = 3, kDown = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {Action::kHover, Action::kRight, Action::kLeft,
                                                                  Action::kUp, Action::kDown};

Vec3 displacement(Action a, double step);
double battery_cost(Action a);
std::string_view action_name(Action a);
Action action_from_name(std::string_view name);

struct ShortestPath {
    std::vector<Action> actions;
    double cost = 0.0;
};

bool on_lattice(const Vec3& p, const Vec3& origin, double step);

// Minimal move sequence between two points of the same step lattice and
// altitude; all x moves first, then all y moves.
ShortestPath shortest_path(const Vec3& from, const Vec3& to, double step);

// Number of moves of the shortest path, without building the action list.
double shortest_path_cost(const Vec3& from, const Vec3& to, double step);

}  // namespace madql
