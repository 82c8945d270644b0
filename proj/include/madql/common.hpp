#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace madql {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec2 ground() const { return {x, y}; }

    friend bool operator==(const Vec3&, const Vec3&) = default;
    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
};

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }
inline double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Invalid configuration or input data (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A runtime invariant of the simulation was violated (CLI exit code 3).
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// API misuse, e.g. stepping a terminal state.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using Rng = std::mt19937_64;

// Derives an independent, reproducible seed for a named sub-stream of an
// experiment seed ("city", "shadowing", "init", "exploration", "pso", ...).
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0)
{
    return Rng(stream_seed(seed, stream, index));
}

// Correctly rounded sum of doubles (Shewchuk partials, as in Python's math.fsum).
double exact_sum(std::span<const double> values);

}  // namespace madql
