#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsa/common.hpp"

namespace nsa::plants {

struct RoverParams {
    double radius = 0.1;       // r
    double v_max = 0.8;
    double a_max = 1.6;
    double l_max = 2.0;
    int sensor_count = 32;     // n
    double d_safe = 0.2;
    double epsilon = 0.01;     // max obstacle protrusion between adjacent sensor rays
    int rsc_multiplier = 5;    // m
    double dt = 0.1;
    double target_x = 0.0;
    double target_y = 0.0;
    double target_radius = 0.1;
    double reach_distance = 0.2;

    double braking_distance(double v) const { return v * v / (2.0 * a_max); }
    double max_braking_distance() const { return braking_distance(v_max); }
};

/// Position (m), heading (rad), speed (m/s) and the n range readings measured from
/// the rover center. Heading is the direction of travel; it only changes while moving.
struct RoverState {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double v = 0.0;
    std::vector<double> sensors;

    double min_reading() const {
        return sensors.empty() ? std::numeric_limits<double>::infinity()
                               : *std::min_element(sensors.begin(), sensors.end());
    }
    friend bool operator==(const RoverState&, const RoverState&) = default;
};

struct Circle {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.0;
    friend bool operator==(const Circle&, const Circle&) = default;
};

struct ObstacleField {
    std::vector<Circle> circles;
    std::uint64_t seed = 0;
    friend bool operator==(const ObstacleField&, const ObstacleField&) = default;
};

/// Distance along the ray (ox, oy) + t (dx, dy), |d| = 1, to the circle boundary;
/// +inf when the ray misses. Zero when the origin is inside the circle.
inline double ray_circle_distance(double ox, double oy, double dx, double dy, const Circle& c) {
    const double cx = c.x - ox;
    const double cy = c.y - oy;
    const double c2 = cx * cx + cy * cy - c.radius * c.radius;
    if (c2 <= 0.0) return 0.0;
    const double b = dx * cx + dy * cy;
    if (b <= 0.0) return std::numeric_limits<double>::infinity();
    const double disc = b * b - c2;
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    // c2 / (b + sqrt(disc)) == b - sqrt(disc) without cancellation
    return c2 / (b + std::sqrt(disc));
}

/// Reading i looks along heading + 2*pi*i/n; misses read l_max.
inline std::vector<double> sense(double x, double y, double heading, const ObstacleField& field,
                                 const RoverParams& params) {
    const int n = params.sensor_count;
    std::vector<double> readings(static_cast<std::size_t>(n), params.l_max);
    for (int i = 0; i < n; ++i) {
        const double angle = heading + 2.0 * std::numbers::pi * i / n;
        const double dx = std::cos(angle);
        const double dy = std::sin(angle);
        double best = params.l_max;
        for (const auto& c : field.circles) best = std::min(best, ray_circle_distance(x, y, dx, dy, c));
        readings[static_cast<std::size_t>(i)] = best;
    }
    return readings;
}

inline RoverState make_rover_state(double x, double y, double theta, double v, const ObstacleField& field,
                                   const RoverParams& params) {
    RoverState s{x, y, theta, v, {}};
    s.sensors = sense(x, y, theta, field, params);
    return s;
}

/// Center-to-surface distance to the nearest obstacle.
inline double obstacle_clearance(double x, double y, const ObstacleField& field) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : field.circles) best = std::min(best, std::hypot(x - c.x, y - c.y) - c.radius);
    return best;
}

inline bool rover_collides(const RoverState& s, const ObstacleField& field, const RoverParams& params) {
    return obstacle_clearance(s.x, s.y, field) < params.radius;
}

inline double distance_to_target(const RoverState& s, const RoverParams& params = {}) {
    return std::hypot(s.x - params.target_x, s.y - params.target_y);
}

/// Velocity-vector kinematics: v' = v + a dt (|a| <= a_max, |v'| <= v_max),
/// position advanced with the mean of old and new velocity so that constant
/// deceleration covers exactly v^2 / (2 a).
inline RoverState rover_step(const RoverState& s, double ax, double ay, const RoverParams& params,
                             const ObstacleField& field) {
    const double norm = std::hypot(ax, ay);
    if (norm > params.a_max) {
        ax *= params.a_max / norm;
        ay *= params.a_max / norm;
    }
    const double vx = s.v * std::cos(s.theta);
    const double vy = s.v * std::sin(s.theta);
    double nvx = vx + ax * params.dt;
    double nvy = vy + ay * params.dt;
    double speed = std::hypot(nvx, nvy);
    if (speed < 1e-12) {
        // full stop; round-off must not flip the heading
        nvx = nvy = speed = 0.0;
    }
    if (speed > params.v_max) {
        nvx *= params.v_max / speed;
        nvy *= params.v_max / speed;
        speed = params.v_max;
    }
    RoverState next;
    next.x = s.x + 0.5 * (vx + nvx) * params.dt;
    next.y = s.y + 0.5 * (vy + nvy) * params.dt;
    next.v = speed;
    next.theta = speed > 0.0 ? std::atan2(nvy, nvx) : s.theta;
    next.sensors = sense(next.x, next.y, next.theta, field, params);
    return next;
}

/// Same as rover_step, but a successor that penetrates an obstacle is a fault.
inline RoverState rover_step_checked(const RoverState& s, double ax, double ay, const RoverParams& params,
                                     const ObstacleField& field) {
    RoverState next = rover_step(s, ax, ay, params, field);
    if (rover_collides(next, field, params)) {
        throw SafetyViolation("rover penetrated an obstacle at (" + std::to_string(next.x) + ", " +
                              std::to_string(next.y) + ")");
    }
    return next;
}

struct FieldGenerationConfig {
    int count = 12;
    double min_radius = 0.25;
    double max_radius = 0.6;
    double half_extent = 5.0;
    double target_clearance = 1.0;
    int max_rejections = 10000;
};

inline ObstacleField generate_obstacle_field(std::uint64_t seed, const FieldGenerationConfig& cfg = {},
                                             const RoverParams& params = {}) {
    Rng rng = substream(seed, "field");
    std::uniform_real_distribution<double> coord(-cfg.half_extent, cfg.half_extent);
    std::uniform_real_distribution<double> radius(cfg.min_radius, cfg.max_radius);
    ObstacleField field;
    field.seed = seed;
    int rejections = 0;
    while (static_cast<int>(field.circles.size()) < cfg.count) {
        Circle c;
        c.x = coord(rng);
        c.y = coord(rng);
        c.radius = radius(rng);
        bool ok = std::hypot(c.x - params.target_x, c.y - params.target_y) - c.radius >= cfg.target_clearance;
        for (const auto& other : field.circles) {
            if (std::hypot(c.x - other.x, c.y - other.y) < c.radius + other.radius) ok = false;
        }
        if (ok) {
            field.circles.push_back(c);
        } else if (++rejections >= cfg.max_rejections) {
            throw GenerationFailure("obstacle field generation exceeded " + std::to_string(cfg.max_rejections) +
                                    " rejections");
        }
    }
    return field;
}

inline nlohmann::json to_json(const ObstacleField& field) {
    nlohmann::json j;
    j["seed"] = field.seed;
    auto& arr = j["obstacles"] = nlohmann::json::array();
    for (const auto& c : field.circles) arr.push_back({{"x", c.x}, {"y", c.y}, {"radius", c.radius}});
    return j;
}

inline ObstacleField field_from_json(const nlohmann::json& j) {
    try {
        ObstacleField field;
        field.seed = j.value("seed", std::uint64_t{0});
        for (const auto& o : j.at("obstacles")) {
            Circle c{o.at("x").get<double>(), o.at("y").get<double>(), o.at("radius").get<double>()};
            if (!(c.radius >= 0.0)) throw InvalidInput("obstacle radius must be non-negative");
            field.circles.push_back(c);
        }
        return field;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed obstacle field: ") + e.what());
    }
}

inline void save_field(const ObstacleField& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    out << to_json(field).dump(2) << '\n';
}

inline ObstacleField load_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed obstacle field: ") + e.what());
    }
    return field_from_json(j);
}

}  // namespace nsa::plants
