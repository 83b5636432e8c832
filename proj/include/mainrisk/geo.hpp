#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mainrisk::geo {

/// Planar point in feet. Ingest guarantees projected coordinates; no
/// geodetic math happens anywhere in this module.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Open polygonal chain with at least two vertices, no zero-length segment
/// and finite coordinates. Construction validates; everything downstream can
/// assume a well-formed line.
class Polyline {
public:
    explicit Polyline(std::vector<Point2> vertices)
        : vertices_(std::move(vertices)) {
        if (vertices_.size() < 2) {
            throw std::invalid_argument("polyline needs at least 2 vertices");
        }
        length_ = 0.0;
        for (size_t i = 0; i + 1 < vertices_.size(); ++i) {
            const auto& a = vertices_[i];
            const auto& b = vertices_[i + 1];
            if (!std::isfinite(a.x) || !std::isfinite(a.y)) {
                throw std::invalid_argument("polyline has non-finite vertex");
            }
            const double seg = distance(a, b);
            if (seg == 0.0) {
                throw std::invalid_argument("polyline has zero-length segment");
            }
            length_ += seg;
        }
        const auto& last = vertices_.back();
        if (!std::isfinite(last.x) || !std::isfinite(last.y)) {
            throw std::invalid_argument("polyline has non-finite vertex");
        }
    }

    const std::vector<Point2>& vertices() const { return vertices_; }
    double length() const { return length_; }

    friend bool operator==(const Polyline& a, const Polyline& b) {
        return a.vertices_ == b.vertices_;
    }

private:
    std::vector<Point2> vertices_;
    double length_ = 0.0;
};

inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double point_to_polyline_distance(Point2 p, const Polyline& line) {
    double best = std::numeric_limits<double>::infinity();
    const auto& v = line.vertices();
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        best = std::min(best, point_segment_distance(p, v[i], v[i + 1]));
    }
    return best;
}

inline double polyline_length(const Polyline& line) { return line.length(); }

/// Point at arc-length position s along the line, clamped to the endpoints.
inline Point2 point_at(const Polyline& line, double s) {
    const auto& v = line.vertices();
    if (s <= 0.0) {
        return v.front();
    }
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        const double seg = distance(v[i], v[i + 1]);
        if (s <= seg) {
            const double t = s / seg;
            return {v[i].x + t * (v[i + 1].x - v[i].x),
                    v[i].y + t * (v[i + 1].y - v[i].y)};
        }
        s -= seg;
    }
    return v.back();
}

struct BoundingBox {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();

    void expand(Point2 p) {
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }

    BoundingBox inflated(double margin) const {
        return {min_x - margin, min_y - margin, max_x + margin, max_y + margin};
    }

    bool intersects(const BoundingBox& o) const {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y &&
               o.min_y <= max_y;
    }
};

inline BoundingBox bounding_box(const Polyline& line) {
    BoundingBox box;
    for (const auto& p : line.vertices()) {
        box.expand(p);
    }
    return box;
}

namespace detail {

/// Pieces shorter than this are classified by their midpoint instead of
/// being split further. Keeps the documented overlap error within 0.1 ft.
inline constexpr double kMinPieceFt = 0.05;

inline double segment_overlap(Point2 a, Point2 b, const Polyline& street,
                              double halfwidth) {
    const double len = distance(a, b);
    const Point2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    const double d = point_to_polyline_distance(mid, street);
    // Distance-to-street is 1-Lipschitz along the piece, so the midpoint
    // distance certifies the whole piece when the slack exceeds len/2.
    if (d + 0.5 * len <= halfwidth) {
        return len;
    }
    if (d - 0.5 * len >= halfwidth) {
        return 0.0;
    }
    if (len < kMinPieceFt) {
        return d <= halfwidth ? len : 0.0;
    }
    return segment_overlap(a, mid, street, halfwidth) +
           segment_overlap(mid, b, street, halfwidth);
}

}  // namespace detail

/// Length of the portion of `main` lying within `halfwidth` feet of
/// `street` (the buffered street). Adaptive bisection of each main segment;
/// absolute error is bounded by 0.1 ft per main.
inline double overlap_length(const Polyline& main, const Polyline& street,
                             double halfwidth) {
    if (halfwidth <= 0.0) {
        throw std::invalid_argument("halfwidth must be positive");
    }
    const auto main_box = bounding_box(main).inflated(halfwidth);
    if (!main_box.intersects(bounding_box(street))) {
        return 0.0;
    }
    double covered = 0.0;
    const auto& v = main.vertices();
    for (size_t i = 0; i + 1 < v.size(); ++i) {
        covered += detail::segment_overlap(v[i], v[i + 1], street, halfwidth);
    }
    return covered;
}

using BlockId = std::int64_t;

struct MainAssignment {
    /// main_id -> block id of the buffered street with maximal overlap.
    /// Ties break toward the smallest block id; sorted by main_id.
    std::vector<std::pair<std::string, BlockId>> assigned;
    /// Mains with zero overlap against every block, sorted.
    std::vector<std::string> unmapped;

    const BlockId* find(const std::string& main_id) const {
        auto it = std::lower_bound(
            assigned.begin(), assigned.end(), main_id,
            [](const auto& e, const std::string& k) { return e.first < k; });
        if (it == assigned.end() || it->first != main_id) {
            return nullptr;
        }
        return &it->second;
    }
};

/// Maps each main to the block whose buffered street covers the greatest
/// length of it. Output does not depend on input ordering of mains or
/// blocks.
inline MainAssignment assign_mains_to_blocks(
    const std::vector<std::pair<std::string, Polyline>>& mains,
    const std::vector<std::pair<BlockId, Polyline>>& blocks, double halfwidth) {
    if (blocks.empty()) {
        throw std::invalid_argument("assign_mains_to_blocks: no blocks given");
    }
    if (halfwidth <= 0.0) {
        throw std::invalid_argument("halfwidth must be positive");
    }

    std::vector<BoundingBox> block_boxes;
    block_boxes.reserve(blocks.size());
    for (const auto& [id, line] : blocks) {
        block_boxes.push_back(bounding_box(line).inflated(halfwidth));
    }

    MainAssignment result;
    for (const auto& [main_id, line] : mains) {
        const auto main_box = bounding_box(line);
        double best_overlap = 0.0;
        BlockId best_block = 0;
        bool found = false;
        for (size_t i = 0; i < blocks.size(); ++i) {
            if (!main_box.intersects(block_boxes[i])) {
                continue;
            }
            const double ov = overlap_length(line, blocks[i].second, halfwidth);
            if (ov <= 0.0) {
                continue;
            }
            if (!found || ov > best_overlap ||
                (ov == best_overlap && blocks[i].first < best_block)) {
                best_overlap = ov;
                best_block = blocks[i].first;
                found = true;
            }
        }
        if (found) {
            result.assigned.emplace_back(main_id, best_block);
        } else {
            result.unmapped.push_back(main_id);
        }
    }
    std::sort(result.assigned.begin(), result.assigned.end());
    std::sort(result.unmapped.begin(), result.unmapped.end());
    return result;
}

/// Count of events within `radius` of the block line (closed ball: boundary
/// counts as inside), skipping excluded event ids.
inline int breaks_within_radius(
    const std::vector<std::pair<std::string, Point2>>& breaks,
    const Polyline& block_line, double radius,
    const std::set<std::string>& exclude) {
    if (radius <= 0.0) {
        throw std::invalid_argument("radius must be positive");
    }
    const auto box = bounding_box(block_line).inflated(radius);
    int count = 0;
    for (const auto& [event_id, p] : breaks) {
        if (p.x < box.min_x || p.x > box.max_x || p.y < box.min_y ||
            p.y > box.max_y) {
            continue;
        }
        if (exclude.contains(event_id)) {
            continue;
        }
        if (point_to_polyline_distance(p, block_line) <= radius) {
            ++count;
        }
    }
    return count;
}

}  // namespace mainrisk::geo
