#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace idmgym {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// One lane: a piecewise-linear centerline with constant width.
struct Lane {
  std::string id;
  std::vector<Point2> centerline;
  double width = 3.5;
  std::vector<std::string> successors;
  std::optional<std::string> left;
  std::optional<std::string> right;

  // Derived on load.
  std::vector<double> cumulative;  ///< arc length at each vertex, cumulative[0] == 0
  [[nodiscard]] double length() const noexcept { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Position in the road-aligned frame of one lane. d is positive to the left.
struct RoadCoord {
  std::size_t lane = 0;  ///< index into RoadNetwork::lanes()
  double s = 0.0;
  double d = 0.0;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  ///< radians, counter-clockwise from +x
};

/// Immutable lane graph. Build through RoadNetwork::build or load_network,
/// both of which validate every invariant or throw.
class RoadNetwork {
 public:
  static RoadNetwork build(std::vector<Lane> lanes, std::vector<std::string> sources,
                           std::vector<std::string> sinks);

  [[nodiscard]] const std::vector<Lane>& lanes() const noexcept { return lanes_; }
  [[nodiscard]] const Lane& lane(std::size_t i) const { return lanes_.at(i); }
  [[nodiscard]] std::size_t lane_count() const noexcept { return lanes_.size(); }
  [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const;
  [[nodiscard]] std::size_t index_of(const std::string& id) const;  ///< throws when unknown

  [[nodiscard]] const std::vector<std::size_t>& sources() const noexcept { return sources_; }
  [[nodiscard]] const std::vector<std::size_t>& sinks() const noexcept { return sinks_; }
  [[nodiscard]] const std::vector<std::size_t>& successors(std::size_t lane) const {
    return successors_.at(lane);
  }
  [[nodiscard]] std::optional<std::size_t> left_of(std::size_t lane) const { return left_.at(lane); }
  [[nodiscard]] std::optional<std::size_t> right_of(std::size_t lane) const { return right_.at(lane); }

  /// Lanes reachable through left/right links from `lane`, ordered from the
  /// rightmost to the leftmost.
  [[nodiscard]] std::vector<std::size_t> segment_lanes(std::size_t lane) const;
  /// Largest segment size over the network.
  [[nodiscard]] std::size_t max_segment_width() const;

 private:
  std::vector<Lane> lanes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> successors_;
  std::vector<std::optional<std::size_t>> left_;
  std::vector<std::optional<std::size_t>> right_;
  std::vector<std::size_t> sources_;
  std::vector<std::size_t> sinks_;
};

/// Network JSON:
/// {lanes:[{id, centerline:[[x,y],...], width, successors:[...], left, right}],
///  sources:[...], sinks:[...]}
RoadNetwork load_network(const std::filesystem::path& path);
RoadNetwork network_from_json(const std::string& text, const std::string& source = "<json>");
std::string network_to_json(const RoadNetwork& net);

/// Point at arc length s displaced d along the left normal. Heading is the
/// tangent of the segment containing s (the outgoing one at a vertex).
Pose road_to_global(const RoadNetwork& net, const RoadCoord& rc);

/// Unbounded projection onto one lane: nearest point of the centerline.
/// Returns s in [0, length] and the signed lateral distance.
struct LaneProjection {
  double s = 0.0;
  double d = 0.0;
  bool within_extent = true;  ///< foot of the perpendicular lies on the lane
};
LaneProjection project_onto_lane(const Lane& lane, double x, double y);

/// Nearest lane whose |d| <= width/2 + tolerance, if any.
std::optional<RoadCoord> global_to_road(const RoadNetwork& net, double x, double y,
                                        double tolerance = 1e-9);

/// True iff no lane contains the point (closed boundary, zero tolerance).
bool is_off_road(const RoadNetwork& net, double x, double y);

}  // namespace idmgym
