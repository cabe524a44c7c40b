#pragma once

#include <memory>
#include <string>
#include <vector>

#include "toploc/geometry.hpp"

namespace toploc {

// Point cloud with optional per-point timestamp offsets (seconds from scan
// start). Clouds are treated as immutable once handed to an index or a
// pipeline stage.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<double> times;  // empty, or one entry per point in [0, scan_period]
    std::string frame;

    bool has_times() const { return !times.empty(); }
    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    PointCloud transformed(const Pose& T) const;
    void append(const PointCloud& other);
};

enum class DownsampleMode {
    VoxelCentroid,  // one centroid per occupied voxel
    UniformNth,     // keep every Nth point
};

// Voxel-grid downsample; the representative is the centroid of each occupied
// voxel. Keying is floor(p/voxel). Per-point times do not survive (output is
// an aggregate).
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

// Keep every nth point (uniform sampling mode for submaps).
PointCloud uniform_downsample(const PointCloud& cloud, std::size_t nth);

// Keep points with min_r <= |p| <= max_r.
PointCloud range_filter(const PointCloud& cloud, double min_r, double max_r);

// Exact k-nearest-neighbor index (kd-tree) over a cloud. The cloud must
// outlive the index. Queries are const and safe to run concurrently.
class SpatialIndex {
public:
    explicit SpatialIndex(const PointCloud& cloud);

    struct Neighbor {
        std::size_t index;
        double distance;
    };

    // k nearest points by Euclidean distance, ascending. Throws ParamError on
    // an empty cloud or k < 1.
    std::vector<Neighbor> nearest(const Vec3& query, std::size_t k) const;

    // Single nearest neighbor within max_dist; returns false if none.
    bool nearest_within(const Vec3& query, double max_dist, Neighbor& out) const;

    const PointCloud& cloud() const { return *cloud_; }

private:
    struct Node;
    std::unique_ptr<Node> build(std::size_t begin, std::size_t end, int depth);

    const PointCloud* cloud_;
    std::vector<std::size_t> order_;
    std::unique_ptr<Node> root_;
};

}  // namespace toploc
