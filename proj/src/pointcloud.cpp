#include "toploc/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>

#include "toploc/error.hpp"

namespace toploc {

PointCloud PointCloud::transformed(const Pose& T) const {
    PointCloud out;
    out.points.reserve(points.size());
    for (const Vec3& p : points) out.points.push_back(T * p);
    out.times = times;
    out.frame = frame;
    return out;
}

void PointCloud::append(const PointCloud& other) {
    if (points.empty()) {
        points = other.points;
        times = other.times;
        if (frame.empty()) frame = other.frame;
        return;
    }
    if (has_times() && other.has_times()) {
        times.insert(times.end(), other.times.begin(), other.times.end());
    } else {
        times.clear();
    }
    points.insert(points.end(), other.points.begin(), other.points.end());
}

namespace {

struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
    bool operator<(const VoxelKey& o) const {
        if (x != o.x) return x < o.x;
        if (y != o.y) return y < o.y;
        return z < o.z;
    }
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const {
        // 64-bit mix of the three coordinates
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t v : {k.x, k.y, k.z}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

VoxelKey voxel_of(const Vec3& p, double inv_voxel) {
    return VoxelKey{static_cast<std::int64_t>(std::floor(p.x() * inv_voxel)),
                    static_cast<std::int64_t>(std::floor(p.y() * inv_voxel)),
                    static_cast<std::int64_t>(std::floor(p.z() * inv_voxel))};
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
    if (!(voxel > 0.0)) throw ParamError("voxel_downsample: voxel size must be positive");
    const double inv = 1.0 / voxel;
    std::unordered_map<VoxelKey, std::pair<Vec3, std::size_t>, VoxelKeyHash> cells;
    cells.reserve(cloud.size());
    for (const Vec3& p : cloud.points) {
        auto& cell = cells[voxel_of(p, inv)];
        cell.first += p;
        cell.second += 1;
    }
    // Deterministic output order regardless of hash-table iteration.
    std::vector<std::pair<VoxelKey, Vec3>> cents;
    cents.reserve(cells.size());
    for (const auto& [key, acc] : cells)
        cents.emplace_back(key, acc.first / static_cast<double>(acc.second));
    std::sort(cents.begin(), cents.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    PointCloud out;
    out.frame = cloud.frame;
    out.points.reserve(cents.size());
    for (const auto& [key, c] : cents) out.points.push_back(c);
    return out;
}

PointCloud uniform_downsample(const PointCloud& cloud, std::size_t nth) {
    if (nth == 0) throw ParamError("uniform_downsample: nth must be >= 1");
    PointCloud out;
    out.frame = cloud.frame;
    out.points.reserve(cloud.size() / nth + 1);
    for (std::size_t i = 0; i < cloud.size(); i += nth) out.points.push_back(cloud.points[i]);
    return out;
}

PointCloud range_filter(const PointCloud& cloud, double min_r, double max_r) {
    if (!(min_r >= 0.0) || !(min_r < max_r))
        throw ParamError("range_filter: need 0 <= min_r < max_r");
    PointCloud out;
    out.frame = cloud.frame;
    const bool with_times = cloud.has_times();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double r = cloud.points[i].norm();
        if (r >= min_r && r <= max_r) {
            out.points.push_back(cloud.points[i]);
            if (with_times) out.times.push_back(cloud.times[i]);
        }
    }
    return out;
}

// --- kd-tree ---------------------------------------------------------------

struct SpatialIndex::Node {
    std::size_t begin, end;  // leaf range into order_
    int axis = -1;
    double split = 0.0;
    std::unique_ptr<Node> left, right;
    bool leaf() const { return axis < 0; }
};

namespace {
constexpr std::size_t kLeafSize = 16;
}

SpatialIndex::SpatialIndex(const PointCloud& cloud) : cloud_(&cloud) {
    order_.resize(cloud.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!cloud.empty()) root_ = build(0, cloud.size(), 0);
}

std::unique_ptr<SpatialIndex::Node> SpatialIndex::build(std::size_t begin, std::size_t end,
                                                        int depth) {
    auto node = std::make_unique<Node>();
    node->begin = begin;
    node->end = end;
    if (end - begin <= kLeafSize) return node;

    // Split on the axis of largest extent.
    Vec3 lo = cloud_->points[order_[begin]];
    Vec3 hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(cloud_->points[order_[i]]);
        hi = hi.cwiseMax(cloud_->points[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                         const double pa = cloud_->points[a][axis];
                         const double pb = cloud_->points[b][axis];
                         if (pa != pb) return pa < pb;
                         return a < b;  // stable tie-break for determinism
                     });
    node->axis = axis;
    node->split = cloud_->points[order_[mid]][axis];
    node->left = build(begin, mid, depth + 1);
    node->right = build(mid, end, depth + 1);
    return node;
}

namespace {

struct HeapEntry {
    double dist2;
    std::size_t index;
    bool operator<(const HeapEntry& o) const {
        if (dist2 != o.dist2) return dist2 < o.dist2;
        return index < o.index;
    }
};

}  // namespace

std::vector<SpatialIndex::Neighbor> SpatialIndex::nearest(const Vec3& query,
                                                          std::size_t k) const {
    if (cloud_->empty()) throw ParamError("SpatialIndex::nearest: empty cloud");
    if (k < 1) throw ParamError("SpatialIndex::nearest: k must be >= 1");
    k = std::min(k, cloud_->size());

    const std::vector<Vec3>& pts = cloud_->points;
    std::priority_queue<HeapEntry> heap;
    std::vector<const Node*> stack;
    stack.push_back(root_.get());
    while (!stack.empty()) {
        const Node* node = stack.back();
        stack.pop_back();
        if (node->leaf()) {
            for (std::size_t i = node->begin; i < node->end; ++i) {
                const std::size_t idx = order_[i];
                const double d2 = (pts[idx] - query).squaredNorm();
                if (heap.size() < k) {
                    heap.push(HeapEntry{d2, idx});
                } else if (HeapEntry{d2, idx} < heap.top()) {
                    heap.pop();
                    heap.push(HeapEntry{d2, idx});
                }
            }
            continue;
        }
        const double delta = query[node->axis] - node->split;
        const Node* near = delta <= 0.0 ? node->left.get() : node->right.get();
        const Node* far = delta <= 0.0 ? node->right.get() : node->left.get();
        // push far first so the near side is explored first
        if (heap.size() < k || delta * delta <= heap.top().dist2) stack.push_back(far);
        stack.push_back(near);
    }

    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        out[i] = Neighbor{heap.top().index, std::sqrt(heap.top().dist2)};
        heap.pop();
    }
    return out;
}

bool SpatialIndex::nearest_within(const Vec3& query, double max_dist, Neighbor& out) const {
    if (cloud_->empty()) return false;
    auto nn = nearest(query, 1);
    if (nn[0].distance > max_dist) return false;
    out = nn[0];
    return true;
}

namespace {

void knn_search(const SpatialIndex::Node* node, const std::vector<Vec3>& pts,
                const std::vector<std::size_t>& order, const Vec3& q, std::size_t k,
                std::priority_queue<HeapEntry>& heap) {
    if (node->leaf()) {
        for (std::size_t i = node->begin; i < node->end; ++i) {
            const std::size_t idx = order[i];
            const double d2 = (pts[idx] - q).squaredNorm();
            if (heap.size() < k) {
                heap.push(HeapEntry{d2, idx});
            } else if (HeapEntry{d2, idx} < heap.top()) {
                heap.pop();
                heap.push(HeapEntry{d2, idx});
            }
        }
        return;
    }
    const double delta = q[node->axis] - node->split;
    const SpatialIndex::Node* near = delta <= 0.0 ? node->left.get() : node->right.get();
    const SpatialIndex::Node* far = delta <= 0.0 ? node->right.get() : node->left.get();
    knn_search(near, pts, order, q, k, heap);
    if (heap.size() < k || delta * delta <= heap.top().dist2) {
        knn_search(far, pts, order, q, k, heap);
    }
}

}  // namespace

}  // namespace toploc
