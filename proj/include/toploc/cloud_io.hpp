#pragma once

#include <filesystem>

#include "toploc/pointcloud.hpp"

namespace toploc {

// Binary cloud format, little-endian:
//   magic "TLPC" | version u32 | count u64 | flags u32 (bit0: has per-point time)
//   then per point: x y z as f64 (+ time f64 when flagged).
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_cloud(const std::filesystem::path& path);

// ASCII PLY interop (positions only; per-point time as a "t" property).
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_ply(const std::filesystem::path& path);

}  // namespace toploc
