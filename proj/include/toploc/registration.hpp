#pragma once

#include "toploc/pointcloud.hpp"

namespace toploc {

enum class RegistrationBackend { PointToPoint, PointToPlane };

struct RegistrationConfig {
    int max_iter = 50;
    double tol = 1e-8;            // tangent-space update norm
    double max_corr_dist = 1.0;   // correspondence gate, shrinks over iterations
    double gate_shrink = 0.9;     // multiplier applied every gate_shrink_period iters
    int gate_shrink_period = 5;
    double min_inliers = 0.3;     // below this fraction the result is a failure
    RegistrationBackend backend = RegistrationBackend::PointToPoint;
    int normal_neighbors = 8;     // for point-to-plane normal estimation

    // covariance model: base diag scaled by mean_residual / inlier_fraction
    double cov_base_rot = 0.05;   // rad
    double cov_base_trans = 0.5;  // m
    double min_sigma_rot = 1e-3;  // rad floor
    double min_sigma_trans = 1e-2;  // m floor
};

struct RegistrationResult {
    Pose transform;            // source -> target
    bool converged = false;
    int iterations = 0;
    double inlier_fraction = 0.0;
    double mean_residual = 0.0;  // m, over matched correspondences
    Mat6 covariance = Mat6::Zero();
};

// Rigid registration of source onto target, iterating nearest-neighbor
// correspondences under a shrinking distance gate from the given initial
// guess. Throws ParamError on empty inputs.
RegistrationResult icp_register(const PointCloud& source, const PointCloud& target,
                                const Pose& guess, const RegistrationConfig& cfg);

// Same, with a prebuilt target index (reused across calls against one submap).
RegistrationResult icp_register(const PointCloud& source, const SpatialIndex& target_index,
                                const Pose& guess, const RegistrationConfig& cfg);

// Covariance of a registration measurement: base diagonal scaled by
// mean_residual / inlier_fraction with per-axis floors. Worse alignment or
// fewer inliers always inflates it.
Mat6 estimate_covariance(const RegistrationResult& result, const RegistrationConfig& cfg);

}  // namespace toploc
