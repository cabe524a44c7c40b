#include "toploc/registration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "toploc/error.hpp"

namespace toploc {

namespace {

struct Correspondences {
    std::vector<std::size_t> src;
    std::vector<std::size_t> tgt;
    double mean_dist = 0.0;
};

Correspondences match(const PointCloud& src_world, const SpatialIndex& index, double gate) {
    Correspondences c;
    double sum = 0.0;
    for (std::size_t i = 0; i < src_world.size(); ++i) {
        SpatialIndex::Neighbor nn;
        if (index.nearest_within(src_world.points[i], gate, nn)) {
            c.src.push_back(i);
            c.tgt.push_back(nn.index);
            sum += nn.distance;
        }
    }
    if (!c.src.empty()) c.mean_dist = sum / static_cast<double>(c.src.size());
    return c;
}

// closed-form rigid alignment of matched pairs (SVD of the cross-covariance)
Pose fit_point_to_point(const PointCloud& src, const PointCloud& tgt,
                        const Correspondences& c) {
    Vec3 mu_s = Vec3::Zero(), mu_t = Vec3::Zero();
    const double n = static_cast<double>(c.src.size());
    for (std::size_t k = 0; k < c.src.size(); ++k) {
        mu_s += src.points[c.src[k]];
        mu_t += tgt.points[c.tgt[k]];
    }
    mu_s /= n;
    mu_t /= n;
    Mat3 W = Mat3::Zero();
    for (std::size_t k = 0; k < c.src.size(); ++k)
        W += (tgt.points[c.tgt[k]] - mu_t) * (src.points[c.src[k]] - mu_s).transpose();
    Eigen::JacobiSVD<Mat3> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        R = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return Pose(Rot3(R), mu_t - R * mu_s);
}

std::vector<Vec3> estimate_normals(const SpatialIndex& index, int k) {
    const PointCloud& cloud = index.cloud();
    std::vector<Vec3> normals(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto nn = index.nearest(cloud.points[i], static_cast<std::size_t>(k));
        Vec3 mu = Vec3::Zero();
        for (const auto& q : nn) mu += cloud.points[q.index];
        mu /= static_cast<double>(nn.size());
        Mat3 cov = Mat3::Zero();
        for (const auto& q : nn) {
            const Vec3 d = cloud.points[q.index] - mu;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        normals[i] = es.eigenvectors().col(0);  // smallest eigenvalue direction
    }
    return normals;
}

// one Gauss-Newton step of point-to-plane: solve for a left-applied twist
Pose fit_point_to_plane_step(const PointCloud& src_world, const PointCloud& tgt,
                             const std::vector<Vec3>& normals, const Correspondences& c) {
    Mat6 H = Mat6::Zero();
    Vec6 b = Vec6::Zero();
    for (std::size_t k = 0; k < c.src.size(); ++k) {
        const Vec3& p = src_world.points[c.src[k]];
        const Vec3& q = tgt.points[c.tgt[k]];
        const Vec3& n = normals[c.tgt[k]];
        Vec6 J;
        J.head<3>() = p.cross(n);
        J.tail<3>() = n;
        const double r = n.dot(p - q);
        H += J * J.transpose();
        b -= J * r;
    }
    H.diagonal().array() += 1e-9;
    const Vec6 delta = H.ldlt().solve(b);
    return se3_exp(delta);
}

}  // namespace

RegistrationResult icp_register(const PointCloud& source, const SpatialIndex& target_index,
                                const Pose& guess, const RegistrationConfig& cfg) {
    if (source.empty() || target_index.cloud().empty())
        throw ParamError("icp_register: empty input cloud");
    if (!guess.translation.allFinite()) throw ParamError("icp_register: non-finite guess");

    const PointCloud& target = target_index.cloud();
    std::vector<Vec3> normals;
    if (cfg.backend == RegistrationBackend::PointToPlane)
        normals = estimate_normals(target_index, cfg.normal_neighbors);

    RegistrationResult result;
    Pose T = guess;
    double gate = cfg.max_corr_dist;
    bool small_step = false;

    Correspondences corr;
    PointCloud src_world;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        result.iterations = iter + 1;
        src_world = source.transformed(T);
        corr = match(src_world, target_index, gate);
        if (corr.src.size() < 3) break;

        Pose T_new;
        if (cfg.backend == RegistrationBackend::PointToPoint) {
            T_new = fit_point_to_point(source, target, corr);
        } else {
            T_new = compose_nocov(fit_point_to_plane_step(src_world, target, normals, corr), T);
        }
        const double step = se3_log(relative_nocov(T, T_new)).norm();
        T = T_new;
        if ((iter + 1) % cfg.gate_shrink_period == 0) gate *= cfg.gate_shrink;
        if (step < cfg.tol) {
            small_step = true;
            break;
        }
    }

    // final statistics at the converged transform
    src_world = source.transformed(T);
    corr = match(src_world, target_index, gate);
    result.transform = T;
    result.inlier_fraction =
        static_cast<double>(corr.src.size()) / static_cast<double>(source.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < corr.src.size(); ++k)
        sum += (src_world.points[corr.src[k]] - target.points[corr.tgt[k]]).norm();
    result.mean_residual = corr.src.empty() ? 0.0 : sum / static_cast<double>(corr.src.size());
    result.converged = small_step && result.inlier_fraction >= cfg.min_inliers;
    result.covariance = estimate_covariance(result, cfg);
    return result;
}

RegistrationResult icp_register(const PointCloud& source, const PointCloud& target,
                                const Pose& guess, const RegistrationConfig& cfg) {
    if (target.empty()) throw ParamError("icp_register: empty target cloud");
    SpatialIndex index(target);
    return icp_register(source, index, guess, cfg);
}

Mat6 estimate_covariance(const RegistrationResult& result, const RegistrationConfig& cfg) {
    Mat6 cov = Mat6::Zero();
    if (result.inlier_fraction <= 0.0) {
        // failure covariance: effectively uninformative
        cov.diagonal().setConstant(1e6);
        return cov;
    }
    const double scale = result.mean_residual / result.inlier_fraction;
    const double var_rot =
        std::max(cfg.cov_base_rot * cfg.cov_base_rot * scale,
                 cfg.min_sigma_rot * cfg.min_sigma_rot);
    const double var_trans =
        std::max(cfg.cov_base_trans * cfg.cov_base_trans * scale,
                 cfg.min_sigma_trans * cfg.min_sigma_trans);
    cov.diagonal() << var_rot, var_rot, var_rot, var_trans, var_trans, var_trans;
    return cov;
}

}  // namespace toploc
