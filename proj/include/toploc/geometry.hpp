#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace toploc {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Tangent-space convention used everywhere: rotation first, translation second.
// A twist is (omega[rad], v[m]); 6x6 covariances and Jacobians follow the same
// block ordering.
using Twist = Vec6;

Mat3 skew(const Vec3& v);

// Rotation matrix wrapper. Construction from a raw matrix does not
// re-orthonormalize; callers that accumulate many compositions can call
// normalized().
class Rot3 {
public:
    Rot3() : m_(Mat3::Identity()) {}
    explicit Rot3(const Mat3& m) : m_(m) {}
    explicit Rot3(const Eigen::Quaterniond& q) : m_(q.normalized().toRotationMatrix()) {}

    static Rot3 Identity() { return Rot3(); }

    const Mat3& matrix() const { return m_; }
    Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(m_); }

    Rot3 inverse() const { return Rot3(Mat3(m_.transpose())); }
    Rot3 operator*(const Rot3& o) const { return Rot3(Mat3(m_ * o.m_)); }
    Vec3 operator*(const Vec3& p) const { return m_ * p; }

    // Frobenius distance of R*R^T from identity, used by validity checks.
    double orthonormality_error() const;
    bool is_valid(double tol = 1e-9) const;
    Rot3 normalized() const;

private:
    Mat3 m_;
};

// SO(3) exponential/logarithm with Taylor fallbacks below theta = 1e-8 and a
// dedicated branch near pi.
Rot3 so3_exp(const Vec3& omega);
Vec3 so3_log(const Rot3& R);

// Right/left Jacobians of SO(3) and their inverses.
Mat3 so3_right_jacobian(const Vec3& omega);
Mat3 so3_right_jacobian_inv(const Vec3& omega);
Mat3 so3_left_jacobian(const Vec3& omega);

// SE(3) transform with a tangent-space covariance attached. The covariance is
// interpreted in the right-perturbation sense: T = T_mean * exp(delta) with
// delta ~ N(0, cov).
struct Pose {
    Rot3 rotation;
    Vec3 translation = Vec3::Zero();
    Mat6 covariance = Mat6::Zero();

    Pose() = default;
    Pose(const Rot3& R, const Vec3& t) : rotation(R), translation(t) {}
    Pose(const Rot3& R, const Vec3& t, const Mat6& cov)
        : rotation(R), translation(t), covariance(cov) {}

    static Pose Identity() { return Pose(); }

    Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

    Eigen::Matrix4d matrix() const;
};

// exp/log on SE(3), exact closed form with the V-matrix coupling.
Pose se3_exp(const Twist& xi);
Twist se3_log(const Pose& T);

// Adjoint of SE(3) in (omega, v) ordering: [[R, 0], [skew(t)R, R]].
Mat6 se3_adjoint(const Pose& T);

// Inverse of the SE(3) right Jacobian (rotation-first ordering), used to
// differentiate log-composition residuals.
Mat6 se3_right_jacobian_inv(const Twist& xi);

// Group operations with first-order covariance propagation through the
// adjoint. relative(a, b) = inverse(a) * b.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);
Pose relative(const Pose& a, const Pose& b);

// Same operations ignoring covariance (cheaper, for hot paths).
Pose compose_nocov(const Pose& a, const Pose& b);
Pose inverse_nocov(const Pose& a);
Pose relative_nocov(const Pose& a, const Pose& b);

// Projects a symmetric matrix onto the PSD cone (clips negative eigenvalues)
// and symmetrizes. Used after covariance propagation.
Mat6 symmetrize_psd(const Mat6& m);

}  // namespace toploc
