#include "toploc/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace toploc {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

double Rot3::orthonormality_error() const {
    return (m_ * m_.transpose() - Mat3::Identity()).norm();
}

bool Rot3::is_valid(double tol) const {
    return orthonormality_error() <= tol && std::abs(m_.determinant() - 1.0) <= tol;
}

Rot3 Rot3::normalized() const {
    Eigen::Quaterniond q(m_);
    q.normalize();
    return Rot3(q);
}

Rot3 so3_exp(const Vec3& omega) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(omega);
    if (theta < kSmallAngle) {
        // second-order Taylor of Rodrigues
        return Rot3(Mat3(Mat3::Identity() + W + 0.5 * W * W));
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / theta2;
    return Rot3(Mat3(Mat3::Identity() + a * W + b * W * W));
}

Vec3 so3_log(const Rot3& R) {
    const Mat3& m = R.matrix();
    const double trace = m.trace();
    const double cos_theta = std::clamp(0.5 * (trace - 1.0), -1.0, 1.0);
    const double theta = std::acos(cos_theta);

    if (theta < kSmallAngle) {
        // R ~ I + W: the antisymmetric part is already the tangent.
        return Vec3(0.5 * (m(2, 1) - m(1, 2)),
                    0.5 * (m(0, 2) - m(2, 0)),
                    0.5 * (m(1, 0) - m(0, 1)));
    }
    if (theta > M_PI - 1e-6) {
        // Near pi the antisymmetric part vanishes; recover the axis from the
        // dominant diagonal of (R + I)/2 = axis*axis^T near theta = pi.
        const Mat3 S = 0.5 * (m + Mat3::Identity());
        int k = 0;
        S.diagonal().maxCoeff(&k);
        Vec3 axis;
        axis[k] = std::sqrt(std::max(S(k, k), 0.0));
        for (int i = 0; i < 3; ++i) {
            if (i != k) axis[i] = S(k, i) / axis[k];
        }
        axis.normalize();
        // Fix the sign with the antisymmetric part (may be tiny but its sign
        // is still meaningful away from exactly pi).
        const Vec3 anti(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
        if (anti.dot(axis) < 0.0) axis = -axis;
        return axis * theta;
    }
    const double scale = theta / (2.0 * std::sin(theta));
    return scale * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

Mat3 so3_right_jacobian(const Vec3& omega) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(omega);
    if (theta < kSmallAngle) {
        return Mat3::Identity() - 0.5 * W + (1.0 / 6.0) * W * W;
    }
    const double a = (1.0 - std::cos(theta)) / theta2;
    const double b = (theta - std::sin(theta)) / (theta2 * theta);
    return Mat3::Identity() - a * W + b * W * W;
}

Mat3 so3_right_jacobian_inv(const Vec3& omega) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(omega);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + 0.5 * W + (1.0 / 12.0) * W * W;
    }
    const double half = 0.5 * theta;
    const double cot_term = 1.0 / theta2 - 0.5 * std::cos(half) / (theta * std::sin(half));
    return Mat3::Identity() + 0.5 * W + cot_term * W * W;
}

Mat3 so3_left_jacobian(const Vec3& omega) {
    return so3_right_jacobian(-omega);
}

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
}

namespace {

// V matrix of SE(3) exp: t = V(omega) * rho.
Mat3 se3_V(const Vec3& omega) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(omega);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
    }
    const double a = (1.0 - std::cos(theta)) / theta2;
    const double b = (theta - std::sin(theta)) / (theta2 * theta);
    return Mat3::Identity() + a * W + b * W * W;
}

Mat3 se3_V_inv(const Vec3& omega) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(omega);
    if (theta < kSmallAngle) {
        return Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * W * W;
    }
    const double half = 0.5 * theta;
    const double cot_term = 1.0 / theta2 - 0.5 * std::cos(half) / (theta * std::sin(half));
    return Mat3::Identity() - 0.5 * W + cot_term * W * W;
}

// Q block of the SE(3) left Jacobian (Barfoot 7.86), rotation-first layout.
Mat3 se3_Q(const Vec3& omega, const Vec3& rho) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 W = skew(omega);
    const Mat3 P = skew(rho);
    const Mat3 WP = W * P;
    const Mat3 PW = P * W;
    const Mat3 WPW = WP * W;

    double c1, c2, c3;  // series coefficients
    if (theta < 1e-4) {
        c1 = 1.0 / 6.0 - theta2 / 120.0;
        c2 = 1.0 / 24.0 - theta2 / 720.0;
        c3 = -1.0 / 120.0 + theta2 / 5040.0;
    } else {
        const double st = std::sin(theta);
        const double ct = std::cos(theta);
        const double t3 = theta2 * theta;
        const double t4 = theta2 * theta2;
        const double t5 = t4 * theta;
        c1 = (theta - st) / t3;
        c2 = (1.0 - 0.5 * theta2 - ct) / t4;
        c3 = (theta - st - t3 / 6.0) / t5;
    }
    return 0.5 * P + c1 * (WP + PW + WPW)
        - c2 * (W * WP + PW * W - 3.0 * WPW)
        - 0.5 * (c2 - 3.0 * c3) * (WPW * W + W * WPW);
}

}  // namespace

Pose se3_exp(const Twist& xi) {
    const Vec3 omega = xi.head<3>();
    const Vec3 rho = xi.tail<3>();
    return Pose(so3_exp(omega), se3_V(omega) * rho);
}

Twist se3_log(const Pose& T) {
    const Vec3 omega = so3_log(T.rotation);
    Twist xi;
    xi.head<3>() = omega;
    xi.tail<3>() = se3_V_inv(omega) * T.translation;
    return xi;
}

Mat6 se3_adjoint(const Pose& T) {
    Mat6 adj = Mat6::Zero();
    const Mat3& R = T.rotation.matrix();
    adj.topLeftCorner<3, 3>() = R;
    adj.bottomRightCorner<3, 3>() = R;
    adj.bottomLeftCorner<3, 3>() = skew(T.translation) * R;
    return adj;
}

Mat6 se3_right_jacobian_inv(const Twist& xi) {
    // Jr(xi) = Jl(-xi); invert the left Jacobian at -xi.
    const Vec3 omega = -xi.head<3>();
    const Vec3 rho = -xi.tail<3>();
    const Mat3 Jinv = so3_right_jacobian_inv(-omega);  // = Jl(omega)^-1
    const Mat3 Q = se3_Q(omega, rho);
    Mat6 out = Mat6::Zero();
    out.topLeftCorner<3, 3>() = Jinv;
    out.bottomRightCorner<3, 3>() = Jinv;
    out.bottomLeftCorner<3, 3>() = -Jinv * Q * Jinv;
    return out;
}

Pose compose_nocov(const Pose& a, const Pose& b) {
    return Pose(a.rotation * b.rotation, a.rotation * b.translation + a.translation);
}

Pose inverse_nocov(const Pose& a) {
    const Rot3 Rinv = a.rotation.inverse();
    return Pose(Rinv, -(Rinv * a.translation));
}

Pose relative_nocov(const Pose& a, const Pose& b) {
    return compose_nocov(inverse_nocov(a), b);
}

Pose compose(const Pose& a, const Pose& b) {
    Pose c = compose_nocov(a, b);
    const Mat6 adj = se3_adjoint(inverse_nocov(b));
    c.covariance = symmetrize_psd(adj * a.covariance * adj.transpose() + b.covariance);
    return c;
}

Pose inverse(const Pose& a) {
    Pose inv = inverse_nocov(a);
    const Mat6 adj = se3_adjoint(a);
    inv.covariance = symmetrize_psd(adj * a.covariance * adj.transpose());
    return inv;
}

Pose relative(const Pose& a, const Pose& b) {
    return compose(inverse(a), b);
}

Mat6 symmetrize_psd(const Mat6& m) {
    Mat6 sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> es(sym);
    if (es.eigenvalues().minCoeff() >= 0.0) return sym;
    Vec6 clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace toploc
