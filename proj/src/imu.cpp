#include "toploc/imu.hpp"

#include <algorithm>
#include <cmath>

#include "toploc/error.hpp"

namespace toploc {

Rot3 PreintegratedImu::corrected_delta_R(const ImuBias& b) const {
    const Vec3 dbg = b.gyro - linearization_bias.gyro;
    return delta_R * so3_exp(dR_dbg * dbg);
}

Vec3 PreintegratedImu::corrected_delta_v(const ImuBias& b) const {
    const Vec3 dbg = b.gyro - linearization_bias.gyro;
    const Vec3 dba = b.accel - linearization_bias.accel;
    return delta_v + dv_dbg * dbg + dv_dba * dba;
}

Vec3 PreintegratedImu::corrected_delta_p(const ImuBias& b) const {
    const Vec3 dbg = b.gyro - linearization_bias.gyro;
    const Vec3 dba = b.accel - linearization_bias.accel;
    return delta_p + dp_dbg * dbg + dp_dba * dba;
}

PreintegratedImu preintegrate(std::span<const ImuSample> samples, const ImuBias& bias,
                              const ImuNoiseConfig& noise) {
    if (samples.empty()) throw ParamError("preintegrate: empty sample buffer");

    PreintegratedImu pre;
    pre.linearization_bias = bias;

    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
        const double dt = samples[k + 1].t - samples[k].t;
        if (!(dt > 0.0)) throw DataError("preintegrate: non-increasing timestamps");
        if (dt > noise.max_sample_gap) throw DataError("preintegrate: sample gap too large");
        const double dt2 = dt * dt;

        // midpoint rule per interval
        const Vec3 w = 0.5 * (samples[k].angular_velocity + samples[k + 1].angular_velocity)
            - bias.gyro;
        const Vec3 a = 0.5 * (samples[k].linear_acceleration + samples[k + 1].linear_acceleration)
            - bias.accel;

        const Rot3 dR = so3_exp(w * dt);
        const Mat3 Jr = so3_right_jacobian(w * dt);
        const Mat3 R_k = pre.delta_R.matrix();
        const Mat3 Ra_hat = R_k * skew(a);

        // covariance propagation, state order (dR, dv, dp, dbg, dba)
        Eigen::Matrix<double, 15, 15> A = Eigen::Matrix<double, 15, 15>::Identity();
        A.block<3, 3>(0, 0) = dR.matrix().transpose();
        A.block<3, 3>(0, 9) = -Jr * dt;
        A.block<3, 3>(3, 0) = -Ra_hat * dt;
        A.block<3, 3>(3, 12) = -R_k * dt;
        A.block<3, 3>(6, 0) = -0.5 * Ra_hat * dt2;
        A.block<3, 3>(6, 3) = Mat3::Identity() * dt;
        A.block<3, 3>(6, 12) = -0.5 * R_k * dt2;

        Eigen::Matrix<double, 15, 12> B = Eigen::Matrix<double, 15, 12>::Zero();
        B.block<3, 3>(0, 0) = Jr * dt;
        B.block<3, 3>(3, 3) = R_k * dt;
        B.block<3, 3>(6, 3) = 0.5 * R_k * dt2;
        B.block<3, 3>(9, 6) = Mat3::Identity();
        B.block<3, 3>(12, 9) = Mat3::Identity();

        Eigen::Matrix<double, 12, 12> Qd = Eigen::Matrix<double, 12, 12>::Zero();
        const double g2 = noise.gyro_noise * noise.gyro_noise / dt;
        const double a2 = noise.accel_noise * noise.accel_noise / dt;
        const double wg2 = noise.gyro_walk * noise.gyro_walk * dt;
        const double wa2 = noise.accel_walk * noise.accel_walk * dt;
        Qd.diagonal() << g2, g2, g2, a2, a2, a2, wg2, wg2, wg2, wa2, wa2, wa2;

        pre.noise_covariance = A * pre.noise_covariance * A.transpose() + B * Qd * B.transpose();

        // bias Jacobians (position first: it uses the previous v/R Jacobians)
        pre.dp_dbg += pre.dv_dbg * dt - 0.5 * Ra_hat * pre.dR_dbg * dt2;
        pre.dp_dba += pre.dv_dba * dt - 0.5 * R_k * dt2;
        pre.dv_dbg += -Ra_hat * pre.dR_dbg * dt;
        pre.dv_dba += -R_k * dt;
        pre.dR_dbg = dR.matrix().transpose() * pre.dR_dbg - Jr * dt;

        // deltas (position first for the same reason)
        pre.delta_p += pre.delta_v * dt + 0.5 * R_k * a * dt2;
        pre.delta_v += R_k * a * dt;
        pre.delta_R = pre.delta_R * dR;

        pre.dt_total += dt;
    }
    return pre;
}

ImuResidual imu_residual(const PreintegratedImu& pre, const InertialState& state_i,
                         const InertialState& state_j, const Vec3& gravity,
                         bool with_jacobians) {
    const double dt = pre.dt_total;
    const Mat3 Ri = state_i.pose.rotation.matrix();
    const Mat3 Rj = state_j.pose.rotation.matrix();
    const Vec3& pi = state_i.pose.translation;
    const Vec3& pj = state_j.pose.translation;
    const Vec3& vi = state_i.velocity;
    const Vec3& vj = state_j.velocity;

    const Vec3 dbg = state_i.bias.gyro - pre.linearization_bias.gyro;

    const Rot3 dR_corr = pre.corrected_delta_R(state_i.bias);
    const Vec3 dv_corr = pre.corrected_delta_v(state_i.bias);
    const Vec3 dp_corr = pre.corrected_delta_p(state_i.bias);

    ImuResidual res;
    const Rot3 Rerr(Mat3(dR_corr.matrix().transpose() * Ri.transpose() * Rj));
    const Vec3 eR = so3_log(Rerr);
    const Vec3 dv_world = vj - vi - gravity * dt;
    const Vec3 dp_world = pj - pi - vi * dt - 0.5 * gravity * dt * dt;
    const Vec3 ev = Ri.transpose() * dv_world - dv_corr;
    const Vec3 ep = Ri.transpose() * dp_world - dp_corr;
    const Vec6 eb = state_j.bias.vector() - state_i.bias.vector();

    res.value << eR, ev, ep, eb;

    if (with_jacobians) {
        res.J_i.setZero();
        res.J_j.setZero();
        const Mat3 JrInv = so3_right_jacobian_inv(eR);
        const Mat3 RjtRi = Rj.transpose() * Ri;

        // rotation block
        res.J_i.block<3, 3>(0, 0) = -JrInv * RjtRi;
        res.J_j.block<3, 3>(0, 0) = JrInv;
        // d eR / d bg_i through the first-order correction term
        const Mat3 Jr_b = so3_right_jacobian(pre.dR_dbg * dbg);
        res.J_i.block<3, 3>(0, 9) =
            -JrInv * Rerr.matrix().transpose() * Jr_b * pre.dR_dbg;

        // velocity block
        res.J_i.block<3, 3>(3, 0) = skew(Ri.transpose() * dv_world);
        res.J_i.block<3, 3>(3, 6) = -Ri.transpose();
        res.J_i.block<3, 3>(3, 9) = -pre.dv_dbg;
        res.J_i.block<3, 3>(3, 12) = -pre.dv_dba;
        res.J_j.block<3, 3>(3, 6) = Ri.transpose();

        // position block
        res.J_i.block<3, 3>(6, 0) = skew(Ri.transpose() * dp_world);
        res.J_i.block<3, 3>(6, 3) = -Mat3::Identity();
        res.J_i.block<3, 3>(6, 6) = -Ri.transpose() * dt;
        res.J_i.block<3, 3>(6, 9) = -pre.dp_dbg;
        res.J_i.block<3, 3>(6, 12) = -pre.dp_dba;
        res.J_j.block<3, 3>(6, 3) = RjtRi;

        // bias block
        res.J_i.block<6, 6>(9, 9) = -Mat6::Identity();
        res.J_j.block<6, 6>(9, 9) = Mat6::Identity();
    }
    return res;
}

Mat6 bias_random_walk_information(double dt, const ImuNoiseConfig& noise) {
    if (!(dt > 0.0)) throw ParamError("bias_random_walk_information: dt must be positive");
    Mat6 info = Mat6::Zero();
    const double ig = 1.0 / (noise.gyro_walk * noise.gyro_walk * dt);
    const double ia = 1.0 / (noise.accel_walk * noise.accel_walk * dt);
    info.diagonal() << ig, ig, ig, ia, ia, ia;
    return info;
}

Rot3 rotation_at(std::span<const ImuSample> samples, double t_query, const Vec3& gyro_bias) {
    if (samples.empty()) throw ParamError("rotation_at: empty sample buffer");
    const double t0 = samples.front().t;
    const double t1 = samples.back().t;
    double period = 0.01;
    if (samples.size() >= 2) period = (t1 - t0) / static_cast<double>(samples.size() - 1);
    if (t_query < t0 - period || t_query > t1 + period)
        throw ParamError("rotation_at: query outside IMU span");

    Rot3 R;  // orientation relative to samples.front()
    double t_prev = t0;
    Vec3 w_prev = samples.front().angular_velocity - gyro_bias;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        const double t_next = samples[k].t;
        const Vec3 w_next = samples[k].angular_velocity - gyro_bias;
        if (t_query <= t_next) {
            // partial interval with the midpoint rate; this equals slerp
            // between the two endpoint orientations
            const Vec3 w_mid = 0.5 * (w_prev + w_next);
            return R * so3_exp(w_mid * (t_query - t_prev));
        }
        R = R * so3_exp(0.5 * (w_prev + w_next) * (t_next - t_prev));
        t_prev = t_next;
        w_prev = w_next;
    }
    // extrapolation past the last sample (bounded by one period, checked above)
    return R * so3_exp(w_prev * (t_query - t_prev));
}

InertialState predict(const InertialState& state_i, const PreintegratedImu& pre,
                      const Vec3& gravity) {
    const double dt = pre.dt_total;
    const Mat3 Ri = state_i.pose.rotation.matrix();

    const Rot3 dR = pre.corrected_delta_R(state_i.bias);
    const Vec3 dv = pre.corrected_delta_v(state_i.bias);
    const Vec3 dp = pre.corrected_delta_p(state_i.bias);

    InertialState out;
    out.pose.rotation = state_i.pose.rotation * dR;
    out.pose.translation =
        state_i.pose.translation + state_i.velocity * dt + 0.5 * gravity * dt * dt + Ri * dp;
    out.velocity = state_i.velocity + gravity * dt + Ri * dv;
    out.bias = state_i.bias;
    out.stamp = state_i.stamp + dt;
    return out;
}

}  // namespace toploc
