#pragma once

#include <span>
#include <vector>

#include "toploc/geometry.hpp"

namespace toploc {

struct ImuSample {
    double t = 0.0;                      // s
    Vec3 angular_velocity = Vec3::Zero();   // rad/s, body frame
    Vec3 linear_acceleration = Vec3::Zero();  // m/s^2, specific force, body frame
};

struct ImuBias {
    Vec3 gyro = Vec3::Zero();   // rad/s
    Vec3 accel = Vec3::Zero();  // m/s^2

    Vec6 vector() const {
        Vec6 v;
        v << gyro, accel;
        return v;
    }
    static ImuBias from_vector(const Vec6& v) { return ImuBias{v.head<3>(), v.tail<3>()}; }
};

struct ImuNoiseConfig {
    double gyro_noise = 1e-3;    // rad/s/sqrt(Hz)
    double accel_noise = 1e-2;   // m/s^2/sqrt(Hz)
    double gyro_walk = 1e-5;     // rad/s^2/sqrt(Hz)
    double accel_walk = 1e-4;    // m/s^3/sqrt(Hz)
    double gravity_magnitude = 9.81;
    double max_sample_gap = 0.1;  // s; larger gaps abort preintegration

    Vec3 gravity() const { return Vec3(0.0, 0.0, -gravity_magnitude); }
};

// Full robot state carried by the LIO window.
struct InertialState {
    Pose pose;
    Vec3 velocity = Vec3::Zero();
    ImuBias bias;
    double stamp = 0.0;
};

// Relative increments between two frames, independent of the global state and
// re-linearizable in the bias to first order. Covariance ordering:
// (dR, dv, dp, dbg, dba), 15x15.
struct PreintegratedImu {
    Rot3 delta_R;
    Vec3 delta_v = Vec3::Zero();
    Vec3 delta_p = Vec3::Zero();
    double dt_total = 0.0;

    Eigen::Matrix<double, 15, 15> noise_covariance = Eigen::Matrix<double, 15, 15>::Zero();

    // First-order bias Jacobians of the deltas.
    Mat3 dR_dbg = Mat3::Zero();
    Mat3 dv_dbg = Mat3::Zero();
    Mat3 dv_dba = Mat3::Zero();
    Mat3 dp_dbg = Mat3::Zero();
    Mat3 dp_dba = Mat3::Zero();

    ImuBias linearization_bias;

    // Deltas corrected to first order for a bias estimate b != linearization
    // point.
    Rot3 corrected_delta_R(const ImuBias& b) const;
    Vec3 corrected_delta_v(const ImuBias& b) const;
    Vec3 corrected_delta_p(const ImuBias& b) const;
};

// Midpoint-rule preintegration over the sample sequence; intervals are the
// gaps between consecutive sample timestamps. Throws ParamError on an empty
// buffer and DataError when a gap exceeds noise.max_sample_gap.
PreintegratedImu preintegrate(std::span<const ImuSample> samples, const ImuBias& bias,
                              const ImuNoiseConfig& noise);

// 15-dim residual (eR, ev, ep, eb) of a preintegrated measurement between two
// states, with analytic Jacobians w.r.t. each state's (pose, velocity, bias)
// tangent blocks. Jacobian column layout per state: [pose(6) | vel(3) | bias(6)].
struct ImuResidual {
    Eigen::Matrix<double, 15, 1> value;
    Eigen::Matrix<double, 15, 15> J_i;  // w.r.t. state i
    Eigen::Matrix<double, 15, 15> J_j;  // w.r.t. state j
};

ImuResidual imu_residual(const PreintegratedImu& pre, const InertialState& state_i,
                         const InertialState& state_j, const Vec3& gravity,
                         bool with_jacobians = true);

// Information matrix of the bias Brownian-motion constraint over dt:
// (sigma^2 * dt)^-1 per axis.
Mat6 bias_random_walk_information(double dt, const ImuNoiseConfig& noise);

// Orientation at t_query relative to the orientation at the first sample,
// from piecewise gyro integration with spherical interpolation inside each
// interval. Queries may extrapolate by up to one median sample period.
Rot3 rotation_at(std::span<const ImuSample> samples, double t_query,
                 const Vec3& gyro_bias = Vec3::Zero());

// Predicted state at the end of the preintegration span.
InertialState predict(const InertialState& state_i, const PreintegratedImu& pre,
                      const Vec3& gravity);

}  // namespace toploc
