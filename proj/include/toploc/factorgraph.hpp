#pragma once

#include <deque>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "toploc/geometry.hpp"
#include "toploc/imu.hpp"

namespace toploc {

enum class VarKind { Pose, Velocity, Bias };

struct Variable {
    int id = -1;
    VarKind kind = VarKind::Pose;
    bool fixed = false;
    Pose pose;
    Vec3 vec3 = Vec3::Zero();
    Vec6 vec6 = Vec6::Zero();

    int dim() const { return kind == VarKind::Pose ? 6 : (kind == VarKind::Velocity ? 3 : 6); }
};

class FactorGraph;

// Measurement edge. Residual dimension is fixed per type; `information` is the
// inverse measurement covariance. A positive huber_delta enables a Huber
// kernel on the whitened norm.
class Edge {
public:
    virtual ~Edge() = default;

    int id = -1;
    std::vector<int> variables;
    Eigen::MatrixXd information;
    double huber_delta = 0.0;
    std::string tag;

    virtual int dim() const = 0;
    virtual Eigen::VectorXd residual(const FactorGraph& g) const = 0;
    virtual void jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const = 0;
};

// Unary prior on a pose. Stores the measurement as the *inverse* world pose
// (an LO measurement composed per frame), residual log(T * meas)^vee. Zero
// residual at T = meas^-1.
class PosePriorEdge : public Edge {
public:
    PosePriorEdge(int pose_id, const Pose& inverse_pose_measurement, const Mat6& info);
    static std::unique_ptr<PosePriorEdge> from_prior_mean(int pose_id, const Pose& mean,
                                                          const Mat6& info);

    int dim() const override { return 6; }
    Eigen::VectorXd residual(const FactorGraph& g) const override;
    void jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const override;

    Pose measurement;  // the inverse pose
};

// Binary relative-pose constraint, residual log(T_i * meas * T_j^-1)^vee.
// Covers both odometry edges between sliding poses and map-matching edges to
// a reference vertex (distinguished by tag).
class RelativePoseEdge : public Edge {
public:
    RelativePoseEdge(int pose_i, int pose_j, const Pose& measurement, const Mat6& info);

    int dim() const override { return 6; }
    Eigen::VectorXd residual(const FactorGraph& g) const override;
    void jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const override;

    Pose measurement;  // iT~j
};

// 3-dim translation-only prior from a relativized GNSS fix: p_i - p_tilde.
class GnssUnaryEdge : public Edge {
public:
    GnssUnaryEdge(int pose_id, const Vec3& position, const Mat3& info);

    int dim() const override { return 3; }
    Eigen::VectorXd residual(const FactorGraph& g) const override;
    void jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const override;

    Vec3 position;
};

// Preintegrated inertial constraint between two full states
// (pose_i, vel_i, bias_i) -> (pose_j, vel_j, bias_j), 15-dim residual
// including the bias random-walk block.
class ImuEdge : public Edge {
public:
    ImuEdge(int pose_i, int vel_i, int bias_i, int pose_j, int vel_j, int bias_j,
            const PreintegratedImu& pre, const ImuNoiseConfig& noise);

    int dim() const override { return 15; }
    Eigen::VectorXd residual(const FactorGraph& g) const override;
    void jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const override;

    PreintegratedImu pre;
    Vec3 gravity;
};

// Dense prior left behind by marginalization: residual L * (x [-] x_lin) + s
// over the Markov blanket of the removed variables.
class MarginalPriorEdge : public Edge {
public:
    int dim() const override { return static_cast<int>(L.rows()); }
    Eigen::VectorXd residual(const FactorGraph& g) const override;
    void jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const override;

    std::vector<Variable> linearization;  // one per connected variable, same order
    Eigen::MatrixXd L;
    Eigen::VectorXd s;
};

struct SolverConfig {
    int max_iter = 20;
    double rel_tol = 1e-10;     // chi2 relative decrease
    double abs_tol = 1e-10;     // tangent update norm
    double lambda_init = 1e-4;
    double lambda_factor = 10.0;
    double lambda_max = 1e10;
    int dense_threshold = 50;   // variable count at or below which the dense path runs
};

struct OptimizeReport {
    int iterations = 0;
    double initial_chi2 = 0.0;
    double final_chi2 = 0.0;
    bool converged = false;
};

class FactorGraph {
public:
    int add_pose(const Pose& value, bool fixed = false);
    int add_velocity(const Vec3& value, bool fixed = false);
    int add_bias(const Vec6& value, bool fixed = false);

    int add_edge(std::unique_ptr<Edge> edge);
    void remove_edge(int edge_id);

    const Variable& variable(int id) const;
    Variable& variable_mut(int id);
    bool has_variable(int id) const { return variables_.count(id) > 0; }
    const Pose& pose(int id) const;
    const Vec3& vec3(int id) const;
    const Vec6& vec6(int id) const;
    void set_pose(int id, const Pose& p);
    void set_fixed(int id, bool fixed);

    std::size_t num_variables() const { return variables_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    const std::map<int, std::unique_ptr<Edge>>& edges() const { return edges_; }
    std::vector<int> edges_of(int variable_id) const;

    double chi2() const;
    double edge_chi2(const Edge& e) const;
    // Sum of chi2 over edges whose tag matches (cost decomposition checks).
    double chi2_of_tag(const std::string& tag) const;

    OptimizeReport optimize(const SolverConfig& cfg = {});

    // Schur-complement elimination of a set of variables; edges touching them
    // are replaced by one dense prior on their (non-fixed) Markov blanket.
    void marginalize_variables(const std::vector<int>& ids);

    // Window bookkeeping: ordered pose ids of the sliding window.
    void push_window_pose(int pose_id);
    const std::deque<int>& window() const { return window_; }
    // Marginalizes the oldest window pose; throws ParamError if pose_id is not
    // that pose. extra_ids lets a caller remove companion variables (velocity,
    // bias) of the same state in one pass.
    void marginalize_out(int pose_id, const std::vector<int>& extra_ids = {});

    // Marginal covariance block of one variable from the full dense system.
    Eigen::MatrixXd marginal_covariance(int variable_id) const;

    // g2o-style text dump (VERTEX_SE3:QUAT / EDGE_SE3:QUAT records).
    void dump(std::ostream& os) const;

    // Applies a tangent step to a single variable (used by the solver and by
    // finite-difference checks in tests).
    void retract(int id, const Eigen::VectorXd& delta);

private:
    friend class Edge;

    void check_gauge() const;

    std::map<int, Variable> variables_;
    std::map<int, std::unique_ptr<Edge>> edges_;
    std::deque<int> window_;
    int next_variable_id_ = 0;
    int next_edge_id_ = 0;
};

}  // namespace toploc
