#include "toploc/factorgraph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>

#include "toploc/error.hpp"

namespace toploc {

// --- edges ------------------------------------------------------------------

namespace {

void check_information(const Eigen::MatrixXd& info, int dim) {
    if (info.rows() != dim || info.cols() != dim)
        throw ParamError("edge information has wrong dimension");
    if ((info - info.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + info.cwiseAbs().maxCoeff()))
        throw ParamError("edge information not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    if (es.eigenvalues().minCoeff() < -1e-9 * (1.0 + info.cwiseAbs().maxCoeff()))
        throw ParamError("edge information not PSD");
}

}  // namespace

PosePriorEdge::PosePriorEdge(int pose_id, const Pose& inverse_pose_measurement, const Mat6& info)
    : measurement(inverse_pose_measurement) {
    variables = {pose_id};
    information = info;
    tag = "lo_prior";
    check_information(information, 6);
}

std::unique_ptr<PosePriorEdge> PosePriorEdge::from_prior_mean(int pose_id, const Pose& mean,
                                                              const Mat6& info) {
    return std::make_unique<PosePriorEdge>(pose_id, inverse_nocov(mean), info);
}

Eigen::VectorXd PosePriorEdge::residual(const FactorGraph& g) const {
    return se3_log(compose_nocov(g.pose(variables[0]), measurement));
}

void PosePriorEdge::jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const {
    const Twist e = se3_log(compose_nocov(g.pose(variables[0]), measurement));
    J.resize(1);
    J[0] = se3_right_jacobian_inv(e) * se3_adjoint(inverse_nocov(measurement));
}

RelativePoseEdge::RelativePoseEdge(int pose_i, int pose_j, const Pose& meas, const Mat6& info)
    : measurement(meas) {
    variables = {pose_i, pose_j};
    information = info;
    tag = "lio";
    check_information(information, 6);
}

Eigen::VectorXd RelativePoseEdge::residual(const FactorGraph& g) const {
    const Pose& Ti = g.pose(variables[0]);
    const Pose& Tj = g.pose(variables[1]);
    return se3_log(compose_nocov(compose_nocov(Ti, measurement), inverse_nocov(Tj)));
}

void RelativePoseEdge::jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const {
    const Pose& Ti = g.pose(variables[0]);
    const Pose& Tj = g.pose(variables[1]);
    const Twist e = se3_log(compose_nocov(compose_nocov(Ti, measurement), inverse_nocov(Tj)));
    const Mat6 jr_inv = se3_right_jacobian_inv(e);
    J.resize(2);
    J[0] = jr_inv * se3_adjoint(compose_nocov(Tj, inverse_nocov(measurement)));
    J[1] = -jr_inv * se3_adjoint(Tj);
}

GnssUnaryEdge::GnssUnaryEdge(int pose_id, const Vec3& pos, const Mat3& info) : position(pos) {
    variables = {pose_id};
    information = info;
    tag = "gnss";
    check_information(information, 3);
}

Eigen::VectorXd GnssUnaryEdge::residual(const FactorGraph& g) const {
    return g.pose(variables[0]).translation - position;
}

void GnssUnaryEdge::jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const {
    J.resize(1);
    J[0] = Eigen::MatrixXd::Zero(3, 6);
    J[0].rightCols<3>() = g.pose(variables[0]).rotation.matrix();
}

ImuEdge::ImuEdge(int pose_i, int vel_i, int bias_i, int pose_j, int vel_j, int bias_j,
                 const PreintegratedImu& preint, const ImuNoiseConfig& noise)
    : pre(preint), gravity(noise.gravity()) {
    variables = {pose_i, vel_i, bias_i, pose_j, vel_j, bias_j};
    information = Eigen::MatrixXd::Zero(15, 15);
    // deltas from the propagated preintegration covariance, bias difference
    // from the Brownian-motion model
    Eigen::Matrix<double, 9, 9> cov9 = pre.noise_covariance.topLeftCorner<9, 9>();
    cov9 = 0.5 * (cov9 + cov9.transpose());
    cov9.diagonal().array() += 1e-14;  // guards the noiseless case
    information.topLeftCorner<9, 9>() = cov9.ldlt().solve(Eigen::Matrix<double, 9, 9>::Identity());
    information.bottomRightCorner<6, 6>() =
        bias_random_walk_information(std::max(pre.dt_total, 1e-6), noise);
    tag = "imu";
    check_information(information, 15);
}

namespace {

InertialState state_of(const FactorGraph& g, int pose_id, int vel_id, int bias_id) {
    InertialState s;
    s.pose = g.pose(pose_id);
    s.velocity = g.vec3(vel_id);
    s.bias = ImuBias::from_vector(g.vec6(bias_id));
    return s;
}

}  // namespace

Eigen::VectorXd ImuEdge::residual(const FactorGraph& g) const {
    const InertialState si = state_of(g, variables[0], variables[1], variables[2]);
    const InertialState sj = state_of(g, variables[3], variables[4], variables[5]);
    return imu_residual(pre, si, sj, gravity, false).value;
}

void ImuEdge::jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const {
    const InertialState si = state_of(g, variables[0], variables[1], variables[2]);
    const InertialState sj = state_of(g, variables[3], variables[4], variables[5]);
    const ImuResidual r = imu_residual(pre, si, sj, gravity, true);
    J.resize(6);
    J[0] = r.J_i.leftCols<6>();
    J[1] = r.J_i.middleCols<3>(6);
    J[2] = r.J_i.rightCols<6>();
    J[3] = r.J_j.leftCols<6>();
    J[4] = r.J_j.middleCols<3>(6);
    J[5] = r.J_j.rightCols<6>();
}

namespace {

Eigen::VectorXd local_delta(const Variable& lin, const Variable& cur) {
    switch (lin.kind) {
        case VarKind::Pose:
            return se3_log(compose_nocov(inverse_nocov(lin.pose), cur.pose));
        case VarKind::Velocity:
            return cur.vec3 - lin.vec3;
        case VarKind::Bias:
            return cur.vec6 - lin.vec6;
    }
    return {};
}

}  // namespace

Eigen::VectorXd MarginalPriorEdge::residual(const FactorGraph& g) const {
    Eigen::VectorXd delta(L.cols());
    int off = 0;
    for (std::size_t k = 0; k < variables.size(); ++k) {
        const Variable& lin = linearization[k];
        delta.segment(off, lin.dim()) = local_delta(lin, g.variable(variables[k]));
        off += lin.dim();
    }
    return L * delta + s;
}

void MarginalPriorEdge::jacobians(const FactorGraph& g, std::vector<Eigen::MatrixXd>& J) const {
    J.resize(variables.size());
    int off = 0;
    for (std::size_t k = 0; k < variables.size(); ++k) {
        const Variable& lin = linearization[k];
        const int d = lin.dim();
        Eigen::MatrixXd chart = Eigen::MatrixXd::Identity(d, d);
        if (lin.kind == VarKind::Pose) {
            const Twist delta = se3_log(
                compose_nocov(inverse_nocov(lin.pose), g.pose(variables[k])));
            chart = se3_right_jacobian_inv(delta);
        }
        J[k] = L.middleCols(off, d) * chart;
        off += d;
    }
}

// --- graph -------------------------------------------------------------------

int FactorGraph::add_pose(const Pose& value, bool fixed) {
    Variable v;
    v.id = next_variable_id_++;
    v.kind = VarKind::Pose;
    v.pose = value;
    v.fixed = fixed;
    variables_.emplace(v.id, v);
    return v.id;
}

int FactorGraph::add_velocity(const Vec3& value, bool fixed) {
    Variable v;
    v.id = next_variable_id_++;
    v.kind = VarKind::Velocity;
    v.vec3 = value;
    v.fixed = fixed;
    variables_.emplace(v.id, v);
    return v.id;
}

int FactorGraph::add_bias(const Vec6& value, bool fixed) {
    Variable v;
    v.id = next_variable_id_++;
    v.kind = VarKind::Bias;
    v.vec6 = value;
    v.fixed = fixed;
    variables_.emplace(v.id, v);
    return v.id;
}

int FactorGraph::add_edge(std::unique_ptr<Edge> edge) {
    for (int vid : edge->variables) {
        if (!has_variable(vid)) throw ParamError("add_edge: unknown variable id");
    }
    edge->id = next_edge_id_++;
    const int id = edge->id;
    edges_.emplace(id, std::move(edge));
    return id;
}

void FactorGraph::remove_edge(int edge_id) {
    if (edges_.erase(edge_id) == 0) throw ParamError("remove_edge: unknown edge id");
}

const Variable& FactorGraph::variable(int id) const {
    auto it = variables_.find(id);
    if (it == variables_.end()) throw ParamError("unknown variable id");
    return it->second;
}

Variable& FactorGraph::variable_mut(int id) {
    auto it = variables_.find(id);
    if (it == variables_.end()) throw ParamError("unknown variable id");
    return it->second;
}

const Pose& FactorGraph::pose(int id) const {
    const Variable& v = variable(id);
    if (v.kind != VarKind::Pose) throw ParamError("variable is not a pose");
    return v.pose;
}

const Vec3& FactorGraph::vec3(int id) const {
    const Variable& v = variable(id);
    if (v.kind != VarKind::Velocity) throw ParamError("variable is not a velocity");
    return v.vec3;
}

const Vec6& FactorGraph::vec6(int id) const {
    const Variable& v = variable(id);
    if (v.kind != VarKind::Bias) throw ParamError("variable is not a bias");
    return v.vec6;
}

void FactorGraph::set_pose(int id, const Pose& p) {
    Variable& v = variable_mut(id);
    if (v.kind != VarKind::Pose) throw ParamError("variable is not a pose");
    v.pose = p;
}

void FactorGraph::set_fixed(int id, bool fixed) { variable_mut(id).fixed = fixed; }

std::vector<int> FactorGraph::edges_of(int variable_id) const {
    std::vector<int> out;
    for (const auto& [eid, e] : edges_) {
        if (std::find(e->variables.begin(), e->variables.end(), variable_id) !=
            e->variables.end())
            out.push_back(eid);
    }
    return out;
}

double FactorGraph::edge_chi2(const Edge& e) const {
    const Eigen::VectorXd r = e.residual(*this);
    const double s2 = r.dot(e.information * r);
    if (e.huber_delta > 0.0) {
        const double d2 = e.huber_delta * e.huber_delta;
        if (s2 > d2) return 2.0 * e.huber_delta * std::sqrt(s2) - d2;
    }
    return s2;
}

double FactorGraph::chi2() const {
    double sum = 0.0;
    for (const auto& [id, e] : edges_) sum += edge_chi2(*e);
    return sum;
}

double FactorGraph::chi2_of_tag(const std::string& tag) const {
    double sum = 0.0;
    for (const auto& [id, e] : edges_) {
        if (e->tag == tag) sum += edge_chi2(*e);
    }
    return sum;
}

void FactorGraph::retract(int id, const Eigen::VectorXd& delta) {
    Variable& v = variable_mut(id);
    switch (v.kind) {
        case VarKind::Pose: {
            Pose updated = compose_nocov(v.pose, se3_exp(delta));
            updated.covariance = v.pose.covariance;
            v.pose = updated;
            break;
        }
        case VarKind::Velocity:
            v.vec3 += delta;
            break;
        case VarKind::Bias:
            v.vec6 += delta;
            break;
    }
}

void FactorGraph::check_gauge() const {
    for (const auto& [id, v] : variables_) {
        if (v.fixed) return;
    }
    for (const auto& [id, e] : edges_) {
        if (e->variables.size() == 1) return;
    }
    throw GaugeError("optimize: no fixed variable and no unary edge anchors the gauge");
}

namespace {

struct ActiveIndex {
    std::vector<int> ids;          // active (non-fixed) variable ids, ascending
    std::map<int, int> offset;     // id -> column offset
    int total_dim = 0;
};

ActiveIndex build_index(const std::map<int, Variable>& vars) {
    ActiveIndex idx;
    for (const auto& [id, v] : vars) {
        if (v.fixed) continue;
        idx.offset[id] = idx.total_dim;
        idx.ids.push_back(id);
        idx.total_dim += v.dim();
    }
    return idx;
}

double robust_weight(const Edge& e, double s2) {
    if (e.huber_delta <= 0.0) return 1.0;
    const double d2 = e.huber_delta * e.huber_delta;
    if (s2 <= d2) return 1.0;
    return e.huber_delta / std::sqrt(s2);
}

}  // namespace

OptimizeReport FactorGraph::optimize(const SolverConfig& cfg) {
    check_gauge();
    const ActiveIndex idx = build_index(variables_);
    if (idx.total_dim == 0) throw ParamError("optimize: no free variables");

    OptimizeReport report;
    report.initial_chi2 = chi2();
    double current_chi2 = report.initial_chi2;
    double lambda = cfg.lambda_init;

    std::vector<Eigen::MatrixXd> J;
    const bool dense = static_cast<int>(idx.ids.size()) <= cfg.dense_threshold;

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        // linearize all edges at the current estimate
        Eigen::MatrixXd Hd;
        std::vector<Eigen::Triplet<double>> trips;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(idx.total_dim);
        if (dense) Hd = Eigen::MatrixXd::Zero(idx.total_dim, idx.total_dim);

        for (const auto& [eid, e] : edges_) {
            const Eigen::VectorXd r = e->residual(*this);
            e->jacobians(*this, J);
            const double w = robust_weight(*e, r.dot(e->information * r));
            const Eigen::MatrixXd info = w * e->information;
            for (std::size_t a = 0; a < e->variables.size(); ++a) {
                const Variable& va = variable(e->variables[a]);
                if (va.fixed) continue;
                const int oa = idx.offset.at(va.id);
                b.segment(oa, va.dim()) -= J[a].transpose() * info * r;
                for (std::size_t c = 0; c < e->variables.size(); ++c) {
                    const Variable& vc = variable(e->variables[c]);
                    if (vc.fixed) continue;
                    const int oc = idx.offset.at(vc.id);
                    const Eigen::MatrixXd block = J[a].transpose() * info * J[c];
                    if (dense) {
                        Hd.block(oa, oc, va.dim(), vc.dim()) += block;
                    } else {
                        for (int rr = 0; rr < block.rows(); ++rr)
                            for (int cc = 0; cc < block.cols(); ++cc)
                                trips.emplace_back(oa + rr, oc + cc, block(rr, cc));
                    }
                }
            }
        }

        Eigen::SparseMatrix<double> Hs;
        if (!dense) {
            Hs.resize(idx.total_dim, idx.total_dim);
            Hs.setFromTriplets(trips.begin(), trips.end());
        }
        const Eigen::VectorXd diag =
            dense ? Eigen::VectorXd(Hd.diagonal()) : Eigen::VectorXd(Hs.diagonal());

        // LM inner loop: grow damping until a step decreases chi2
        bool accepted = false;
        double step_norm = 0.0;
        const double prev_chi2 = current_chi2;
        while (!accepted && lambda <= cfg.lambda_max) {
            Eigen::VectorXd delta;
            bool solved = false;
            const Eigen::VectorXd damp = (lambda * diag.cwiseMax(1e-9)).eval();
            if (dense) {
                Eigen::MatrixXd Hdmp = Hd;
                Hdmp.diagonal() += damp;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(Hdmp);
                if (ldlt.info() == Eigen::Success) {
                    delta = ldlt.solve(b);
                    solved = delta.allFinite();
                }
            } else {
                Eigen::SparseMatrix<double> Hdmp = Hs;
                for (int k = 0; k < idx.total_dim; ++k) Hdmp.coeffRef(k, k) += damp[k];
                Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hdmp);
                if (ldlt.info() == Eigen::Success) {
                    delta = ldlt.solve(b);
                    solved = delta.allFinite();
                }
            }
            if (!solved) {
                lambda *= cfg.lambda_factor;
                continue;
            }

            std::map<int, Variable> backup = variables_;
            for (int vid : idx.ids)
                retract(vid, delta.segment(idx.offset.at(vid), variable(vid).dim()));
            const double new_chi2 = chi2();

            if (new_chi2 <= current_chi2) {
                accepted = true;
                current_chi2 = new_chi2;
                step_norm = delta.norm();
                lambda = std::max(lambda / cfg.lambda_factor, 1e-12);
            } else {
                variables_ = std::move(backup);
                lambda *= cfg.lambda_factor;
            }
        }

        if (!accepted) {
            // damping exhausted without decrease: local minimum
            report.converged = true;
            break;
        }
        report.iterations = iter + 1;

        const double decrease = prev_chi2 - current_chi2;
        if (step_norm < cfg.abs_tol ||
            decrease <= cfg.rel_tol * std::max(prev_chi2, 1e-300)) {
            report.converged = true;
            break;
        }
    }

    report.final_chi2 = current_chi2;
    return report;
}

void FactorGraph::marginalize_variables(const std::vector<int>& ids) {
    // collect edges touching the removed set
    std::vector<int> touched;
    for (const auto& [eid, e] : edges_) {
        for (int vid : e->variables) {
            if (std::find(ids.begin(), ids.end(), vid) != ids.end()) {
                touched.push_back(eid);
                break;
            }
        }
    }

    // Markov blanket: non-fixed, non-removed variables of the touched edges
    std::vector<int> blanket;
    for (int eid : touched) {
        for (int vid : edges_.at(eid)->variables) {
            if (std::find(ids.begin(), ids.end(), vid) != ids.end()) continue;
            if (variable(vid).fixed) continue;
            if (std::find(blanket.begin(), blanket.end(), vid) == blanket.end())
                blanket.push_back(vid);
        }
    }
    std::sort(blanket.begin(), blanket.end());

    if (!blanket.empty()) {
        // local ordering: blanket first, removed last
        std::map<int, int> off;
        int dim_b = 0, dim_m = 0;
        for (int vid : blanket) {
            off[vid] = dim_b;
            dim_b += variable(vid).dim();
        }
        for (int vid : ids) {
            if (!has_variable(vid)) throw ParamError("marginalize: unknown variable id");
            off[vid] = dim_b + dim_m;
            dim_m += variable(vid).dim();
        }
        const int n = dim_b + dim_m;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);

        std::vector<Eigen::MatrixXd> J;
        for (int eid : touched) {
            const Edge& e = *edges_.at(eid);
            const Eigen::VectorXd r = e.residual(*this);
            e.jacobians(*this, J);
            const double w = robust_weight(e, r.dot(e.information * r));
            const Eigen::MatrixXd info = w * e.information;
            for (std::size_t a = 0; a < e.variables.size(); ++a) {
                const Variable& va = variable(e.variables[a]);
                if (va.fixed) continue;
                const int oa = off.at(va.id);
                g.segment(oa, va.dim()) += J[a].transpose() * info * r;
                for (std::size_t c = 0; c < e.variables.size(); ++c) {
                    const Variable& vc = variable(e.variables[c]);
                    if (vc.fixed) continue;
                    H.block(oa, off.at(vc.id), va.dim(), vc.dim()) +=
                        J[a].transpose() * info * J[c];
                }
            }
        }

        // Schur complement onto the blanket
        const Eigen::MatrixXd Hbb = H.topLeftCorner(dim_b, dim_b);
        const Eigen::MatrixXd Hbm = H.topRightCorner(dim_b, dim_m);
        Eigen::MatrixXd Hmm = H.bottomRightCorner(dim_m, dim_m);
        Hmm = 0.5 * (Hmm + Hmm.transpose());
        Hmm.diagonal().array() += 1e-12;
        const Eigen::MatrixXd Hmm_inv =
            Hmm.ldlt().solve(Eigen::MatrixXd::Identity(dim_m, dim_m));
        Eigen::MatrixXd Ht = Hbb - Hbm * Hmm_inv * Hbm.transpose();
        Ht = 0.5 * (Ht + Ht.transpose());
        const Eigen::VectorXd gt =
            g.head(dim_b) - Hbm * Hmm_inv * g.tail(dim_m);

        // square-root form: L^T L = Ht, s = L^-T gt (pseudo-inverse over the
        // retained spectrum)
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ht);
        const double eps = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
        Eigen::VectorXd sqrt_d = Eigen::VectorXd::Zero(dim_b);
        Eigen::VectorXd inv_sqrt_d = Eigen::VectorXd::Zero(dim_b);
        for (int k = 0; k < dim_b; ++k) {
            if (es.eigenvalues()[k] > eps) {
                sqrt_d[k] = std::sqrt(es.eigenvalues()[k]);
                inv_sqrt_d[k] = 1.0 / sqrt_d[k];
            }
        }
        auto prior = std::make_unique<MarginalPriorEdge>();
        prior->L = sqrt_d.asDiagonal() * es.eigenvectors().transpose();
        prior->s = inv_sqrt_d.asDiagonal() * (es.eigenvectors().transpose() * gt);
        prior->variables = blanket;
        for (int vid : blanket) prior->linearization.push_back(variable(vid));
        prior->information = Eigen::MatrixXd::Identity(dim_b, dim_b);
        prior->tag = "margin";
        add_edge(std::move(prior));
    }

    for (int eid : touched) edges_.erase(eid);
    for (int vid : ids) variables_.erase(vid);
}

void FactorGraph::push_window_pose(int pose_id) {
    if (variable(pose_id).kind != VarKind::Pose)
        throw ParamError("push_window_pose: not a pose variable");
    window_.push_back(pose_id);
}

void FactorGraph::marginalize_out(int pose_id, const std::vector<int>& extra_ids) {
    if (window_.empty() || window_.front() != pose_id)
        throw ParamError("marginalize_out: pose is not the oldest window pose");
    std::vector<int> ids = {pose_id};
    ids.insert(ids.end(), extra_ids.begin(), extra_ids.end());
    marginalize_variables(ids);
    window_.pop_front();
}

Eigen::MatrixXd FactorGraph::marginal_covariance(int variable_id) const {
    const ActiveIndex idx = build_index(variables_);
    const Variable& v = variable(variable_id);
    if (v.fixed) return Eigen::MatrixXd::Zero(v.dim(), v.dim());

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(idx.total_dim, idx.total_dim);
    std::vector<Eigen::MatrixXd> J;
    for (const auto& [eid, e] : edges_) {
        const Eigen::VectorXd r = e->residual(*this);
        e->jacobians(*this, J);
        const double w = robust_weight(*e, r.dot(e->information * r));
        const Eigen::MatrixXd info = w * e->information;
        for (std::size_t a = 0; a < e->variables.size(); ++a) {
            const Variable& va = variable(e->variables[a]);
            if (va.fixed) continue;
            for (std::size_t c = 0; c < e->variables.size(); ++c) {
                const Variable& vc = variable(e->variables[c]);
                if (vc.fixed) continue;
                H.block(idx.offset.at(va.id), idx.offset.at(vc.id), va.dim(), vc.dim()) +=
                    J[a].transpose() * info * J[c];
            }
        }
    }
    H.diagonal().array() += 1e-12;
    const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(idx.total_dim, idx.total_dim));
    const int o = idx.offset.at(variable_id);
    return cov.block(o, o, v.dim(), v.dim());
}

void FactorGraph::dump(std::ostream& os) const {
    os.precision(12);
    for (const auto& [id, v] : variables_) {
        if (v.kind == VarKind::Pose) {
            const Eigen::Quaterniond q = v.pose.rotation.quaternion();
            os << "VERTEX_SE3:QUAT " << id << ' ' << v.pose.translation.x() << ' '
               << v.pose.translation.y() << ' ' << v.pose.translation.z() << ' ' << q.x() << ' '
               << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
        } else if (v.kind == VarKind::Velocity) {
            os << "VERTEX_VEL3 " << id << ' ' << v.vec3.transpose() << '\n';
        } else {
            os << "VERTEX_BIAS6 " << id << ' ' << v.vec6.transpose() << '\n';
        }
    }
    for (const auto& [id, e] : edges_) {
        if (auto* rel = dynamic_cast<const RelativePoseEdge*>(e.get())) {
            const Eigen::Quaterniond q = rel->measurement.rotation.quaternion();
            os << "EDGE_SE3:QUAT " << rel->variables[0] << ' ' << rel->variables[1] << ' '
               << rel->measurement.translation.x() << ' ' << rel->measurement.translation.y()
               << ' ' << rel->measurement.translation.z() << ' ' << q.x() << ' ' << q.y() << ' '
               << q.z() << ' ' << q.w();
            for (int r = 0; r < 6; ++r)
                for (int c = r; c < 6; ++c) os << ' ' << rel->information(r, c);
            os << '\n';
        } else {
            os << "# edge " << id << " tag=" << e->tag << " vars=";
            for (int vid : e->variables) os << vid << ',';
            os << '\n';
        }
    }
}

}  // namespace toploc
