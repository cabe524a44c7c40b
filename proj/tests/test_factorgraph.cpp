#include <doctest.h>

#include <random>
#include <sstream>

#include "support/dense_reference.hpp"
#include "toploc/error.hpp"
#include "toploc/factorgraph.hpp"

using namespace toploc;
using toploc::testsupport::dense_reference_solve;
using toploc::testsupport::numeric_edge_jacobian;

namespace {

std::mt19937_64 g_rng(20240901);

Pose random_pose(double rot = 1.0, double trans = 5.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    Twist xi;
    xi.head<3>() = rot * Vec3(n(g_rng), n(g_rng), n(g_rng)).normalized() *
                   std::uniform_real_distribution<double>(0.0, 1.0)(g_rng);
    xi.tail<3>() = trans * Vec3(n(g_rng), n(g_rng), n(g_rng)).normalized() *
                   std::uniform_real_distribution<double>(0.0, 1.0)(g_rng);
    return se3_exp(xi);
}

Mat6 random_information() {
    std::uniform_real_distribution<double> u(0.5, 4.0);
    Vec6 d;
    for (int i = 0; i < 6; ++i) d[i] = u(g_rng);
    return d.asDiagonal();
}

}  // namespace

TEST_CASE("chain of 3 poses with exact odometry recovers composed truth") {
    FactorGraph g;
    const Pose T0 = Pose::Identity();
    const Pose d01 = se3_exp((Twist() << 0.1, 0.0, 0.2, 1.0, 0.0, 0.0).finished());
    const Pose d12 = se3_exp((Twist() << 0.0, -0.1, 0.1, 0.5, 0.5, 0.0).finished());
    const Pose T1 = compose_nocov(T0, d01);
    const Pose T2 = compose_nocov(T1, d12);

    const int p0 = g.add_pose(T0, true);
    const int p1 = g.add_pose(T1);  // initialized by composition
    const int p2 = g.add_pose(T2);
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, d01, Mat6::Identity()));
    g.add_edge(std::make_unique<RelativePoseEdge>(p1, p2, d12, Mat6::Identity()));

    const OptimizeReport rep = g.optimize();
    CHECK(rep.converged);
    CHECK(rep.iterations <= 1);
    CHECK(rep.final_chi2 < 1e-20);
    CHECK(se3_log(relative_nocov(g.pose(p1), T1)).norm() < 1e-10);
    CHECK(se3_log(relative_nocov(g.pose(p2), T2)).norm() < 1e-10);
}

TEST_CASE("perturbed chain converges back to truth") {
    FactorGraph g;
    const Pose d01 = se3_exp((Twist() << 0.1, 0.0, 0.2, 1.0, 0.0, 0.0).finished());
    const Pose d12 = se3_exp((Twist() << 0.0, -0.1, 0.1, 0.5, 0.5, 0.0).finished());
    const Pose T1 = d01;
    const Pose T2 = compose_nocov(T1, d12);

    const int p0 = g.add_pose(Pose::Identity(), true);
    const int p1 = g.add_pose(compose_nocov(T1, se3_exp((Twist() << 0.05, -0.02, 0.04, 0.2, -0.1, 0.15).finished())));
    const int p2 = g.add_pose(compose_nocov(T2, se3_exp((Twist() << -0.03, 0.04, -0.02, -0.2, 0.1, 0.1).finished())));
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, d01, Mat6::Identity()));
    g.add_edge(std::make_unique<RelativePoseEdge>(p1, p2, d12, Mat6::Identity()));

    SolverConfig cfg;
    cfg.max_iter = 50;
    const OptimizeReport rep = g.optimize(cfg);
    CHECK(rep.converged);
    CHECK(rep.final_chi2 <= rep.initial_chi2);
    CHECK(se3_log(relative_nocov(g.pose(p2), T2)).norm() < 1e-8);
}

TEST_CASE("two conflicting priors converge to the tangent-space midpoint") {
    const Pose A = random_pose(0.8, 3.0);
    const Pose B = random_pose(0.8, 3.0);
    // closed-form geodesic midpoint: exp(0.5 log(B A^-1)) A
    const Pose mid =
        compose_nocov(se3_exp(0.5 * se3_log(compose_nocov(B, inverse_nocov(A)))), A);

    FactorGraph g;
    const int p = g.add_pose(A);
    g.add_edge(PosePriorEdge::from_prior_mean(p, A, Mat6::Identity()));
    g.add_edge(PosePriorEdge::from_prior_mean(p, B, Mat6::Identity()));

    SolverConfig cfg;
    cfg.max_iter = 100;
    g.optimize(cfg);
    CHECK(se3_log(relative_nocov(g.pose(p), mid)).norm() < 1e-7);
}

TEST_CASE("20-pose noisy loop matches the dense reference solver") {
    std::normal_distribution<double> n(0.0, 1.0);
    const int N = 20;

    // ground-truth loop
    std::vector<Pose> truth;
    for (int i = 0; i < N; ++i) {
        const double a = 2.0 * M_PI * i / N;
        Pose T;
        T.rotation = so3_exp(Vec3(0, 0, a));
        T.translation = Vec3(10.0 * std::cos(a), 10.0 * std::sin(a), 0.1 * i);
        truth.push_back(T);
    }

    // noisy relative measurements (including the loop-closing edge)
    std::vector<Pose> meas;
    for (int i = 0; i < N; ++i) {
        const Pose rel = relative_nocov(truth[i], truth[(i + 1) % N]);
        Twist noise;
        for (int k = 0; k < 3; ++k) noise[k] = 0.01 * n(g_rng);
        for (int k = 3; k < 6; ++k) noise[k] = 0.05 * n(g_rng);
        meas.push_back(compose_nocov(rel, se3_exp(noise)));
    }

    auto build = [&](FactorGraph& g) {
        std::vector<int> ids;
        for (int i = 0; i < N; ++i) {
            Pose init = truth[i];
            if (i > 0) {
                Twist d;
                for (int k = 0; k < 3; ++k) d[k] = 0.02 * n(g_rng);
                for (int k = 3; k < 6; ++k) d[k] = 0.1 * n(g_rng);
                init = compose_nocov(init, se3_exp(d));
            }
            ids.push_back(g.add_pose(init, i == 0));
        }
        for (int i = 0; i < N; ++i)
            g.add_edge(std::make_unique<RelativePoseEdge>(ids[i], ids[(i + 1) % N], meas[i],
                                                          random_information()));
    };

    // identical initializations for both solvers
    const auto state = g_rng;
    FactorGraph lm;
    build(lm);
    g_rng = state;
    FactorGraph ref;
    build(ref);

    SolverConfig cfg;
    cfg.max_iter = 100;
    cfg.rel_tol = 1e-14;
    cfg.abs_tol = 1e-12;
    const OptimizeReport rep = lm.optimize(cfg);
    const double chi_ref = dense_reference_solve(ref, 100);

    CHECK(rep.final_chi2 <= rep.initial_chi2);
    CHECK(std::abs(rep.final_chi2 - chi_ref) < 1e-6);
}

TEST_CASE("sparse path matches dense path on a larger graph") {
    // above the dense threshold so the block-sparse Cholesky branch runs
    std::normal_distribution<double> n(0.0, 1.0);
    const int N = 60;
    std::vector<Pose> truth;
    for (int i = 0; i < N; ++i) {
        Pose T;
        T.translation = Vec3(i * 0.5, std::sin(i * 0.2), 0.0);
        T.rotation = so3_exp(Vec3(0, 0, 0.05 * i));
        truth.push_back(T);
    }
    auto build = [&](FactorGraph& g) {
        std::vector<int> ids;
        for (int i = 0; i < N; ++i) {
            Twist d = Twist::Zero();
            if (i > 0)
                for (int k = 0; k < 6; ++k) d[k] = 0.02 * n(g_rng);
            ids.push_back(g.add_pose(compose_nocov(truth[i], se3_exp(d)), i == 0));
        }
        for (int i = 0; i + 1 < N; ++i) {
            const Pose rel = relative_nocov(truth[i], truth[i + 1]);
            g.add_edge(std::make_unique<RelativePoseEdge>(ids[i], ids[i + 1], rel,
                                                          Mat6::Identity() * 10.0));
        }
    };
    const auto state = g_rng;
    FactorGraph sparse;
    build(sparse);
    g_rng = state;
    FactorGraph dense;
    build(dense);

    SolverConfig cfg;
    cfg.max_iter = 60;
    cfg.rel_tol = 1e-14;
    const OptimizeReport rs = sparse.optimize(cfg);  // 60 poses > dense_threshold
    SolverConfig cfg_dense = cfg;
    cfg_dense.dense_threshold = 1000;
    const OptimizeReport rd = dense.optimize(cfg_dense);
    CHECK(std::abs(rs.final_chi2 - rd.final_chi2) < 1e-8);
}

TEST_CASE("every edge type: analytic jacobians match finite differences") {
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        FactorGraph g;
        const int pi = g.add_pose(random_pose());
        const int pj = g.add_pose(random_pose());
        const int vi = g.add_velocity(Vec3(n(g_rng), n(g_rng), n(g_rng)));
        const int vj = g.add_velocity(Vec3(n(g_rng), n(g_rng), n(g_rng)));
        Vec6 b0, b1;
        for (int k = 0; k < 6; ++k) {
            b0[k] = 0.02 * n(g_rng);
            b1[k] = 0.02 * n(g_rng);
        }
        const int bi = g.add_bias(b0);
        const int bj = g.add_bias(b1);

        std::vector<std::unique_ptr<Edge>> edges;
        edges.push_back(std::make_unique<PosePriorEdge>(pi, random_pose(), Mat6::Identity()));
        edges.push_back(
            std::make_unique<RelativePoseEdge>(pi, pj, random_pose(), Mat6::Identity()));
        edges.push_back(std::make_unique<GnssUnaryEdge>(
            pi, Vec3(n(g_rng), n(g_rng), n(g_rng)), Mat3::Identity()));

        // imu edge with a short synthetic preintegration
        std::vector<ImuSample> samples;
        for (int i = 0; i <= 20; ++i) {
            samples.push_back(ImuSample{
                i * 0.005, Vec3(0.3 * std::sin(i * 0.1), 0.2, -0.1),
                Vec3(0.5, 0.3 * std::cos(i * 0.1), 9.5)});
        }
        ImuNoiseConfig noise;
        const PreintegratedImu pre = preintegrate(samples, ImuBias{}, noise);
        edges.push_back(std::make_unique<ImuEdge>(pi, vi, bi, pj, vj, bj, pre, noise));

        for (auto& e : edges) {
            std::vector<Eigen::MatrixXd> J;
            e->jacobians(g, J);
            for (std::size_t a = 0; a < e->variables.size(); ++a) {
                const Eigen::MatrixXd fd = numeric_edge_jacobian(g, *e, e->variables[a], 1e-6);
                const double scale = std::max(1.0, fd.norm());
                CHECK((J[a] - fd).norm() / scale < 1e-5);
            }
        }
    }
}

TEST_CASE("lo_prior with measurement equal to current estimate has zero residual") {
    FactorGraph g;
    const Pose T = random_pose();
    const int p = g.add_pose(T);
    PosePriorEdge e(p, inverse_nocov(T), Mat6::Identity());
    CHECK(e.residual(g).norm() < 1e-12);
}

TEST_CASE("map_binary algebraic identity gives zero residual") {
    FactorGraph g;
    const Pose Tk = random_pose();           // reference vertex
    const Pose meas = random_pose();         // iT~M_k
    const Pose Ti = compose_nocov(Tk, inverse_nocov(meas));
    const int pi = g.add_pose(Ti);
    const int pk = g.add_pose(Tk, true);
    RelativePoseEdge e(pi, pk, meas, Mat6::Identity());
    e.tag = "map";
    CHECK(e.residual(g).norm() < 1e-12);
}

TEST_CASE("total cost equals the sum of per-edge quadratic terms") {
    FactorGraph g;
    const int p0 = g.add_pose(random_pose(), true);
    const int p1 = g.add_pose(random_pose());
    const int p2 = g.add_pose(random_pose());
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, random_pose(), random_information()));
    g.add_edge(std::make_unique<RelativePoseEdge>(p1, p2, random_pose(), random_information()));
    g.add_edge(std::make_unique<GnssUnaryEdge>(p2, Vec3(1, 2, 3), Mat3::Identity() * 2.0));

    double manual = 0.0;
    for (const auto& [id, e] : g.edges()) {
        const Eigen::VectorXd r = e->residual(g);
        manual += r.dot(e->information * r);
    }
    CHECK(g.chi2() == doctest::Approx(manual));
    CHECK(g.chi2() ==
          doctest::Approx(g.chi2_of_tag("lio") + g.chi2_of_tag("gnss") + g.chi2_of_tag("map")));
}

TEST_CASE("gauge error without anchor") {
    FactorGraph g;
    const int p0 = g.add_pose(random_pose());
    const int p1 = g.add_pose(random_pose());
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, random_pose(), Mat6::Identity()));
    CHECK_THROWS_AS(g.optimize(), GaugeError);
}

TEST_CASE("non-PSD information is rejected") {
    FactorGraph g;
    const int p = g.add_pose(random_pose());
    Mat6 bad = Mat6::Identity();
    bad(0, 0) = -1.0;
    CHECK_THROWS_AS(g.add_edge(std::make_unique<PosePriorEdge>(p, random_pose(), bad)),
                    ParamError);
}

TEST_CASE("fixing equals infinite-information prior") {
    const Pose anchor = random_pose();
    const Pose d01 = se3_exp((Twist() << 0.1, -0.05, 0.2, 1.0, 0.3, -0.2).finished());
    const Pose meas_prior = random_pose(0.3, 1.0);

    auto solve = [&](bool use_fixed) {
        FactorGraph g;
        const int p0 = g.add_pose(anchor, use_fixed);
        const int p1 = g.add_pose(compose_nocov(anchor, d01));
        if (!use_fixed)
            g.add_edge(PosePriorEdge::from_prior_mean(p0, anchor, Mat6::Identity() * 1e12));
        g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, d01, Mat6::Identity()));
        g.add_edge(PosePriorEdge::from_prior_mean(p1, meas_prior, Mat6::Identity()));
        SolverConfig cfg;
        cfg.max_iter = 100;
        g.optimize(cfg);
        return g.pose(p1);
    };

    const Pose a = solve(true);
    const Pose b = solve(false);
    CHECK(se3_log(relative_nocov(a, b)).norm() < 1e-6);
}

TEST_CASE("gauge freedom: shifting the anchor shifts the optimum rigidly") {
    const Pose d01 = se3_exp((Twist() << 0.05, 0.1, -0.1, 0.5, 1.0, 0.2).finished());
    const Pose shift = random_pose(0.5, 2.0);

    auto solve = [&](const Pose& anchor) {
        FactorGraph g;
        const int p0 = g.add_pose(anchor, true);
        const int p1 = g.add_pose(compose_nocov(anchor, random_pose(0.1, 0.3)));
        g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, d01, Mat6::Identity()));
        SolverConfig cfg;
        cfg.max_iter = 50;
        g.optimize(cfg);
        return std::pair{g.pose(p0), g.pose(p1)};
    };

    const auto [a0, a1] = solve(Pose::Identity());
    const auto [b0, b1] = solve(shift);
    // relative structure is preserved exactly
    CHECK(se3_log(relative_nocov(relative_nocov(a0, a1), relative_nocov(b0, b1))).norm() < 1e-8);
}

TEST_CASE("marginalizing the oldest pose preserves the retained optimum") {
    // 3-pose chain with priors; optimize, marginalize pose 0, re-optimize
    FactorGraph g;
    const Pose d01 = se3_exp((Twist() << 0.1, 0.0, 0.1, 1.0, 0.0, 0.1).finished());
    const Pose d12 = se3_exp((Twist() << -0.05, 0.1, 0.0, 0.8, -0.2, 0.0).finished());

    const int p0 = g.add_pose(Pose::Identity());
    const int p1 = g.add_pose(d01);
    const int p2 = g.add_pose(compose_nocov(d01, d12));
    g.push_window_pose(p0);
    g.push_window_pose(p1);
    g.push_window_pose(p2);

    g.add_edge(PosePriorEdge::from_prior_mean(p0, random_pose(0.1, 0.2), Mat6::Identity() * 10.0));
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, compose_nocov(d01, se3_exp(Twist::Constant(0.01))), random_information()));
    g.add_edge(std::make_unique<RelativePoseEdge>(p1, p2, d12, random_information()));
    g.add_edge(PosePriorEdge::from_prior_mean(p2, compose_nocov(d01, d12), Mat6::Identity()));

    SolverConfig cfg;
    cfg.max_iter = 100;
    cfg.rel_tol = 1e-15;
    cfg.abs_tol = 1e-14;
    g.optimize(cfg);
    const Pose opt1 = g.pose(p1);
    const Pose opt2 = g.pose(p2);

    g.marginalize_out(p0);
    CHECK_FALSE(g.has_variable(p0));
    g.optimize(cfg);
    CHECK(se3_log(relative_nocov(g.pose(p1), opt1)).norm() < 1e-8);
    CHECK(se3_log(relative_nocov(g.pose(p2), opt2)).norm() < 1e-8);
}

TEST_CASE("marginal prior information equals the dense schur complement") {
    FactorGraph g;
    const int p0 = g.add_pose(random_pose(0.2, 1.0));
    const int p1 = g.add_pose(random_pose(0.2, 1.0));
    g.push_window_pose(p0);
    g.push_window_pose(p1);
    const Mat6 I0 = random_information();
    const Mat6 I01 = random_information();
    const Pose prior_mean = random_pose(0.2, 1.0);
    const Pose meas01 = random_pose(0.2, 1.0);
    g.add_edge(PosePriorEdge::from_prior_mean(p0, prior_mean, I0));
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, meas01, I01));

    // dense oracle: assemble the 12x12 system by hand with numeric jacobians
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(12, 12);
    // order: blanket (p1) first then marginalized (p0) to mirror the
    // implementation
    std::map<int, int> off{{p1, 0}, {p0, 6}};
    for (const auto& [eid, e] : g.edges()) {
        std::map<int, Eigen::MatrixXd> jacs;
        for (int vid : e->variables) jacs[vid] = numeric_edge_jacobian(g, *e, vid);
        for (const auto& [va, Ja] : jacs)
            for (const auto& [vc, Jc] : jacs)
                H.block(off[va], off[vc], 6, 6) += Ja.transpose() * e->information * Jc;
    }
    const Mat6 expected =
        H.topLeftCorner<6, 6>() -
        H.topRightCorner<6, 6>() * H.bottomRightCorner<6, 6>().inverse() *
            H.bottomLeftCorner<6, 6>();

    g.marginalize_out(p0);
    REQUIRE(g.num_edges() == 1);
    const Edge& prior = *g.edges().begin()->second;
    CHECK(prior.tag == "margin");
    std::vector<Eigen::MatrixXd> J;
    prior.jacobians(g, J);
    const Eigen::MatrixXd info = J[0].transpose() * prior.information * J[0];
    CHECK((info - expected).norm() / expected.norm() < 1e-5);
}

TEST_CASE("marginalizing a disconnected pose drops it without a prior") {
    FactorGraph g;
    const int p0 = g.add_pose(random_pose());
    g.push_window_pose(p0);
    const int p1 = g.add_pose(random_pose());
    (void)p1;
    g.marginalize_out(p0);
    CHECK_FALSE(g.has_variable(p0));
    CHECK(g.num_edges() == 0);
}

TEST_CASE("marginalize_out rejects a non-oldest pose") {
    FactorGraph g;
    const int p0 = g.add_pose(random_pose());
    const int p1 = g.add_pose(random_pose());
    g.push_window_pose(p0);
    g.push_window_pose(p1);
    CHECK_THROWS_AS(g.marginalize_out(p1), ParamError);
}

TEST_CASE("graph dump emits g2o-style records") {
    FactorGraph g;
    const int p0 = g.add_pose(Pose::Identity(), true);
    const int p1 = g.add_pose(random_pose());
    g.add_edge(std::make_unique<RelativePoseEdge>(p0, p1, random_pose(), Mat6::Identity()));
    std::ostringstream os;
    g.dump(os);
    const std::string s = os.str();
    CHECK(s.find("VERTEX_SE3:QUAT 0") != std::string::npos);
    CHECK(s.find("EDGE_SE3:QUAT 0 1") != std::string::npos);
}

TEST_CASE("huber kernel reduces the influence of an outlier prior") {
    const Pose truth = Pose::Identity();
    auto solve = [&](double huber) {
        FactorGraph g;
        const int p = g.add_pose(random_pose(0.05, 0.1));
        g.add_edge(PosePriorEdge::from_prior_mean(p, truth, Mat6::Identity() * 100.0));
        auto outlier = PosePriorEdge::from_prior_mean(
            p, Pose(Rot3::Identity(), Vec3(5, 0, 0)), Mat6::Identity() * 100.0);
        outlier->huber_delta = huber;
        g.add_edge(std::move(outlier));
        SolverConfig cfg;
        cfg.max_iter = 100;
        g.optimize(cfg);
        return g.pose(p).translation.x();
    };
    const double plain = solve(0.0);
    const double robust = solve(1.0);
    CHECK(plain > 2.0);   // pulled halfway to the outlier
    CHECK(robust < plain);  // kernel damps the pull
}
