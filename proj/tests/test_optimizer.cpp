#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "cvqst/optimizer.hpp"
#include "cvqst/sampler.hpp"

using namespace cvqst;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

Matrix random_hermitian(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = Complex(gauss(rng), gauss(rng));
    return (g + g.adjoint()) / 2.0;
}

Matrix random_density(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = Complex(gauss(rng), gauss(rng));
    Matrix rho = g * g.adjoint();
    rho /= rho.trace();
    return rho;
}

/// Brute-force simplex QP oracle: dense grid search over the 2-simplex.
std::vector<double> simplex_oracle_2d(double x, double y) {
    double best = 1e300;
    std::vector<double> arg{0.0, 0.0};
    const int steps = 20000;
    for (int i = 0; i <= steps; ++i) {
        const double w = double(i) / steps;
        const double dist = (w - x) * (w - x) + (1.0 - w - y) * (1.0 - w - y);
        if (dist < best) {
            best = dist;
            arg = {w, 1.0 - w};
        }
    }
    return arg;
}

/// Orthonormal Hermitian basis design system: A has d^2 rows, A^dag A = I,
/// b_i = Tr(rho_true Basis_i).
DesignSystem hermitian_basis_system(const Matrix& rho_true) {
    const int d = static_cast<int>(rho_true.rows());
    std::vector<Matrix> basis;
    for (int i = 0; i < d; ++i) {
        Matrix e = Matrix::Zero(d, d);
        e(i, i) = 1.0;
        basis.push_back(e);
    }
    const double s = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            Matrix re = Matrix::Zero(d, d), im = Matrix::Zero(d, d);
            re(i, j) = s;
            re(j, i) = s;
            im(i, j) = Complex(0.0, -s);
            im(j, i) = Complex(0.0, s);
            basis.push_back(re);
            basis.push_back(im);
        }
    DesignSystem sys;
    sys.total_dim = d;
    sys.kind = MeasurementKind::QNoiseless;
    sys.a.resize(basis.size(), d * d);
    sys.b.resize(basis.size());
    for (std::size_t r = 0; r < basis.size(); ++r) {
        const Matrix bt = basis[r].transpose();
        sys.a.row(r) = Eigen::Map<const Vector>(bt.data(), bt.size()).transpose();
        sys.b(r) = (rho_true * basis[r]).trace().real();
    }
    return sys;
}

}  // namespace

TEST_CASE("simplex projection") {
    const std::vector<double> on_simplex{0.5, 0.5};
    CHECK(simplex_project(on_simplex) == on_simplex);

    const auto p = simplex_project(std::vector<double>{2.0, 0.0});
    const auto oracle = simplex_oracle_2d(2.0, 0.0);
    CHECK(p[0] == doctest::Approx(oracle[0]).epsilon(1e-3));
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-12));

    const auto sym = simplex_project(std::vector<double>{0.4, 0.4, 0.4});
    for (double w : sym) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        RealVector v(8);
        for (int i = 0; i < 8; ++i) v(i) = gauss(rng);
        const RealVector w = simplex_project(v);
        CHECK(w.minCoeff() >= 0.0);
        CHECK(std::abs(w.sum() - 1.0) < 1e-12);

        const double proj_dist = (w - v).squaredNorm();
        for (int c = 0; c < 100; ++c) {
            RealVector cand(8);
            double total = 0.0;
            for (int i = 0; i < 8; ++i) {
                cand(i) = -std::log(unit(rng));
                total += cand(i);
            }
            cand /= total;
            CHECK(proj_dist <= (cand - v).squaredNorm() + 1e-12);
        }
    }
}

TEST_CASE("density projection") {
    // fixed point on feasible input
    const Matrix rho = random_density(6, 31);
    CHECK(max_abs_diff(project_density(rho).mat, rho) < 1e-10);

    Matrix stretched = Matrix::Zero(2, 2);
    stretched(0, 0) = 2.0;
    const DensityMatrix proj = project_density(stretched);
    CHECK(proj.mat(0, 0).real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(proj.mat(1, 1)) < 1e-14);

    // randomized optimality oracle
    const Matrix h = random_hermitian(8, 77);
    const DensityMatrix p = project_density(h);
    const double dist = (p.mat - h).norm();
    std::mt19937_64 rng(78);
    for (int c = 0; c < 10000; ++c) {
        const Matrix cand = random_density(8, rng());
        CHECK(dist <= (cand - h).norm() + 1e-12);
    }

    // idempotence and non-expansiveness
    CHECK(max_abs_diff(project_density(p.mat).mat, p.mat) < 1e-10);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = random_hermitian(5, 100 + trial);
        const Matrix y = random_hermitian(5, 200 + trial);
        const double lhs = (project_density(x).mat - project_density(y).mat).norm();
        CHECK(lhs <= (x - y).norm() + 1e-10);
    }

    std::string why;
    CHECK(p.is_physical(&why));
}

TEST_CASE("nll objective and gradient") {
    const auto cfg = MeasurementConfig::make({2}, 20);
    Matrix vacuum = Matrix::Zero(2, 2);
    vacuum(0, 0) = 1.0;
    const std::vector<Matrix> single{q_povm(Complex(0.0), cfg)};
    CHECK(nll_objective(vacuum, single) ==
          doctest::Approx(std::log(kPi)).epsilon(1e-12));

    // finite-difference oracle along random Hermitian directions
    const int d = 4;
    const auto cfg4 = MeasurementConfig::make({d}, 24);
    std::vector<Matrix> batch;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> coord(-1.5, 1.5);
    for (int j = 0; j < 6; ++j)
        batch.push_back(q_povm(Complex(coord(rng), coord(rng)), cfg4));
    const Matrix rho = random_density(d, 55);
    const Matrix grad = nll_gradient(rho, batch);
    CHECK(max_abs_diff(grad, grad.adjoint()) < 1e-13);
    const double eps = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        Matrix dir = random_hermitian(d, 300 + trial);
        dir /= dir.norm();
        const double fplus = nll_objective(rho + eps * dir, batch);
        const double fminus = nll_objective(rho - eps * dir, batch);
        const double fd = (fplus - fminus) / (2.0 * eps);
        const double analytic = (grad.adjoint() * dir).trace().real();
        CHECK(std::abs(fd - analytic) <= 1e-6 * std::max(1.0, std::abs(analytic)));
    }

    // duplicating every batch element changes nothing
    std::vector<Matrix> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    CHECK(nll_objective(rho, doubled) ==
          doctest::Approx(nll_objective(rho, batch)).epsilon(1e-14));
    CHECK(max_abs_diff(nll_gradient(rho, doubled), grad) < 1e-14);

    // a batch that clamps entirely aborts
    Matrix excited = Matrix::Zero(2, 2);
    excited(1, 1) = 1.0;
    Matrix vac_povm = Matrix::Zero(2, 2);
    vac_povm(0, 0) = 1.0 / kPi;
    CHECK_THROWS_AS(nll_objective(excited, {vac_povm}), NumericFailure);
}

TEST_CASE("ls gradient matches finite differences") {
    const auto cfg = MeasurementConfig::make({4}, 24);
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(1, 2.0, 4);
    std::vector<double> values(grid.total_cells());
    const Matrix rho_true = random_density(4, 8);
    for (long long c = 0; c < grid.total_cells(); ++c)
        values[c] = evaluate(rho_true, design_povm(grid.cell_alphas(c),
                                                   MeasurementKind::QNoiseless, cfg));
    const DesignSystem sys =
        build_design_system(grid, values, MeasurementKind::QNoiseless, cfg);

    const Matrix rho = random_density(4, 9);
    Matrix grad;
    const double f0 = ls_objective(sys, rho, &grad);
    CHECK(f0 >= 0.0);
    const double eps = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        Matrix dir = random_hermitian(4, 400 + trial);
        dir /= dir.norm();
        const double fplus = ls_objective(sys, rho + eps * dir);
        const double fminus = ls_objective(sys, rho - eps * dir);
        const double fd = (fplus - fminus) / (2.0 * eps);
        const double analytic = (grad.adjoint() * dir).trace().real();
        CHECK(std::abs(fd - analytic) <= 1e-6 * std::max(1.0, std::abs(analytic)));
    }
}

TEST_CASE("pgd on an identity-like system converges immediately") {
    const Matrix rho_true = random_density(3, 21);
    const DesignSystem sys = hermitian_basis_system(rho_true);

    SolverConfig cfg;
    cfg.max_iters = 50;
    const SolverReport report = pgd_least_squares(sys, cfg);
    CHECK(report.termination == "converged");
    CHECK(report.trace.back().iter <= 2);
    CHECK(max_abs_diff(report.rho_final.mat, rho_true) < 1e-9);
    CHECK(report.lipschitz_step == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("pgd noiseless recovery") {
    const int d = 8;
    const auto cfg = MeasurementConfig::make({d}, 50);
    const PureState target = cat_state(1.0, d);
    const Matrix rho_true = target.amps * target.amps.adjoint();

    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(1, 4.0, 20);
    std::vector<double> values(grid.total_cells());
    for (long long c = 0; c < grid.total_cells(); ++c)
        values[c] = evaluate(rho_true, design_povm(grid.cell_alphas(c),
                                                   MeasurementKind::QNoiseless, cfg));
    const DesignSystem sys =
        build_design_system(grid, values, MeasurementKind::QNoiseless, cfg);

    SolverConfig solver;
    solver.max_iters = 4000;
    const SolverReport report = pgd_least_squares(sys, solver, &target);
    CHECK(report.final_fidelity >= 0.999);
    std::string why;
    CHECK(report.rho_final.is_physical(&why));

    // objective trace non-increasing under backtracking
    SolverConfig bt = solver;
    bt.step_rule = StepRule::Backtracking;
    bt.max_iters = 300;
    const SolverReport rb = pgd_least_squares(sys, bt, &target);
    for (std::size_t i = 1; i < rb.trace.size(); ++i)
        CHECK(rb.trace[i].objective <= rb.trace[i - 1].objective + 1e-14);
}

TEST_CASE("momentum least squares converges monotonically") {
    const int d = 6;
    const auto cfg = MeasurementConfig::make({d}, 30);
    const PureState target = cat_state(1.0, d);
    const Matrix rho_true = target.amps * target.amps.adjoint();
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(1, 3.0, 8);
    const auto values =
        evaluate_grid(rho_true, grid, MeasurementKind::QNoiseless, cfg);
    const DesignSystem sys =
        build_design_system(grid, values, MeasurementKind::QNoiseless, cfg);

    SolverConfig fast;
    fast.momentum = true;
    fast.max_iters = 1500;
    fast.rel_tol = 1e-13;
    const SolverReport r = pgd_least_squares(sys, fast, &target);
    CHECK(r.final_fidelity >= 0.999);
    // monotone safeguard: the recorded objectives never increase
    for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i].objective <= r.trace[i - 1].objective + 1e-13);
    std::string why;
    CHECK(r.rho_final.is_physical(&why));
}

TEST_CASE("stochastic ls: full batch reproduces the pgd trajectory") {
    const auto cfg = MeasurementConfig::make({4}, 24);
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(1, 2.0, 3);  // 9 rows < 16
    const Matrix rho_true = random_density(4, 3);
    std::vector<double> values(grid.total_cells());
    for (long long c = 0; c < grid.total_cells(); ++c)
        values[c] = evaluate(rho_true, design_povm(grid.cell_alphas(c),
                                                   MeasurementKind::QNoiseless, cfg));
    const DesignSystem sys =
        build_design_system(grid, values, MeasurementKind::QNoiseless, cfg);

    SolverConfig pgd_cfg;
    pgd_cfg.max_iters = 12;
    pgd_cfg.rel_tol = 0.0;  // run the full budget
    const SolverReport pgd_report = pgd_least_squares(sys, pgd_cfg);

    SolverConfig st;
    st.eta0 = pgd_report.lipschitz_step;
    st.outer_iters = 1;  // a single round keeps the learning rate fixed
    st.inner_iters = 12;
    st.batch_size = static_cast<int>(sys.rows());
    st.algorithm = Algorithm::Ssg;
    const SolverReport st_report = stochastic_least_squares(sys, st);

    // batch objective recorded at step k is evaluated at the pre-step iterate,
    // which matches the pgd objective of iterate k-1
    for (int k = 1; k <= 12; ++k)
        CHECK(st_report.trace[k].objective ==
              doctest::Approx(pgd_report.trace[k - 1].objective).epsilon(1e-9));
}

TEST_CASE("stochastic ls: batch gradients are unbiased") {
    const auto cfg = MeasurementConfig::make({3}, 20);
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(1, 2.0, 4);
    const Matrix rho_true = random_density(3, 4);
    std::vector<double> values(grid.total_cells());
    for (long long c = 0; c < grid.total_cells(); ++c)
        values[c] = evaluate(rho_true, design_povm(grid.cell_alphas(c),
                                                   MeasurementKind::QNoiseless, cfg));
    const DesignSystem sys =
        build_design_system(grid, values, MeasurementKind::QNoiseless, cfg);

    const Matrix rho = random_density(3, 5);
    Matrix full;
    ls_objective(sys, rho, &full);

    std::mt19937_64 rng(6);
    std::vector<int> all(sys.rows());
    std::iota(all.begin(), all.end(), 0);
    Matrix mean = Matrix::Zero(3, 3);
    const int n_batches = 1000;
    for (int b = 0; b < n_batches; ++b) {
        std::shuffle(all.begin(), all.end(), rng);
        const std::vector<int> batch(all.begin(), all.begin() + 4);
        mean += ls_batch_gradient(sys, rho, batch);
    }
    mean /= double(n_batches);
    CHECK((mean - full).norm() / full.norm() < 1e-2 * 3.0);
}

TEST_CASE("ssg recovers the vacuum from samples") {
    const auto cfg = MeasurementConfig::make({2}, 20);
    Matrix vac = Matrix::Zero(2, 2);
    vac(0, 0) = 1.0;
    PureState target;
    target.amps = Vector::Zero(2);
    target.amps(0) = 1.0;

    McmcConfig mc;
    mc.n_samples = 10000;
    mc.seed = 13;
    const SampleSet samples = sample_q(DensityMatrix::from(vac), cfg, mc);

    SolverConfig solver;
    solver.eta0 = 0.5;
    solver.outer_iters = 5;
    solver.inner_iters = 50;
    solver.batch_size = 200;
    solver.seed = 1;
    solver.algorithm = Algorithm::Ssg;
    const PovmFactory factory{cfg};
    const SolverReport report = ssg_solve(samples, factory, solver, &target);
    CHECK(report.final_fidelity >= 0.99);
    std::string why;
    CHECK(report.rho_final.is_physical(&why));

    // determinism: bitwise-identical traces on a rerun
    const SolverReport again = ssg_solve(samples, factory, solver, &target);
    REQUIRE(again.trace.size() == report.trace.size());
    for (std::size_t i = 0; i < report.trace.size(); ++i) {
        if (i > 0) CHECK(again.trace[i].objective == report.trace[i].objective);
        CHECK(again.trace[i].fidelity == report.trace[i].fidelity);
    }
    CHECK(max_abs_diff(again.rho_final.mat, report.rho_final.mat) == 0.0);
}

TEST_CASE("ssg manual replay pins averaging and the halving schedule") {
    // batch = whole dataset, so every step sees the same mean gradient and
    // the replay below is exact up to summation order
    const auto cfg = MeasurementConfig::make({2}, 20);
    SampleSet s;
    s.modes = 1;
    s.data = {Complex(0.1, 0.2), Complex(-0.4, 0.3), Complex(0.6, -0.1),
              Complex(0.0, 0.0)};
    const PovmFactory factory{cfg, /*force_dense=*/true};

    SolverConfig solver;
    solver.eta0 = 0.3;
    solver.outer_iters = 2;
    solver.inner_iters = 2;
    solver.batch_size = 4;
    solver.seed = 42;
    const SolverReport report = ssg_solve(s, factory, solver);

    std::vector<Matrix> povms;
    for (int i = 0; i < 4; ++i) povms.push_back(q_povm(s.data[i], cfg));
    Matrix rho = Matrix::Identity(2, 2) / 2.0;
    double eta = solver.eta0;
    for (int round = 1; round <= 2; ++round) {
        Matrix accum = Matrix::Zero(2, 2);
        for (int tau = 1; tau <= 2; ++tau) {
            accum += rho;
            const Matrix grad = nll_gradient(rho, povms);
            rho = project_density(rho - eta * grad).mat;
        }
        rho = accum / 2.0;
        eta /= 2.0;
    }
    CHECK(max_abs_diff(report.rho_final.mat, rho) < 1e-10);
}

TEST_CASE("assg-r inner update replay") {
    const auto cfg = MeasurementConfig::make({2}, 20);
    SampleSet s;
    s.modes = 1;
    s.data = {Complex(0.2, -0.3), Complex(-0.1, 0.5), Complex(0.4, 0.4)};
    const PovmFactory factory{cfg, /*force_dense=*/true};

    SolverConfig solver;
    solver.eta0 = 0.25;
    solver.outer_iters = 2;
    solver.inner_iters = 3;
    solver.batch_size = 3;
    solver.seed = 7;
    const SolverReport report = assg_r_solve(s, factory, solver);

    // two-sequence accelerated replay: sliding sequence from the round anchor,
    // tau-weighted aggregate, inner-iterate average, halving learning rate
    std::vector<Matrix> povms;
    for (int i = 0; i < 3; ++i) povms.push_back(q_povm(s.data[i], cfg));
    Matrix rho = Matrix::Identity(2, 2) / 2.0;
    double eta = solver.eta0;
    for (int round = 1; round <= 2; ++round) {
        Matrix sliding = rho;
        Matrix accum = Matrix::Zero(2, 2);
        for (int tau = 1; tau <= 3; ++tau) {
            accum += rho;
            const double blend = 2.0 / (tau + 1.0);
            const Matrix probe = (1.0 - blend) * rho + blend * sliding;
            const Matrix grad = nll_gradient(probe, povms);
            sliding = project_density(sliding - eta * grad).mat;
            rho = (1.0 - blend) * rho + blend * sliding;
        }
        rho = accum / 3.0;
        eta /= 2.0;
    }
    CHECK(max_abs_diff(report.rho_final.mat, rho) < 1e-10);

    // tau=1 blend weight is 1: the first update is a projected step from the
    // round anchor, so the first logged batch objective is the anchor's
    const double obj0 = nll_objective(Matrix::Identity(2, 2) / 2.0, povms);
    CHECK(report.trace[1].objective == doctest::Approx(obj0).epsilon(1e-12));

    // every recorded iterate of the aggregate sequence stays feasible
    std::string why;
    CHECK(report.rho_final.is_physical(&why));
}

TEST_CASE("stochastic ls recovers a cat state with small batches") {
    const int d = 8;
    const auto cfg = MeasurementConfig::make({d}, 40);
    const PureState target = cat_state(1.0, d);
    const Matrix rho_true = target.amps * target.amps.adjoint();
    const PhaseSpaceGrid grid = PhaseSpaceGrid::uniform(1, 3.0, 10);
    std::vector<double> values(grid.total_cells());
    for (long long c = 0; c < grid.total_cells(); ++c)
        values[c] = evaluate(rho_true, design_povm(grid.cell_alphas(c),
                                                   MeasurementKind::QNoiseless, cfg));
    const DesignSystem sys =
        build_design_system(grid, values, MeasurementKind::QNoiseless, cfg);

    const SolverReport probe = pgd_least_squares(sys, SolverConfig{});
    SolverConfig st;
    st.eta0 = 2.0 * probe.lipschitz_step;
    st.outer_iters = 6;
    st.inner_iters = 300;
    st.batch_size = 64;
    st.seed = 3;
    st.algorithm = Algorithm::Ssg;
    const SolverReport report = stochastic_least_squares(sys, st, &target);
    CHECK(report.final_fidelity >= 0.99);
}

TEST_CASE("solver config validation") {
    SolverConfig bad;
    bad.eta0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);

    const auto cfg = MeasurementConfig::make({2}, 16);
    SampleSet s;
    s.modes = 1;
    s.data = {Complex(0.0, 0.0)};
    SolverConfig batch_too_big;
    batch_too_big.batch_size = 2;
    CHECK_THROWS_AS(ssg_solve(s, PovmFactory{cfg}, batch_too_big), InvalidInput);
}
