#include "cvqst/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

namespace cvqst {

namespace {

constexpr double kLogFloor = 1e-300;

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

Matrix hermitize(const Matrix& m) { return (m + m.adjoint()) / 2.0; }

Matrix unvec(const Vector& v, int d) {
    return Eigen::Map<const Matrix>(v.data(), d, d);
}

Vector vec(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

/// Largest eigenvalue of A^dag A by power iteration on the given matvec pair.
double power_iteration_sq(const std::function<Vector(const Vector&)>& apply_a,
                          const std::function<Vector(const Vector&)>& apply_at,
                          int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = Complex(gauss(rng), gauss(rng));
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        Vector w = apply_at(apply_a(v));
        const double next = w.norm();
        if (next == 0.0) return 0.0;
        w /= next;
        if (std::abs(next - lambda) <= 1e-12 * std::max(1.0, next) && it > 4) {
            lambda = next;
            break;
        }
        lambda = next;
        v = std::move(w);
    }
    return lambda;
}

}  // namespace

void SolverConfig::validate() const {
    require(eta0 > 0.0, "SolverConfig: eta0 must be positive");
    require(outer_iters > 0, "SolverConfig: outer_iters must be positive");
    require(inner_iters > 0, "SolverConfig: inner_iters must be positive");
    require(batch_size > 0, "SolverConfig: batch_size must be positive");
    require(max_iters > 0, "SolverConfig: max_iters must be positive");
    require(rel_tol >= 0.0, "SolverConfig: rel_tol must be >= 0");
}

double SolverReport::max_fidelity() const {
    double best = final_fidelity;
    for (const auto& rec : trace) best = std::max(best, rec.fidelity);
    return best;
}

RealVector simplex_project(const RealVector& v) {
    const int n = static_cast<int>(v.size());
    if (n == 0) throw InvalidInput("simplex_project: empty input");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0, theta = 0.0;
    for (int k = 0; k < n; ++k) {
        cumsum += u[k];
        const double candidate = (cumsum - 1.0) / (k + 1);
        if (u[k] - candidate > 0.0) theta = candidate;
    }
    RealVector w(n);
    for (int i = 0; i < n; ++i) w(i) = std::max(v(i) - theta, 0.0);
    return w;
}

std::vector<double> simplex_project(const std::vector<double>& v) {
    RealVector in = Eigen::Map<const RealVector>(v.data(), v.size());
    RealVector out = simplex_project(in);
    return std::vector<double>(out.data(), out.data() + out.size());
}

DensityMatrix project_density(const Matrix& hermitian) {
    if (hermitian.rows() != hermitian.cols())
        throw InvalidDimension("project_density: matrix not square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(hermitian));
    if (es.info() != Eigen::Success)
        throw NumericFailure("project_density: eigendecomposition failed");
    const RealVector w = simplex_project(es.eigenvalues());

    // Reassemble from the support only; projected spectra are often sparse.
    const int d = static_cast<int>(hermitian.rows());
    Matrix out = Matrix::Zero(d, d);
    std::vector<int> support;
    for (int i = 0; i < d; ++i)
        if (w(i) > 0.0) support.push_back(i);
    if (!support.empty()) {
        Matrix cols(d, support.size());
        RealVector vals(support.size());
        for (std::size_t j = 0; j < support.size(); ++j) {
            cols.col(j) = es.eigenvectors().col(support[j]);
            vals(j) = w(support[j]);
        }
        out = cols * vals.asDiagonal() * cols.adjoint();
        out = hermitize(out);
    }
    return DensityMatrix::trusted(std::move(out));
}

double nll_objective(const Matrix& rho, const std::vector<Matrix>& povms,
                     long long* clamps) {
    if (povms.empty()) throw InvalidInput("nll_objective: empty batch");
    double acc = 0.0;
    long long clamped = 0;
    for (const auto& povm : povms) {
        double q = evaluate(rho, povm);
        if (q < kLogFloor) {
            q = kLogFloor;
            ++clamped;
        }
        acc -= std::log(q);
    }
    if (clamps) *clamps += clamped;
    if (clamped == static_cast<long long>(povms.size()))
        throw NumericFailure("nll_objective: every batch element hit the log floor");
    return acc / povms.size();
}

Matrix nll_gradient(const Matrix& rho, const std::vector<Matrix>& povms,
                    double* objective, long long* clamps) {
    if (povms.empty()) throw InvalidInput("nll_gradient: empty batch");
    const int d = static_cast<int>(rho.rows());
    Matrix grad = Matrix::Zero(d, d);
    double acc = 0.0;
    long long clamped = 0;
    for (const auto& povm : povms) {
        double q = evaluate(rho, povm);
        if (q < kLogFloor) {
            q = kLogFloor;
            ++clamped;
        }
        acc -= std::log(q);
        grad -= povm / q;
    }
    if (clamped == static_cast<long long>(povms.size()))
        throw NumericFailure("nll_gradient: every batch element hit the log floor");
    if (clamps) *clamps += clamped;
    if (objective) *objective = acc / povms.size();
    grad /= static_cast<double>(povms.size());
    return hermitize(grad);
}

double ls_objective(const DesignSystem& system, const Matrix& rho, Matrix* gradient) {
    if (rho.rows() != system.total_dim)
        throw InvalidDimension("ls_objective: rho dimension != system dimension");
    const Vector rho_vec = vec(rho);
    const Vector residual = system.a * rho_vec - system.b.cast<Complex>();
    if (gradient) {
        const Vector grad_vec = system.a.adjoint() * residual;
        *gradient = hermitize(unvec(2.0 * grad_vec, system.total_dim));
    }
    return residual.squaredNorm();
}

Matrix ls_batch_gradient(const DesignSystem& system, const Matrix& rho,
                         const std::vector<int>& indices, double* objective) {
    if (indices.empty()) throw InvalidInput("ls_batch_gradient: empty batch");
    const int d = system.total_dim;
    const Vector rho_vec = vec(rho);
    // Scale by n/|batch| so the batch gradient is an unbiased estimator of
    // the full-sum least-squares gradient.
    const double scale =
        static_cast<double>(system.rows()) / static_cast<double>(indices.size());
    Vector grad_vec = Vector::Zero(d * d);
    double obj = 0.0;
    for (int idx : indices) {
        const Complex r = (system.a.row(idx) * rho_vec).value() - system.b(idx);
        obj += std::norm(r);
        grad_vec += r * system.a.row(idx).adjoint();
    }
    if (objective) *objective = scale * obj;
    return hermitize(unvec(2.0 * scale * grad_vec, d));
}

namespace {

/// Mini-batch objective/gradient pair shared by the stochastic solvers.
class StochasticObjective {
  public:
    virtual ~StochasticObjective() = default;
    virtual int dataset_size() const = 0;
    /// Batch objective at rho and its conjugate-Wirtinger gradient.
    virtual Matrix batch_gradient(const Matrix& rho, const std::vector<int>& indices,
                                  double* objective) = 0;
    virtual long long clamp_events() const { return 0; }
};

class MleObjective final : public StochasticObjective {
  public:
    MleObjective(const SampleSet& samples, const PovmFactory& factory)
        : samples_(samples), factory_(factory) {}

    int dataset_size() const override {
        return static_cast<int>(samples_.size());
    }

    Matrix batch_gradient(const Matrix& rho, const std::vector<int>& indices,
                          double* objective) override {
        const BatchPovms batch = factory_(samples_, indices);
        if (!batch.is_rank1) {
            double obj = 0.0;
            Matrix g = nll_gradient(rho, batch.dense, &obj, &clamps_);
            if (objective) *objective = obj;
            return g;
        }
        // Rank-one POVMs: Pi_j = pref c_j c_j^dag, so Tr(rho Pi_j) =
        // pref c_j^dag rho c_j and the per-element gradient is
        // -c_j c_j^dag / (c_j^dag rho c_j); the prefactor cancels.
        const Matrix& c = batch.rank1;
        const int bsz = static_cast<int>(c.cols());
        const Matrix rc = rho * c;
        RealVector q(bsz);
        long long clamped = 0;
        double acc = 0.0;
        for (int j = 0; j < bsz; ++j) {
            double qj = std::real(c.col(j).dot(rc.col(j)));
            double scaled = qj * batch.rank1_prefactor;
            if (scaled < kLogFloor) {
                scaled = kLogFloor;
                qj = kLogFloor / batch.rank1_prefactor;
                ++clamped;
            }
            acc -= std::log(scaled);
            q(j) = qj;
        }
        if (clamped == bsz)
            throw NumericFailure("ssg: every batch element hit the log floor");
        clamps_ += clamped;
        if (objective) *objective = acc / bsz;
        Matrix scaled_c = c;
        for (int j = 0; j < bsz; ++j) scaled_c.col(j) /= q(j);
        Matrix grad = -(scaled_c * c.adjoint()) / double(bsz);
        return hermitize(grad);
    }

    long long clamp_events() const override { return clamps_; }

  private:
    const SampleSet& samples_;
    const PovmFactory& factory_;
    long long clamps_ = 0;
};

class LeastSquaresRowsObjective final : public StochasticObjective {
  public:
    explicit LeastSquaresRowsObjective(const DesignSystem& system)
        : system_(system) {}

    int dataset_size() const override {
        return static_cast<int>(system_.rows());
    }

    Matrix batch_gradient(const Matrix& rho, const std::vector<int>& indices,
                          double* objective) override {
        return ls_batch_gradient(system_, rho, indices, objective);
    }

  private:
    const DesignSystem& system_;
};

SolverReport run_stochastic(StochasticObjective& objective, const SolverConfig& cfg,
                            bool accelerated, const PureState* target, int dim) {
    cfg.validate();
    const int n = objective.dataset_size();
    if (cfg.batch_size > n)
        throw InvalidInput("stochastic solver: batch_size exceeds dataset size");

    const auto t0 = clock_type::now();
    SolverReport report;
    report.config = cfg;

    Matrix rho = Matrix::Identity(dim, dim) / double(dim);

    auto fid = [&](const Matrix& m) {
        return target ? fidelity(m, target->amps) : -1.0;
    };
    report.trace.push_back({0, quiet_nan(), fid(rho), seconds_since(t0)});

    // Epoch shuffling without replacement.
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 0x734855ULL));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t cursor = 0;
    auto next_batch = [&] {
        std::vector<int> idx(cfg.batch_size);
        for (int i = 0; i < cfg.batch_size; ++i) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            idx[i] = order[cursor++];
        }
        return idx;
    };

    double eta = cfg.eta0;
    long long step_count = 0;
    for (int round = 1; round <= cfg.outer_iters; ++round) {
        // Accelerated rounds run a two-sequence scheme: the sliding sequence w
        // starts at the round anchor and takes the projected gradient steps,
        // while the reported iterate is the tau-weighted aggregate
        // rho <- (1 - 2/(tau+1)) rho + (2/(tau+1)) w, with gradients evaluated
        // at the matching blend point.
        Matrix sliding = rho;
        Matrix accum = Matrix::Zero(dim, dim);
        for (int tau = 1; tau <= cfg.inner_iters; ++tau) {
            accum += rho;
            const std::vector<int> batch = next_batch();
            double batch_obj = 0.0;
            if (accelerated) {
                const double blend = 2.0 / (tau + 1.0);
                const Matrix probe = (1.0 - blend) * rho + blend * sliding;
                const Matrix grad = objective.batch_gradient(probe, batch, &batch_obj);
                sliding = project_density(sliding - eta * grad).mat;
                rho = (1.0 - blend) * rho + blend * sliding;
            } else {
                const Matrix grad = objective.batch_gradient(rho, batch, &batch_obj);
                rho = project_density(rho - eta * grad).mat;
            }
            if (!std::isfinite(batch_obj))
                throw NumericFailure("stochastic solver: non-finite batch objective");
            ++step_count;
            report.trace.push_back({step_count, batch_obj, fid(rho), seconds_since(t0)});
        }
        rho = accum / double(cfg.inner_iters);
        eta /= 2.0;
    }

    report.rho_final = project_density(rho);  // clean roundoff from averaging
    report.clamp_events = objective.clamp_events();
    report.termination = "completed";
    report.final_fidelity = fid(report.rho_final.mat);
    report.total_seconds = seconds_since(t0);
    return report;
}

}  // namespace

SolverReport pgd_least_squares(const DesignSystem& system, const SolverConfig& config,
                               const PureState* fidelity_target, const Matrix* rho0) {
    config.validate();
    const int d = system.total_dim;
    const long long rows = system.rows();
    if (rows == 0) throw InvalidInput("pgd_least_squares: empty system");

    const auto t0 = clock_type::now();
    SolverReport report;
    report.config = config;

    // When the system is tall, fold it once into the normal equations
    // H = A^dag A, c = A^dag b: every later gradient costs O(d^4) instead of
    // O(rows d^2).
    const bool use_normal = rows >= static_cast<long long>(d) * d &&
                            static_cast<long long>(d) * d * d * d <= (1LL << 25);
    Matrix normal;       // d^2 x d^2
    Vector normal_rhs;   // A^dag b
    double b_norm2 = system.b.squaredNorm();
    if (use_normal) {
        normal.setZero(d * d, d * d);
        normal.selfadjointView<Eigen::Lower>().rankUpdate(system.a.adjoint());
        normal = Matrix(normal.selfadjointView<Eigen::Lower>());
        normal_rhs = system.a.adjoint() * system.b.cast<Complex>();
    }

    auto objective_and_grad = [&](const Matrix& rho, Matrix* grad) {
        const Vector rho_vec = vec(rho);
        double obj;
        Vector grad_vec;
        if (use_normal) {
            const Vector hv = normal * rho_vec;
            obj = std::real(rho_vec.dot(hv)) - 2.0 * std::real(normal_rhs.dot(rho_vec)) +
                  b_norm2;
            grad_vec = hv - normal_rhs;
        } else {
            Vector residual = system.a * rho_vec - system.b.cast<Complex>();
            obj = residual.squaredNorm();
            grad_vec = system.a.adjoint() * residual;
        }
        if (grad) *grad = hermitize(unvec(2.0 * grad_vec, d));
        return obj;
    };

    // sigma_max(A)^2 via power iteration; Lipschitz constant of the gradient
    // is 2 sigma_max^2.
    double sigma_sq;
    if (use_normal) {
        // H = A^dag A is PSD, so iterating H directly converges to lambda_max(H).
        sigma_sq = power_iteration_sq(
            [&](const Vector& v) { return normal * v; },
            [&](const Vector& v) { return v; }, d * d, derive_seed(config.seed, 17));
    } else {
        sigma_sq = power_iteration_sq(
            [&](const Vector& v) { return system.a * v; },
            [&](const Vector& v) { return system.a.adjoint() * v; }, d * d,
            derive_seed(config.seed, 17));
    }
    if (sigma_sq <= 0.0)
        throw NumericFailure("pgd_least_squares: could not estimate sigma_max");
    double step = 1.0 / (2.0 * sigma_sq);
    report.lipschitz_step = step;

    Matrix rho = rho0 ? *rho0 : Matrix::Identity(d, d) / double(d);
    Matrix grad;
    double obj = objective_and_grad(rho, &grad);
    auto fid = [&](const Matrix& m) {
        return fidelity_target ? fidelity(m, fidelity_target->amps) : -1.0;
    };
    report.trace.push_back({0, obj, fid(rho), seconds_since(t0)});

    // Momentum state (used when config.momentum): extrapolation point y and
    // the Nesterov weight sequence, restarted whenever the safeguard trips.
    Matrix y = rho;
    double t_momentum = 1.0;

    report.termination = "max-iterations";
    for (int k = 1; k <= config.max_iters; ++k) {
        Matrix next;
        double next_obj;
        if (config.step_rule == StepRule::Backtracking) {
            double t = step;
            while (true) {
                next = project_density(rho - t * grad).mat;
                next_obj = objective_and_grad(next, nullptr);
                const Matrix diff = next - rho;
                const double lin = std::real(vec(grad).dot(vec(diff)));
                const double quad = diff.squaredNorm() / (2.0 * t);
                if (next_obj <= obj + lin + quad + 1e-14 * std::abs(obj)) break;
                t /= 2.0;
                if (t < 1e-18)
                    throw NumericFailure("pgd_least_squares: backtracking underflow");
            }
            step = t;
        } else if (config.momentum) {
            Matrix grad_y;
            objective_and_grad(y, &grad_y);
            next = project_density(y - step * grad_y).mat;
            next_obj = objective_and_grad(next, nullptr);
            if (next_obj > obj) {
                // safeguard: plain step from the last accepted iterate,
                // momentum restarted
                next = project_density(rho - step * grad).mat;
                next_obj = objective_and_grad(next, nullptr);
                t_momentum = 1.0;
            }
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
            y = next + ((t_momentum - 1.0) / t_next) * (next - rho);
            t_momentum = t_next;
        } else {
            next = project_density(rho - step * grad).mat;
            next_obj = objective_and_grad(next, nullptr);
        }
        if (!std::isfinite(next_obj))
            throw NumericFailure("pgd_least_squares: non-finite objective");

        const double decrease = obj - next_obj;
        rho = std::move(next);
        obj = next_obj;
        objective_and_grad(rho, &grad);
        report.trace.push_back({k, obj, fid(rho), seconds_since(t0)});
        if (std::abs(decrease) <= config.rel_tol * std::max(1.0, std::abs(obj))) {
            report.termination = "converged";
            break;
        }
    }

    report.rho_final = project_density(rho);
    report.final_fidelity = fid(report.rho_final.mat);
    report.total_seconds = seconds_since(t0);
    return report;
}

SolverReport ssg_solve(const SampleSet& samples, const PovmFactory& factory,
                       const SolverConfig& config, const PureState* fidelity_target) {
    MleObjective objective(samples, factory);
    SolverReport report = run_stochastic(objective, config, /*accelerated=*/false,
                                         fidelity_target, factory.config.total_dim());
    return report;
}

SolverReport assg_r_solve(const SampleSet& samples, const PovmFactory& factory,
                          const SolverConfig& config, const PureState* fidelity_target) {
    MleObjective objective(samples, factory);
    SolverReport report = run_stochastic(objective, config, /*accelerated=*/true,
                                         fidelity_target, factory.config.total_dim());
    return report;
}

SolverReport stochastic_least_squares(const DesignSystem& system,
                                      const SolverConfig& config,
                                      const PureState* fidelity_target) {
    LeastSquaresRowsObjective objective(system);
    const bool accelerated = config.algorithm == Algorithm::AssgR;
    return run_stochastic(objective, config, accelerated, fidelity_target,
                          system.total_dim);
}

}  // namespace cvqst
