#include "doctest.h"

#include <cmath>

#include "cvqst/fock.hpp"
#include "cvqst/truncation.hpp"

using namespace cvqst;

namespace {
double max_abs_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff();
}
}  // namespace

TEST_CASE("annihilation ladder entries") {
    const Matrix a2 = annihilation(2);
    CHECK(a2(0, 0) == Complex(0.0));
    CHECK(a2(0, 1) == Complex(1.0));
    CHECK(a2(1, 0) == Complex(0.0));
    CHECK(a2(1, 1) == Complex(0.0));

    // direct evaluation of <n-1|a|n> = sqrt(n)
    const Matrix a3 = annihilation(3);
    CHECK(std::abs(a3(0, 1) - 1.0) < 1e-15);
    CHECK(std::abs(a3(1, 2) - std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(a3(1, 0)) == 0.0);

    const Matrix num = creation(4) * annihilation(4);
    CHECK(max_abs_diff(num, number_operator(4)) < 1e-14);

    CHECK_THROWS_AS(annihilation(1), InvalidDimension);
}

TEST_CASE("truncated commutator [a, a^dag]") {
    for (int dim : {2, 5, 17}) {
        const Matrix a = annihilation(dim);
        const Matrix comm = a * a.adjoint() - a.adjoint() * a;
        Matrix expected = Matrix::Identity(dim, dim);
        expected(dim - 1, dim - 1) = -double(dim - 1);
        CHECK(max_abs_diff(comm, expected) < 1e-12);
    }
}

TEST_CASE("parity operator") {
    const Matrix p2 = parity(2);
    CHECK(p2(0, 0) == Complex(1.0));
    CHECK(p2(1, 1) == Complex(-1.0));

    for (int dim : {1, 4, 9}) {
        const Matrix p = parity(dim);
        CHECK(max_abs_diff(p * p, Matrix::Identity(dim, dim)) == 0.0);
    }
    CHECK(std::abs(parity(4).trace()) == 0.0);  // alternating-sign sum
}

TEST_CASE("analytic coherent state") {
    const PureState vac = coherent_analytic(0.0, 8);
    CHECK(std::abs(vac.amps(0) - 1.0) < 1e-15);
    CHECK(vac.amps.tail(7).norm() == 0.0);

    // overlap oracle: |<alpha|beta>|^2 = exp(-|alpha-beta|^2)
    const PureState a = coherent_analytic(2.0, 40);
    const PureState b = coherent_analytic(1.0, 40);
    const double overlap = std::norm(a.amps.dot(b.amps));
    CHECK(overlap == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));

    CHECK(a.truncation_weight >= 1.0 - 1e-10);
    CHECK(a.amps.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coherent state via displacement operator") {
    const PureState vac = coherent_via_displacement(0.0, 10);
    CHECK(std::abs(vac.amps(0) - 1.0) < 1e-12);

    const PureState op = coherent_via_displacement(2.0, 40);
    const PureState an = coherent_analytic(2.0, 40);
    CHECK((op.amps - an.amps).cwiseAbs().maxCoeff() < 1e-6);

    // deliberate under-truncation: the two constructions must disagree
    const PureState op_small = coherent_via_displacement(2.0, 6);
    const PureState an_small = coherent_analytic(2.0, 6);
    CHECK((op_small.amps - an_small.amps).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("kronecker products") {
    const Matrix i2 = Matrix::Identity(2, 2);
    CHECK(max_abs_diff(kron(i2, i2), Matrix::Identity(4, 4)) == 0.0);

    const Matrix pp = kron(parity(2), parity(2));
    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 0) = 1.0;
    expected(1, 1) = -1.0;
    expected(2, 2) = -1.0;
    expected(3, 3) = 1.0;
    CHECK(max_abs_diff(pp, expected) == 0.0);

    // explicit 4x4 multiplication oracle
    const Matrix a = annihilation(2);
    const Matrix lhs = kron(a, i2) * kron(i2, a);
    CHECK(max_abs_diff(lhs, kron(a, a)) < 1e-15);

    // associativity
    const Matrix b = creation(3);
    const Matrix c = parity(2);
    CHECK(max_abs_diff(kron(kron(a, b), c), kron(a, kron(b, c))) < 1e-12);

    CHECK(max_abs_diff(kron_all({a, b, c}), kron(a, kron(b, c))) == 0.0);
}

TEST_CASE("fidelity with pure targets") {
    const PureState psi = coherent_analytic(Complex(0.3, -0.7), 12);
    const Matrix proj = psi.amps * psi.amps.adjoint();
    CHECK(fidelity(DensityMatrix::from(proj), psi) == doctest::Approx(1.0).epsilon(1e-12));

    const int d = 12;
    const DensityMatrix mixed = DensityMatrix::from(Matrix::Identity(d, d) / double(d));
    CHECK(fidelity(mixed, psi) == doctest::Approx(1.0 / d).epsilon(1e-12));

    PureState zero, one;
    zero.amps = Vector::Zero(4);
    zero.amps(0) = 1.0;
    one.amps = Vector::Zero(4);
    one.amps(1) = 1.0;
    const Matrix pzero = zero.amps * zero.amps.adjoint();
    CHECK(fidelity(DensityMatrix::from(pzero), one) == 0.0);

    // global-phase invariance of the target
    PureState phased = psi;
    phased.amps *= std::exp(Complex(0.0, 1.234));
    CHECK(fidelity(DensityMatrix::from(proj), phased) ==
          doctest::Approx(1.0).epsilon(1e-12));

    Matrix wrong = Matrix::Identity(5, 5) / 5.0;
    CHECK_THROWS_AS(fidelity(wrong, psi.amps), InvalidDimension);
}

TEST_CASE("cat state structure") {
    const PureState cat = cat_state(2.0, 40);
    CHECK(cat.amps.norm() == doctest::Approx(1.0).epsilon(1e-12));
    double odd_population = 0.0;
    for (int n = 1; n < 40; n += 2) odd_population += std::norm(cat.amps(n));
    CHECK(odd_population < 1e-20);

    CHECK_THROWS_AS(cat_state(2.0, 5), InvalidDimension);
}

TEST_CASE("binomial logical states and Bell state") {
    const PureState zero = binomial_logical_zero(5);
    CHECK(zero.amps(0).real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(zero.amps(4).real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    const PureState one = binomial_logical_one(5);
    CHECK(one.amps(2).real() == doctest::Approx(1.0));
    CHECK_THROWS_AS(binomial_logical_zero(4), InvalidDimension);

    const PureState bell = logical_bell(5);
    REQUIRE(bell.dim() == 25);
    // non-zero amplitudes 1/2 at |0,2>, |4,2>, |2,0>, |2,4>
    auto idx = [](int i, int j) { return i * 5 + j; };
    for (int k = 0; k < 25; ++k) {
        const double expected =
            (k == idx(0, 2) || k == idx(4, 2) || k == idx(2, 0) || k == idx(2, 4))
                ? 0.5
                : 0.0;
        CHECK(std::abs(bell.amps(k) - Complex(expected)) < 1e-14);
    }
}

TEST_CASE("w state") {
    const PureState w = w_state(4);
    REQUIRE(w.dim() == 16);
    for (int k = 0; k < 16; ++k) {
        const bool single_excitation = (k == 1 || k == 2 || k == 4 || k == 8);
        CHECK(std::abs(w.amps(k) - Complex(single_excitation ? 0.5 : 0.0)) < 1e-14);
    }
    CHECK_THROWS_AS(w_state(1), InvalidDimension);
}

TEST_CASE("thermal state") {
    const DensityMatrix vac = thermal_state(0.0, 8);
    CHECK(std::abs(vac.mat(0, 0) - 1.0) == 0.0);
    CHECK(vac.mat.cwiseAbs().sum() == doctest::Approx(1.0));

    const int dim = 64;
    const DensityMatrix th = thermal_state(1.0, dim);
    const double mean_n = std::real((th.mat * number_operator(dim)).trace());
    CHECK(mean_n == doctest::Approx(1.0).epsilon(1e-6));

    const DensityMatrix th4 = thermal_state(4.0, 40);
    CHECK(std::abs(th4.mat.trace() - Complex(1.0)) < 1e-14);
    // geometric tail oracle: sum_{n<40} (1/5)(4/5)^n
    double tail_weight = 0.0, p = 1.0 / 5.0;
    for (int n = 0; n < 40; ++n, p *= 4.0 / 5.0) tail_weight += p;
    CHECK(thermal_weight(4.0, 40) == doctest::Approx(tail_weight).epsilon(1e-12));
    CHECK(thermal_weight(4.0, 40) >= 0.999);

    CHECK_THROWS_AS(thermal_state(-0.5, 8), InvalidParameter);
}

TEST_CASE("density matrix invariants on constructors") {
    std::string why;
    CHECK(thermal_state(2.5, 30).is_physical(&why));
    const PureState cat = cat_state(Complex(1.0, 1.0), 40);
    CHECK(DensityMatrix::from(cat.amps * cat.amps.adjoint()).is_physical(&why));

    Matrix bad = Matrix::Identity(3, 3);
    CHECK_THROWS_AS(DensityMatrix::from(bad), InvalidParameter);  // trace 3

    Matrix negative = Matrix::Zero(2, 2);
    negative(0, 0) = 1.5;
    negative(1, 1) = -0.5;
    CHECK_THROWS_AS(DensityMatrix::from(negative), InvalidParameter);
}

TEST_CASE("hilbert config validation") {
    HilbertConfig ok{{5, 5}, 40};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.total_dim() == 25);

    HilbertConfig small_mode{{1, 5}, 40};
    CHECK_THROWS_AS(small_mode.validate(), InvalidDimension);

    HilbertConfig low_compute{{5, 5}, 4};
    CHECK_THROWS_AS(low_compute.validate(), InvalidDimension);

    HilbertConfig huge{{2, 2}, 2};
    huge.max_matrix_entries = 8;  // 4^2 = 16 entries exceeds the cap
    CHECK_THROWS_AS(huge.validate(), InvalidDimension);
}
