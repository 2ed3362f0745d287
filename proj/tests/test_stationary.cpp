#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "germcanop/errors.hpp"
#include "germcanop/stationary.hpp"

using namespace germcanop;

namespace {

// F(p, q) = (i/2) q^2 - p q on R^2, with analytic derivatives.
ScalarField gaussian_pair_phase() {
    return ScalarField::analytic(
        2,
        [](const Vec& x) {
            return cdouble(0.0, 0.5) * x[1] * x[1] - cdouble(x[0] * x[1], 0.0);
        },
        [](const Vec& x) {
            CVec g(2);
            g << cdouble(-x[1], 0.0), cdouble(0.0, 1.0) * x[1] - cdouble(x[0], 0.0);
            return g;
        },
        [](const Vec&) {
            CMat h(2, 2);
            h << cdouble(0.0, 0.0), cdouble(-1.0, 0.0), cdouble(-1.0, 0.0),
                cdouble(0.0, 1.0);
            return h;
        });
}

// F(p, q) = i q^2 + eps q^3 - p q.
ScalarField cubic_family(double eps) {
    return ScalarField::finite_difference(2, [eps](const Vec& x) {
        double p = x[0], q = x[1];
        return cdouble(eps * q * q * q - p * q, q * q);
    });
}

}  // namespace

TEST_CASE("Gaussian reduction is exact") {
    auto F = gaussian_pair_phase();
    auto res = complex_stationary_value(F, 1, vec1(0.0), vec1(0.0));
    for (double p : {-0.8, -0.2, 0.3, 0.9}) {
        CHECK(std::abs(res.foot.value(vec1(p))(0)) < 1e-8);
        CHECK(std::abs(res.reduced_phase(vec1(p)) - cdouble(0.0, 0.5) * p * p) < 1e-8);
        CHECK(std::abs(res.reduced_dissipation(vec1(p)) - p * p) < 1e-8);
    }
}

TEST_CASE("Gaussian reduction bounds are two-sided within a factor of two") {
    auto res = complex_stationary_value(gaussian_pair_phase(), 1, vec1(0.0), vec1(0.0));
    std::vector<Vec> pts;
    for (double p = 0.1; p <= 1.0; p += 0.1) {
        pts.push_back(vec1(p));
        pts.push_back(vec1(-p));
    }
    auto b = dissipativity_bounds(res, pts);
    CHECK(b.lower > 0.0);
    CHECK(b.upper / b.lower < 2.0);
    CHECK(std::abs(b.lower - 0.5) < 1e-6);
}

TEST_CASE("real phase with a critical manifold reduces without correction") {
    auto F = ScalarField::finite_difference(2, [](const Vec& x) {
        double r = x[1] - x[0];
        return cdouble(r * r, 0.0);
    });
    auto res = complex_stationary_value(F, 1, vec1(0.0), vec1(0.0));
    CHECK(std::abs(res.reduced_phase(vec1(0.0))) < 1e-12);
    CHECK(std::abs(res.foot.value(vec1(0.4))(0).real() - 0.4) < 1e-8);
    // No dissipation anywhere: the bounds fit has nothing to work with.
    std::vector<Vec> pts;
    for (double p = -0.5; p <= 0.5; p += 0.25) pts.push_back(vec1(p));
    CHECK_THROWS_AS(dissipativity_bounds(res, pts), InsufficientData);
}

TEST_CASE("reduction is stable in the proxy weight") {
    StationaryOptions o1, o2, o3;
    o1.mu = 0.5;
    o2.mu = 2.0;
    o3.mu = 8.0;
    auto F = cubic_family(0.2);
    auto r1 = complex_stationary_value(F, 1, vec1(0.0), vec1(0.0), o1);
    auto r2 = complex_stationary_value(F, 1, vec1(0.0), vec1(0.0), o2);
    auto r3 = complex_stationary_value(F, 1, vec1(0.0), vec1(0.0), o3);
    for (double p = -0.3; p <= 0.3; p += 0.06) {
        Vec pp = vec1(p);
        double d = r2.reduced_dissipation(pp);
        double slack = 10.0 * std::pow(d, 1.5) + 1e-12;
        CHECK(std::abs(r1.reduced_phase(pp) - r2.reduced_phase(pp)) <= slack);
        CHECK(std::abs(r3.reduced_phase(pp) - r2.reduced_phase(pp)) <= slack);
    }
}

TEST_CASE("cubic family keeps positive two-sided bounds across epsilon") {
    for (double eps : {0.0, 0.1, 0.2, 0.3}) {
        auto res = complex_stationary_value(cubic_family(eps), 1, vec1(0.0), vec1(0.0));
        std::vector<Vec> pts;
        for (double p = 0.05; p <= 0.3; p += 0.05) {
            pts.push_back(vec1(p));
            pts.push_back(vec1(-p));
        }
        auto b = dissipativity_bounds(res, pts, 1e-8);
        CHECK(b.lower > 0.0);
        CHECK(b.upper / b.lower <= 20.0);
    }
}

TEST_CASE("nonzero q-gradient at the base point is rejected") {
    auto F = ScalarField::finite_difference(2, [](const Vec& x) {
        return cdouble(x[1], x[1] * x[1]);
    });
    CHECK_THROWS_AS(complex_stationary_value(F, 1, vec1(0.0), vec1(0.0)), InvalidInput);
}

TEST_CASE("inverse Hessian blocks satisfy the splitting identities") {
    auto F = cubic_family(0.2);
    for (double q : {-0.3, 0.0, 0.4}) {
        auto m = appendix_matrices(F, 1, vec2(0.1, q));
        Mat id = m.a * m.e1 - m.b * m.e2;
        Mat zero = m.b * m.e1 + m.a * m.e2;
        CHECK((id - Mat::Identity(1, 1)).norm() < 1e-8);
        CHECK(zero.norm() < 1e-8);
    }
}

TEST_CASE("imaginary part of the inverse Hessian is negative semidefinite") {
    // 2x2 q-block with positive imaginary part.
    auto F = ScalarField::finite_difference(3, [](const Vec& x) {
        double p = x[0], q1 = x[1], q2 = x[2];
        cdouble v = cdouble(0.0, 1.0) * (q1 * q1 + 0.5 * q2 * q2 + 0.4 * q1 * q2);
        v += 0.3 * q1 * q2 + 0.1 * q1 * q1 - p * (q1 + q2);
        return v;
    });
    auto m = appendix_matrices(F, 1, Eigen::Vector3d(0.0, 0.0, 0.0));
    std::mt19937 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        Vec xi(2);
        xi << g(rng), g(rng);
        CHECK(xi.dot(m.b * xi) <= 1e-10);
    }
}
