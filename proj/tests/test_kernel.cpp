#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "graphon/kernel.hpp"
#include "test_support.hpp"

using namespace graphon;
using Catch::Matchers::WithinAbs;
using testsupport::Rng;

namespace {

const std::vector<std::vector<double>> signed_block{{1.0, -1.0}, {-1.0, 1.0}};

Eigen::MatrixXd to_eigen(const Kernel& k) {
    const auto m = static_cast<Eigen::Index>(k.resolution());
    Eigen::MatrixXd M(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) M(i, j) = k.cell(i, j);
    return M;
}

}  // namespace

TEST_CASE("evaluate: constant and block lookup", "[kernel]") {
    const Kernel c = constant_kernel(0.5);
    CHECK(c.evaluate(0.3, 0.7) == 0.5);

    const Kernel b = block_kernel(signed_block);
    CHECK(b.evaluate(0.25, 0.75) == -1.0);
    CHECK(b.evaluate(0.25, 0.25) == 1.0);
    CHECK(b.evaluate(0.0, 0.5) == 1.0);  // x = 0 maps to the first cell

    CHECK_THROWS_AS(b.evaluate(1.2, 0.5), std::domain_error);
    CHECK_THROWS_AS(b.evaluate(0.5, -0.1), std::domain_error);
}

TEST_CASE("evaluate: symmetry for registry kernels", "[kernel]") {
    Rng rng(11);
    const Kernel kernels[] = {block_kernel({{0.8, -0.6}, {-0.6, 0.8}}),
                              product_kernel(), polarized_kernel(0.9)};
    for (const auto& k : kernels)
        for (int t = 0; t < 50; ++t) {
            const double x = rng.uniform(), y = rng.uniform();
            CHECK(k.evaluate(x, y) == k.evaluate(y, x));
        }
}

TEST_CASE("grid construction symmetrizes bitwise", "[kernel]") {
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v(49);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        const Kernel k = Kernel::grid(v, 7);
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j) CHECK(k.cell(i, j) == k.cell(j, i));
    }
    CHECK_THROWS_AS(Kernel::grid({1.5}, 1), std::invalid_argument);
    CHECK_NOTHROW(Kernel::grid({1.5}, 1, 1.0, /*allow_unbounded=*/true));
}

TEST_CASE("split_parts: sign split and reconstruction", "[kernel]") {
    const Kernel w = constant_kernel(-0.4);
    const auto parts = split_parts(w);
    CHECK(parts.pos.evaluate(0.2, 0.8) == 0.0);
    CHECK(parts.neg.evaluate(0.2, 0.8) == 0.4);
    CHECK(parts.abs.evaluate(0.2, 0.8) == 0.4);

    const auto nn = split_parts(constant_kernel(0.7));
    CHECK(nn.neg.evaluate(0.1, 0.1) == 0.0);
    CHECK(nn.abs.evaluate(0.1, 0.1) == 0.7);

    const auto blocks = split_parts(block_kernel(signed_block));
    for (double x : {0.25, 0.75})
        for (double y : {0.25, 0.75}) CHECK(blocks.abs.evaluate(x, y) == 1.0);

    // max(w,0) - max(-w,0) == w exactly in IEEE arithmetic
    Rng rng(13);
    const Kernel k = testsupport::random_signed_kernel(20, rng);
    const auto p = split_parts(k);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j)
            CHECK(p.pos.cell(i, j) - p.neg.cell(i, j) == k.cell(i, j));
}

TEST_CASE("degree_profile: constants, product kernel, signed blocks", "[kernel]") {
    for (std::size_t m : {1u, 7u, 100u}) {
        const auto d = degree_profile(constant_kernel(0.3), m);
        CHECK_THAT(d.sup, WithinAbs(0.3, 1e-15));
        CHECK_THAT(d.l1, WithinAbs(0.3, 1e-15));
    }

    // d_W(x) = x/2 for W(x,y) = xy
    const auto d = degree_profile(product_kernel(), 1000);
    CHECK_THAT(d.sup, WithinAbs(0.5, 1e-3));
    CHECK_THAT(d.l1, WithinAbs(0.25, 1e-3));

    const auto ab = degree_profile(split_parts(block_kernel(signed_block)).abs, 10);
    CHECK_THAT(ab.sup, WithinAbs(1.0, 1e-15));
    CHECK_THAT(ab.l1, WithinAbs(1.0, 1e-15));

    // polarized: d_{|W|} is constant 2a/pi
    const auto pol = degree_profile(split_parts(polarized_kernel(0.9)).abs, 500);
    for (double v : pol.values) CHECK_THAT(v, WithinAbs(2 * 0.9 / std::numbers::pi, 1e-4));

    CHECK_THROWS_AS(degree_profile(product_kernel(), 0), std::invalid_argument);
}

TEST_CASE("degree_profile: exact row means for grid kernels", "[kernel]") {
    Rng rng(14);
    const Kernel k = testsupport::random_signed_kernel(6, rng).with_scale(3.0);
    const auto d = degree_profile(k, 12);
    for (std::size_t i = 0; i < 6; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < 6; ++j) mean += k.cell(i, j);
        mean = 3.0 * mean / 6.0;
        CHECK(d.values[2 * i] == mean);
        CHECK(d.values[2 * i + 1] == mean);
    }
}

TEST_CASE("discretize: midpoints, idempotence, frozen xy matrix", "[kernel]") {
    const Kernel c = discretize(constant_kernel(0.25), 8);
    for (double v : c.cells()) CHECK(v == 0.25);

    Rng rng(15);
    const Kernel g = testsupport::random_signed_kernel(9, rng);
    const Kernel g2 = discretize(g, 9);
    CHECK(g2.cells() == g.cells());

    // midpoints 0.25, 0.75: [[1/16, 3/16], [3/16, 9/16]]
    const Kernel xy = discretize(product_kernel(), 2);
    CHECK_THAT(xy.cell(0, 0), WithinAbs(1.0 / 16, 1e-15));
    CHECK_THAT(xy.cell(0, 1), WithinAbs(3.0 / 16, 1e-15));
    CHECK_THAT(xy.cell(1, 0), WithinAbs(3.0 / 16, 1e-15));
    CHECK_THAT(xy.cell(1, 1), WithinAbs(9.0 / 16, 1e-15));

    // cell averaging agrees with midpoint sampling up to curvature terms
    const Kernel avg = discretize(polarized_kernel(0.5), 16, DiscretizeMode::cell_average, 4);
    const Kernel mid = discretize(polarized_kernel(0.5), 16);
    for (std::size_t i = 0; i < avg.cells().size(); ++i)
        CHECK_THAT(avg.cells()[i], WithinAbs(mid.cells()[i], 5e-3));
}

TEST_CASE("apply_operator: averaging, zero kernel, xy oracle", "[kernel]") {
    const Kernel ones = discretize(constant_kernel(1.0), 50);
    const std::vector<double> c(50, 3.25);
    const auto out = apply_operator(ones, c);
    for (double v : out) CHECK_THAT(v, WithinAbs(3.25, 1e-12));

    const Kernel zero = discretize(constant_kernel(0.0), 10);
    for (double v : apply_operator(zero, std::vector<double>(10, 1.0))) CHECK(v == 0.0);

    // (T_W f)(x) = x/3 for W = xy, f = id
    const std::size_t m = 1000;
    const Kernel xy = discretize(product_kernel(), m);
    std::vector<double> f(m);
    for (std::size_t i = 0; i < m; ++i) f[i] = cell_midpoint(i, m);
    const auto tf = apply_operator(xy, f);
    double dev = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        dev = std::max(dev, std::abs(tf[i] - cell_midpoint(i, m) / 3.0));
    CHECK(dev < 1e-3);

    CHECK_THROWS_AS(apply_operator(xy, std::vector<double>(m + 1, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_operator(product_kernel(), std::vector<double>(3, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("operator_norm: constant exact, xy 1/3, eigen cross-check", "[kernel]") {
    CHECK_THAT(operator_norm(constant_kernel(0.37)), WithinAbs(0.37, 1e-10));
    CHECK_THAT(operator_norm(discretize(constant_kernel(-0.5), 64)),
               WithinAbs(0.5, 1e-10));
    CHECK(operator_norm(discretize(constant_kernel(0.0), 16)) == 0.0);

    CHECK_THAT(operator_norm(discretize(product_kernel(), 2000)),
               WithinAbs(1.0 / 3.0, 1e-3));

    CHECK_THROWS_AS(operator_norm(product_kernel()), std::invalid_argument);

    // independent oracle: dense symmetric eigensolver
    Rng rng(16);
    for (int t = 0; t < 20; ++t) {
        const Kernel k = testsupport::random_signed_kernel(40, rng);
        const Eigen::VectorXd ev =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(to_eigen(k) / 40.0)
                .eigenvalues();
        const double want = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
        double got = 0.0;
        bool converged = true;
        try {
            got = operator_norm(k);
        } catch (const numeric_error& e) {
            converged = false;
            got = e.payload();
        }
        if (converged) {
            CHECK_THAT(got, WithinAbs(want, 1e-7));
        } else {
            // near-tied +-lambda pair: the carried estimate errs low by at
            // most the order of the relative gap
            CHECK(got <= want + 1e-12);
            CHECK(got >= 0.98 * want);
        }
    }
}

TEST_CASE("operator_norm <= sqrt(L1 norm) on random kernels", "[kernel]") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        const Kernel k = testsupport::random_signed_kernel(100, rng);
        const double l1 = degree_profile(split_parts(k).abs, 100).l1;
        CHECK(operator_norm_estimate(k) <= std::sqrt(l1) + 2e-3);
    }
}

TEST_CASE("quadratic form bounded by twice the sup degree", "[kernel]") {
    Rng rng(18);
    const std::size_t m = 200;
    for (int t = 0; t < 100; ++t) {
        const Kernel k = testsupport::random_signed_kernel(m, rng);
        const auto f = testsupport::random_vector(m, rng);
        const auto d = degree_profile(k, m);
        double qf = 0.0, f2 = 0.0;
        const auto tf = apply_operator(k, f);
        for (std::size_t i = 0; i < m; ++i) {
            qf += f[i] * d.values[i] * f[i] - f[i] * tf[i];
            f2 += f[i] * f[i];
        }
        qf /= static_cast<double>(m);
        f2 /= static_cast<double>(m);
        const double dsup = degree_profile(split_parts(k).abs, m).sup;
        CHECK(std::abs(qf) <= 2.0 * dsup * f2 + 1e-12);
    }
}

TEST_CASE("Laplacian spectrum within [0, 2 sup degree]", "[kernel]") {
    Rng rng(19);
    for (int t = 0; t < 50; ++t) {
        const Kernel k = testsupport::random_nonnegative_kernel(100, rng);
        const auto d = degree_profile(k, 100);
        Eigen::MatrixXd L = -to_eigen(k) / 100.0;
        for (Eigen::Index i = 0; i < 100; ++i) L(i, i) += d.values[i];
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(L).eigenvalues();
        CHECK(ev.minCoeff() >= -1e-9);
        CHECK(ev.maxCoeff() <= 2.0 * d.sup + 1e-9);
    }
}

TEST_CASE("kernel_difference: zero, scales folded, refinement rule", "[kernel]") {
    const Kernel b = block_kernel({{0.8, -0.6}, {-0.6, 0.8}});
    const Kernel zero = kernel_difference(b, b, 8);
    for (double v : zero.cells()) CHECK(v == 0.0);
    CHECK(operator_norm(zero) == 0.0);

    // a = 1 (scale 1), b = 1 (scale 2) -> difference -1, norm 1
    const Kernel ones = constant_kernel(1.0);
    const Kernel diff = kernel_difference(ones, ones.with_scale(2.0), 4);
    for (double v : diff.cells()) CHECK(v == -1.0);
    CHECK_THAT(operator_norm(diff), WithinAbs(1.0, 1e-10));

    CHECK_THROWS_AS(kernel_difference(b, discretize(product_kernel(), 3), 8),
                    std::invalid_argument);

    // a vs its own discretization shrinks as m grows for continuous W
    const Kernel pol = polarized_kernel(0.8);
    const double coarse = operator_norm(kernel_difference(pol, discretize(pol, 8), 64));
    const double fine = operator_norm(kernel_difference(pol, discretize(pol, 64), 64));
    CHECK(fine < coarse);
    CHECK(fine < 0.02);
}

TEST_CASE("grid_file kernel round trip and validation", "[kernel]") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "graphon_kernel_test";
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "ok.csv");
        os << "0.5,-0.25\n-0.25,1.0\n";
    }
    const Kernel k = grid_file_kernel((dir / "ok.csv").string());
    CHECK(k.resolution() == 2);
    CHECK(k.evaluate(0.25, 0.75) == -0.25);
    {
        std::ofstream os(dir / "asym.csv");
        os << "0.5,0.3\n0.1,1.0\n";
    }
    CHECK_THROWS_AS(grid_file_kernel((dir / "asym.csv").string()), std::invalid_argument);
    CHECK_THROWS_AS(grid_file_kernel((dir / "missing.csv").string()), std::invalid_argument);
}
