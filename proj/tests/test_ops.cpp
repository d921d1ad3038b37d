#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "krst/ops.hpp"
#include "krst/rng.hpp"

using namespace krst;

namespace {

// Central-difference gradient of a scalar-valued expression with respect to
// one leaf, computed entirely outside the autodiff machinery.
std::vector<double> fd_grad(const std::function<double(const std::vector<double>&)>& f,
                            std::vector<double> x, double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + eps;
        double hi = f(x);
        x[i] = keep - eps;
        double lo = f(x);
        x[i] = keep;
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

void check_close(const std::vector<double>& got, const std::vector<double>& want,
                 double tol = 1e-6) {
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
        double denom = std::max({1.0, std::fabs(got[i]), std::fabs(want[i])});
        CHECK(std::fabs(got[i] - want[i]) / denom <= tol);
    }
}

}  // namespace

TEST_CASE("matmul forward oracle") {
    Tensor a = Tensor::from_data({1, 2}, {1.0, 2.0});
    Tensor b = Tensor::from_data({2, 1}, {3.0, 4.0});
    Tensor c = matmul(a, b);
    CHECK(c.rows() == 1);
    CHECK(c.cols() == 1);
    CHECK(c.at(0, 0) == doctest::Approx(11.0).epsilon(1e-14));
}

TEST_CASE("matmul backward oracle") {
    Tensor a = Tensor::param({1, 2}, {1.0, 2.0});
    Tensor b = Tensor::param({2, 1}, {3.0, 4.0});
    element(matmul(a, b), 0, 0).backward();
    check_close(a.grad(), {3.0, 4.0}, 1e-14);
    check_close(b.grad(), {1.0, 2.0}, 1e-14);
}

TEST_CASE("matmul rejects inner mismatch") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(matmul(a, b), DimError);
}

TEST_CASE("matmul_nt matches matmul against the transpose") {
    std::mt19937_64 rng(7);
    Tensor a = Tensor::from_data({3, 4}, uniform_vector(rng, 12, -1.0, 1.0));
    Tensor b = Tensor::from_data({5, 4}, uniform_vector(rng, 20, -1.0, 1.0));
    Tensor direct = matmul_nt(a, b);
    Tensor ref = matmul(a, transpose(b));
    check_close(direct.value(), ref.value(), 1e-13);
}

TEST_CASE("transpose forward") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor t = transpose(x);
    CHECK(t.rows() == 3);
    CHECK(t.cols() == 2);
    CHECK(t.at(0, 1) == 4.0);
    CHECK(t.at(2, 0) == 3.0);
}

TEST_CASE("softmax oracle quarters") {
    double ln3 = std::log(3.0);
    Tensor x = Tensor::from_data({1, 2}, {0.0, ln3});
    Tensor y = softmax(x, 1);
    CHECK(y.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(y.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and order is preserved") {
    std::mt19937_64 rng(11);
    Tensor x = Tensor::from_data({4, 6}, uniform_vector(rng, 24, -30.0, 30.0));
    Tensor y = softmax(x, 1);
    for (long r = 0; r < 4; ++r) {
        double s = 0.0;
        for (long c = 0; c < 6; ++c) {
            s += y.at(r, c);
            CHECK(y.at(r, c) > 0.0);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax axis 0 normalizes columns") {
    Tensor x = Tensor::from_data({2, 2}, {0.0, 1.0, 0.0, 3.0});
    Tensor y = softmax(x, 0);
    CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.at(0, 1) + y.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax survives large magnitudes") {
    Tensor x = Tensor::from_data({1, 3}, {1000.0, 1000.0, -1000.0});
    Tensor y = softmax(x, 1);
    CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.at(0, 2) >= 0.0);
}

TEST_CASE("softmax rejects non-finite input") {
    Tensor x = Tensor::from_data({1, 2}, {std::nan(""), 0.0});
    CHECK_THROWS_AS(softmax(x, 1), NumericError);
}

TEST_CASE("log_softmax oracle") {
    double ln3 = std::log(3.0);
    Tensor x = Tensor::from_data({1, 2}, {0.0, ln3});
    Tensor y = log_softmax(x, 1);
    CHECK(y.at(0, 0) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
    CHECK(y.at(0, 1) == doctest::Approx(std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("log_softmax agrees with log of softmax") {
    std::mt19937_64 rng(13);
    Tensor x = Tensor::from_data({3, 5}, uniform_vector(rng, 15, -5.0, 5.0));
    Tensor a = log_softmax(x, 1);
    Tensor b = softmax(x, 1);
    for (size_t i = 0; i < a.value().size(); ++i)
        CHECK(std::exp(a.value()[i]) == doctest::Approx(b.value()[i]).epsilon(1e-12));
}

TEST_CASE("sigmoid saturation stays finite and positive") {
    Tensor lo = sigmoid(Tensor::from_data({1, 1}, {-50.0}));
    CHECK(lo.at(0, 0) > 0.0);
    CHECK(lo.at(0, 0) <= 1e-20);
    Tensor hi = sigmoid(Tensor::from_data({1, 1}, {50.0}));
    CHECK(hi.at(0, 0) <= 1.0);
    CHECK(1.0 - hi.at(0, 0) <= 1e-20);
    CHECK(sigmoid(Tensor::from_data({1, 1}, {0.0})).at(0, 0) == 0.5);
}

TEST_CASE("relu forward and gradient routing") {
    Tensor x = Tensor::param({1, 3}, {-1.0, 0.0, 2.0});
    Tensor y = relu(x);
    check_close(y.value(), {0.0, 0.0, 2.0}, 1e-14);
    reduce_all(y, Reduce::Sum).backward();
    check_close(x.grad(), {0.0, 0.0, 1.0}, 1e-14);
}

TEST_CASE("tanh oracle") {
    Tensor y = tanh_t(Tensor::from_data({1, 1}, {0.5}));
    CHECK(y.at(0, 0) == doctest::Approx(0.46211715726000974).epsilon(1e-14));
}

TEST_CASE("reduce max ties break to the lowest index") {
    Tensor x = Tensor::param({2, 3}, {1.0, 3.0, 2.0, 5.0, 5.0, 4.0});
    Tensor m = reduce(x, 1, Reduce::Max, true);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 1);
    CHECK(m.at(0, 0) == 3.0);
    CHECK(m.at(1, 0) == 5.0);
    reduce_all(m, Reduce::Sum).backward();
    check_close(x.grad(), {0.0, 1.0, 0.0, 1.0, 0.0, 0.0}, 1e-14);
}

TEST_CASE("reduce sum and mean along both axes") {
    Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor s0 = reduce(x, 0, Reduce::Sum);
    CHECK(s0.rank() == 1);
    CHECK(s0.shape()[0] == 2);
    check_close(s0.value(), {4.0, 6.0}, 1e-14);
    Tensor m1 = reduce(x, 1, Reduce::Mean);
    check_close(m1.value(), {1.5, 3.5}, 1e-14);
    Tensor k = reduce(x, 0, Reduce::Sum, true);
    CHECK(k.rows() == 1);
    CHECK(k.cols() == 2);
}

TEST_CASE("reduce_all") {
    Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(reduce_all(x, Reduce::Sum).item() == 10.0);
    CHECK(reduce_all(x, Reduce::Max).item() == 4.0);
    CHECK(reduce_all(x, Reduce::Mean).item() == 2.5);
}

TEST_CASE("concat along both axes") {
    Tensor a = Tensor::from_data({1, 2}, {1.0, 2.0});
    Tensor b = Tensor::from_data({1, 2}, {3.0, 4.0});
    Tensor rows = concat(a, b, 0);
    CHECK(rows.rows() == 2);
    check_close(rows.value(), {1.0, 2.0, 3.0, 4.0}, 1e-14);
    Tensor cols = concat(a, b, 1);
    CHECK(cols.cols() == 4);
    check_close(cols.value(), {1.0, 2.0, 3.0, 4.0}, 1e-14);
}

TEST_CASE("concat neutral element") {
    Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor e = Tensor::zeros({2, 0});
    Tensor y = concat(x, e, 1);
    CHECK(y.rows() == 2);
    CHECK(y.cols() == 2);
    check_close(y.value(), x.value(), 1e-14);
    Tensor z = concat(Tensor::zeros({0, 2}), x, 0);
    check_close(z.value(), x.value(), 1e-14);
}

TEST_CASE("concat rejects mismatched off-axis extents") {
    CHECK_THROWS_AS(concat(Tensor::zeros({2, 2}), Tensor::zeros({3, 2}), 1), DimError);
    CHECK_THROWS_AS(concat(Tensor::zeros({2, 2}), Tensor::zeros({2, 3}), 0), DimError);
}

TEST_CASE("concat backward splits the gradient") {
    Tensor a = Tensor::param({1, 2}, {1.0, 2.0});
    Tensor b = Tensor::param({1, 1}, {3.0});
    Tensor y = concat(a, b, 1);
    Tensor w = Tensor::from_data({1, 3}, {10.0, 20.0, 30.0});
    reduce_all(mul(y, w), Reduce::Sum).backward();
    check_close(a.grad(), {10.0, 20.0}, 1e-14);
    check_close(b.grad(), {30.0}, 1e-14);
}

TEST_CASE("vstack") {
    std::vector<Tensor> parts = {Tensor::from_data({1, 2}, {1.0, 2.0}),
                                 Tensor::from_data({2, 2}, {3.0, 4.0, 5.0, 6.0})};
    Tensor y = vstack(parts);
    CHECK(y.rows() == 3);
    check_close(y.value(), {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, 1e-14);
}

TEST_CASE("gather_rows duplicates accumulate gradient") {
    Tensor x = Tensor::param({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor y = gather_rows(x, {1, 1, 0});
    CHECK(y.rows() == 3);
    check_close(y.value(), {3.0, 4.0, 3.0, 4.0, 1.0, 2.0}, 1e-14);
    reduce_all(y, Reduce::Sum).backward();
    check_close(x.grad(), {1.0, 1.0, 2.0, 2.0}, 1e-14);
    CHECK_THROWS_AS(gather_rows(x, {2}), DimError);
}

TEST_CASE("row_range and col_range") {
    Tensor x = Tensor::from_data({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor r = row_range(x, 1, 3);
    check_close(r.value(), {4, 5, 6, 7, 8, 9}, 1e-14);
    Tensor c = col_range(x, 0, 2);
    check_close(c.value(), {1, 2, 4, 5, 7, 8}, 1e-14);
    CHECK_THROWS_AS(row_range(x, 2, 1), DimError);
    CHECK_THROWS_AS(col_range(x, 0, 4), DimError);
}

TEST_CASE("repeat_rows interleaving") {
    Tensor x = Tensor::param({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor y = repeat_rows(x, 2);
    CHECK(y.rows() == 4);
    check_close(y.value(), {1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0}, 1e-14);
    reduce_all(y, Reduce::Sum).backward();
    check_close(x.grad(), {2.0, 2.0, 2.0, 2.0}, 1e-14);
}

TEST_CASE("reshape keeps row-major order") {
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor y = reshape(x, {3, 2});
    CHECK(y.at(1, 0) == 3.0);
    CHECK(y.at(2, 1) == 6.0);
    CHECK_THROWS_AS(reshape(x, {4, 2}), DimError);
}

TEST_CASE("add_rowvec broadcast") {
    Tensor x = Tensor::param({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor b = Tensor::param({1, 2}, {10.0, 20.0});
    Tensor y = add_rowvec(x, b);
    check_close(y.value(), {11.0, 22.0, 13.0, 24.0}, 1e-14);
    reduce_all(y, Reduce::Sum).backward();
    check_close(b.grad(), {2.0, 2.0}, 1e-14);
}

TEST_CASE("scale_rows") {
    Tensor x = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor s = Tensor::from_data({2, 1}, {2.0, 3.0});
    Tensor y = scale_rows(x, s);
    check_close(y.value(), {2.0, 4.0, 9.0, 12.0}, 1e-14);
}

TEST_CASE("elementwise arithmetic oracles") {
    Tensor a = Tensor::from_data({1, 3}, {1.0, 2.0, 3.0});
    Tensor b = Tensor::from_data({1, 3}, {4.0, 5.0, 6.0});
    check_close(add(a, b).value(), {5.0, 7.0, 9.0}, 1e-14);
    check_close(sub(a, b).value(), {-3.0, -3.0, -3.0}, 1e-14);
    check_close(mul(a, b).value(), {4.0, 10.0, 18.0}, 1e-14);
    check_close(scale(a, -2.0).value(), {-2.0, -4.0, -6.0}, 1e-14);
    check_close(add_const(a, 0.5).value(), {1.5, 2.5, 3.5}, 1e-14);
    CHECK_THROWS_AS(add(a, Tensor::zeros({1, 2})), DimError);
}

TEST_CASE("affine oracle") {
    Tensor x = Tensor::from_data({1, 2}, {1.0, 2.0});
    Tensor W = Tensor::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor b = Tensor::from_data({1, 2}, {0.5, -0.5});
    Tensor y = affine(x, W, b);
    check_close(y.value(), {5.5, 10.5}, 1e-14);
}

TEST_CASE("mlp2 oracle") {
    Tensor x = Tensor::from_data({1, 2}, {2.0, 3.0});
    Tensor W1 = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, -1.0});
    Tensor b1 = Tensor::zeros({1, 2});
    Tensor W2 = Tensor::from_data({1, 2}, {1.0, 1.0});
    Tensor b2 = Tensor::from_data({1, 1}, {0.25});
    Tensor y = mlp2(x, W1, b1, W2, b2);
    CHECK(y.at(0, 0) == doctest::Approx(2.25).epsilon(1e-14));
}

TEST_CASE("dropout identity paths") {
    std::mt19937_64 rng(3);
    Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor still = dropout(x, 0.0, true, rng);
    check_close(still.value(), x.value(), 1e-14);
    Tensor eval = dropout(x, 0.5, false, rng);
    check_close(eval.value(), x.value(), 1e-14);
}

TEST_CASE("dropout masks and rescales") {
    std::mt19937_64 rng(5);
    Tensor x = Tensor::param({1, 2000}, std::vector<double>(2000, 1.0));
    Tensor y = dropout(x, 0.4, true, rng);
    long kept = 0;
    for (double v : y.value()) {
        if (v != 0.0) {
            CHECK(v == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
            ++kept;
        }
    }
    double keep_rate = static_cast<double>(kept) / 2000.0;
    CHECK(keep_rate > 0.55);
    CHECK(keep_rate < 0.65);
    reduce_all(y, Reduce::Sum).backward();
    for (size_t i = 0; i < 2000; ++i) {
        if (y.value()[i] == 0.0)
            CHECK(x.grad()[i] == 0.0);
        else
            CHECK(x.grad()[i] == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
    }
}

TEST_CASE("dropout rejects out-of-range rates") {
    std::mt19937_64 rng(1);
    Tensor x = Tensor::zeros({1, 1});
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ConfigError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ConfigError);
}

TEST_CASE("finite differences agree across a composite expression") {
    std::mt19937_64 rng(17);
    std::vector<double> x0 = uniform_vector(rng, 12, 0.2, 1.5);
    std::vector<double> w0 = uniform_vector(rng, 12, -0.8, 0.8);

    auto build = [](const std::vector<double>& xv, const std::vector<double>& wv) {
        Tensor x = Tensor::param({3, 4}, xv);
        Tensor w = Tensor::param({3, 4}, wv);
        Tensor h = tanh_t(mul(x, w));
        Tensor s = softmax(matmul_nt(h, relu(add(x, w))), 1);
        Tensor m = reduce(concat(h, s, 1), 1, Reduce::Max);
        Tensor out = reduce_all(sigmoid(m), Reduce::Sum);
        return std::make_tuple(out, x, w);
    };

    auto [loss, x, w] = build(x0, w0);
    loss.backward();
    std::vector<double> gx = x.grad();
    std::vector<double> gw = w.grad();

    auto f_x = [&](const std::vector<double>& v) {
        NoGradGuard guard;
        return std::get<0>(build(v, w0)).item();
    };
    auto f_w = [&](const std::vector<double>& v) {
        NoGradGuard guard;
        return std::get<0>(build(x0, v)).item();
    };
    check_close(gx, fd_grad(f_x, x0), 2e-6);
    check_close(gw, fd_grad(f_w, w0), 2e-6);
}
