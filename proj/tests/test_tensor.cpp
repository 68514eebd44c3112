#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wpad/random.hpp"
#include "wpad/tensor.hpp"

using namespace wpad;

TEST(Tensor, MatmulIdentity) {
    auto a = Tensor<double>::from_values({2, 2}, {1, 2, 3, 4});
    auto eye = Tensor<double>::from_values({2, 2}, {1, 0, 0, 1});
    auto c = matmul(a, eye);
    EXPECT_EQ(c.data()[0], 1);
    EXPECT_EQ(c.data()[1], 2);
    EXPECT_EQ(c.data()[2], 3);
    EXPECT_EQ(c.data()[3], 4);
}

TEST(Tensor, AddZerosIsIdentity) {
    auto x = Tensor<double>::from_values({2, 2}, {1.5, -2.25, 0.0, 7.0});
    auto y = add(Tensor<double>::zeros({2, 2}), x);
    EXPECT_EQ(max_abs_diff(x, y), 0.0);
}

TEST(Tensor, MatmulHandExample) {
    // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]], checked against the
    // brute-force triple loop as well.
    auto a = Tensor<double>::from_values({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<double>::from_values({2, 2}, {5, 6, 7, 8});
    auto c = matmul(a, b);
    EXPECT_EQ(c(0, 0), 19);
    EXPECT_EQ(c(0, 1), 22);
    EXPECT_EQ(c(1, 0), 43);
    EXPECT_EQ(c(1, 1), 50);
    EXPECT_EQ(max_abs_diff(c, oracle::naive_matmul(a, b)), 0.0);
}

TEST(Tensor, MatmulAssociativity) {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.index(6), k = 1 + rng.index(6), n = 1 + rng.index(6),
                          q = 1 + rng.index(6);
        Tensor<double> a({m, k}), b({k, n}), c({n, q});
        for (auto& v : a.data()) v = rng.uniform(-1, 1);
        for (auto& v : b.data()) v = rng.uniform(-1, 1);
        for (auto& v : c.data()) v = rng.uniform(-1, 1);
        EXPECT_LT(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-9);
    }
}

TEST(Tensor, AddCommutesBitForBit) {
    Rng rng(7);
    Tensor<double> a({3, 4, 5}), b({3, 4, 5});
    for (auto& v : a.data()) v = rng.uniform(-10, 10);
    for (auto& v : b.data()) v = rng.uniform(-10, 10);
    EXPECT_EQ(max_abs_diff(add(a, b), add(b, a)), 0.0);
}

TEST(Tensor, ElementwiseOps) {
    auto a = Tensor<double>::from_values({3}, {1, 2, 3});
    auto b = Tensor<double>::from_values({3}, {4, 5, 6});
    EXPECT_EQ(sub(b, a).data()[2], 3);
    EXPECT_EQ(mul(a, b).data()[1], 10);
    EXPECT_EQ(scale(a, 2.0).data()[2], 6);
}

TEST(Tensor, ShapeErrorsNameBothShapes) {
    auto a = Tensor<double>::zeros({2, 3});
    auto b = Tensor<double>::zeros({3, 3});
    try {
        add(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2,3)"), std::string::npos);
        EXPECT_NE(msg.find("(3,3)"), std::string::npos);
    }
    EXPECT_THROW(matmul(a, Tensor<double>::zeros({2, 2})), ShapeError);
    EXPECT_THROW(matmul(Tensor<double>::zeros({2}), b), ShapeError);
}

TEST(Tensor, InvalidShapesRejected) {
    EXPECT_THROW(Tensor<double>::zeros({0, 3}), ShapeError);
    EXPECT_THROW(Tensor<double>::zeros({1, 2, 3, 4, 5}), ShapeError);
    EXPECT_THROW(Tensor<double>::zeros({}), ShapeError);
    EXPECT_THROW(Tensor<double>::from_values({2, 2}, {1, 2, 3}), ShapeError);
}

TEST(Tensor, RowMajorLayout) {
    Tensor<double> t({2, 3, 4, 5});
    t(1, 2, 3, 4) = 9.5;
    EXPECT_EQ(t.data()[((1 * 3 + 2) * 4 + 3) * 5 + 4], 9.5);
    EXPECT_EQ(t.size(), 2u * 3u * 4u * 5u);
}

TEST(Tensor, FloatPrecisionIsConstructionTime) {
    auto f = Tensor<float>::from_values({2}, {0.5f, 1.5f});
    auto d = f.astype<double>();
    EXPECT_EQ(d(0), 0.5);
    EXPECT_EQ(d(1), 1.5);
    auto back = d.astype<float>();
    EXPECT_EQ(max_abs_diff(f, back), 0.0f);
}
