#include <gtest/gtest.h>

#include <cmath>

#include "noisysgd/linalg.hpp"
#include "noisysgd/rng.hpp"

using namespace noisysgd;

TEST(Vector, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(Vector(0), InvalidArgument);
  EXPECT_THROW(Vector({1.0, NAN}), InvalidArgument);
  EXPECT_THROW(Vector({INFINITY}), InvalidArgument);
  Vector v{1.0, 2.0};
  EXPECT_EQ(v.size(), 2u);
}

TEST(Vector, ArithmeticAndFiniteFlag) {
  Vector a{1.0, 2.0};
  Vector b{3.0, -1.0};
  EXPECT_EQ(a + b, (Vector{4.0, 1.0}));
  EXPECT_EQ(a - b, (Vector{-2.0, 3.0}));
  EXPECT_EQ(2.0 * a, (Vector{2.0, 4.0}));
  EXPECT_DOUBLE_EQ(dot(a.values(), b.values()), 1.0);
  Vector big{1e308};
  big *= 10.0;
  EXPECT_FALSE(big.all_finite());
  EXPECT_THROW(a += Vector{1.0}, ShapeError);
}

TEST(Matvec, IdentityZeroAndHandCase) {
  EXPECT_EQ(matvec(Matrix::identity(2), Vector{3.0, 4.0}), (Vector{3.0, 4.0}));
  EXPECT_EQ(matvec(Matrix(2, 2), Vector{3.0, 4.0}), (Vector{0.0, 0.0}));
  const Matrix m{{1.0, -1.0}, {2.0, 0.0}};
  EXPECT_EQ(matvec(m, Vector{1.0, 1.0}), (Vector{0.0, 2.0}));
}

TEST(Matvec, MatchesScalarLoop) {
  RngStream rng(5, 0);
  Matrix m(7, 5);
  for (double& x : m.values()) x = rng.draw_uniform(-1.0, 1.0);
  Vector v(5);
  for (double& x : v) x = rng.draw_gaussian();
  const Vector out = matvec(m, v);
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += m(r, c) * v[c];
    EXPECT_DOUBLE_EQ(out[r], s);
  }
}

TEST(Matvec, ShapeMismatchNamesBothShapes) {
  try {
    matvec(Matrix(2, 3), Vector{1.0, 2.0});
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2"), std::string::npos) << msg;
  }
}

TEST(Matvec, DistributesOverAddition) {
  RngStream rng(11, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m(6, 4);
    for (double& x : m.values()) x = rng.draw_gaussian();
    Vector a(4), b(4);
    for (double& x : a) x = rng.draw_gaussian();
    for (double& x : b) x = rng.draw_gaussian();
    const Vector lhs = matvec(m, a + b);
    const Vector rhs = matvec(m, a) + matvec(m, b);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      EXPECT_NEAR(lhs[i], rhs[i], 1e-12 * (1.0 + std::abs(rhs[i])));
    }
  }
}

TEST(Frobenius, KnownValues) {
  EXPECT_DOUBLE_EQ(frobenius_norm(Matrix::identity(2)), std::sqrt(2.0));
  EXPECT_EQ(frobenius_norm(Matrix(3, 3)), 0.0);
  EXPECT_EQ(frobenius_norm(Matrix{{3.0, 4.0}}), 5.0);
}

TEST(Frobenius, EqualsRowMajorSumOfRowNorms) {
  RngStream rng(2, 2);
  Matrix m(9, 13);
  for (double& x : m.values()) x = rng.draw_gaussian();
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) s += squared_norm(m.row(r));
  EXPECT_EQ(frobenius_norm_squared(m), s);
  EXPECT_EQ(frobenius_norm(m), std::sqrt(s));
}

TEST(Matrix, ConstructionChecks) {
  EXPECT_THROW(Matrix(0, 2), InvalidArgument);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
  EXPECT_THROW(Matrix(1, 1, std::vector<double>{NAN}), InvalidArgument);
  EXPECT_THROW((Matrix{{1.0, 2.0}, {3.0}}), ShapeError);
}
