#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "fd_check.hpp"
#include "stan/errors.hpp"
#include "stan/numerics/ops.hpp"
#include "stan/numerics/parameters.hpp"
#include "stan/numerics/tape.hpp"

using namespace stan;
using num::Tensor;
using stan::testing::max_fd_error;
using stan::testing::random_tensor;

namespace {

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor identity(std::size_t n) {
  Tensor t = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_values()[i * n + i] = 1.0;
  return t;
}

}  // namespace

TEST(Tensor, ShapeInvariants) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_DOUBLE_EQ(Tensor::scalar(3.5).item(), 3.5);
}

TEST(Tensor, CloneIsIndependent) {
  Tensor a = Tensor::full({2}, 1.0);
  Tensor b = a.clone();
  b.mutable_values()[0] = 7.0;
  EXPECT_EQ(a[0], 1.0);
  EXPECT_FALSE(a.same_storage(b));
}

TEST(Matmul, IdentityAndScalar) {
  const Tensor a = random_tensor({3, 3}, 1);
  EXPECT_EQ(to_vec(num::matmul(a, identity(3))), to_vec(a));
  EXPECT_EQ(num::matmul(Tensor({1, 1}, {2.0}), Tensor({1, 1}, {3.0}))[0], 6.0);
}

TEST(Matmul, MatchesTripleLoop) {
  const Tensor a = random_tensor({4, 5}, 2);
  const Tensor b = random_tensor({5, 3}, 3);
  const Tensor c = num::matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < 5; ++p) s += a.at(i, p) * b.at(p, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    num::matmul(Tensor({2, 3}), Tensor({4, 2}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, IdentityAssociativityIsBitwise) {
  const Tensor a = random_tensor({4, 4}, 4);
  const Tensor b = random_tensor({4, 6}, 5);
  EXPECT_EQ(to_vec(num::matmul(num::matmul(a, identity(4)), b)), to_vec(num::matmul(a, b)));
}

TEST(Softmax, UniformAndAnalytic) {
  const Tensor u = num::softmax_rows(Tensor::full({1, 4}, 2.5));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(u[j], 0.25);
  const Tensor s = num::softmax_rows(Tensor({1, 2}, {0.0, std::log(2.0)}));
  EXPECT_NEAR(s[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s[1], 2.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitsAgainstExtendedPrecision) {
  const Tensor s = num::softmax_rows(Tensor({1, 3}, {1000.0, 1000.0, 999.0}));
  const long double e = std::exp(-1.0L);
  const long double z = 2.0L + e;
  EXPECT_NEAR(s[0], static_cast<double>(1.0L / z), 1e-12);
  EXPECT_NEAR(s[1], static_cast<double>(1.0L / z), 1e-12);
  EXPECT_NEAR(s[2], static_cast<double>(e / z), 1e-12);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(std::isfinite(s[j]));
}

TEST(Softmax, RowsSumToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor s = num::softmax_rows(random_tensor({5, 7}, seed, -50.0, 50.0));
    for (std::size_t i = 0; i < 5; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < 7; ++j) row += s.at(i, j);
      EXPECT_NEAR(row, 1.0, 1e-9);
    }
  }
}

TEST(LayerNorm, ConstantRowBecomesZero) {
  const Tensor y = num::layer_norm(Tensor::full({2, 4}, 3.0), Tensor::full({4}, 1.0), Tensor::zeros({4}), 1e-5);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, NormalizedRowUnchanged) {
  const Tensor x({1, 4}, {-1.0, 1.0, -1.0, 1.0});  // mean 0, biased variance 1
  const Tensor y = num::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}), 1e-12);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y[j], x[j], 1e-6);
}

TEST(LayerNorm, MatchesDirectFormula) {
  const Tensor x = random_tensor({3, 6}, 7);
  const Tensor g = random_tensor({6}, 8);
  const Tensor b = random_tensor({6}, 9);
  const double eps = 1e-5;
  const Tensor y = num::layer_norm(x, g, b, eps);
  for (std::size_t i = 0; i < 3; ++i) {
    double mu = 0;
    for (std::size_t j = 0; j < 6; ++j) mu += x.at(i, j) / 6;
    double var = 0;
    for (std::size_t j = 0; j < 6; ++j) var += (x.at(i, j) - mu) * (x.at(i, j) - mu) / 6;
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(y.at(i, j), (x.at(i, j) - mu) / std::sqrt(var + eps) * g[j] + b[j], 1e-12);
    }
  }
}

TEST(Affine, Cases) {
  const Tensor x = random_tensor({3, 3}, 10);
  EXPECT_EQ(to_vec(num::affine(x, identity(3), Tensor::zeros({3}))), to_vec(x));
  const Tensor b = random_tensor({2}, 11);
  const Tensor z = num::affine(Tensor::zeros({4, 3}), random_tensor({3, 2}, 12), b);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(z.at(i, 0), b[0]);
    EXPECT_EQ(z.at(i, 1), b[1]);
  }
  const Tensor w = random_tensor({3, 2}, 13);
  const Tensor y = num::affine(x, w, b);
  const Tensor ref = num::matmul(x, w);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(y.at(i, j), ref.at(i, j) + b[j], 1e-12);
  EXPECT_THROW(num::affine(x, random_tensor({2, 2}, 1), b), DimensionError);
}

TEST(Gelu, Values) {
  EXPECT_EQ(num::gelu(Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_NEAR(num::gelu(Tensor::scalar(10.0)).item(), 10.0, 1e-6);
  // x * Phi(x) at x = 1 with Phi from the complementary error function.
  const long double phi = 0.5L * std::erfc(-1.0L / std::sqrt(2.0L));
  EXPECT_NEAR(num::gelu(Tensor::scalar(1.0)).item(), static_cast<double>(phi), 1e-15);
}

TEST(Backward, SquareAtThree) {
  Tensor x = Tensor::scalar(3.0);
  x.set_requires_grad(true);
  num::Tape tape;
  Tensor loss;
  {
    num::TapeScope scope(tape);
    loss = num::mul(x, x);
  }
  EXPECT_DOUBLE_EQ(tape.backward(loss).of(x)[0], 6.0);
}

TEST(Backward, SumOfProductHandDerivation) {
  // d sum(A B) / dA[i][p] = sum_j B[p][j]; d / dB[p][j] = sum_i A[i][p].
  Tensor a({2, 2}, {1.0, 2.0, 3.0, 4.0});
  Tensor b({2, 2}, {5.0, 6.0, 7.0, 8.0});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  num::Tape tape;
  Tensor loss;
  {
    num::TapeScope scope(tape);
    loss = num::sum(num::matmul(a, b));
  }
  const auto g = tape.backward(loss);
  EXPECT_EQ(g.of(a), (std::vector<double>{11.0, 15.0, 11.0, 15.0}));
  EXPECT_EQ(g.of(b), (std::vector<double>{4.0, 4.0, 6.0, 6.0}));
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor a = random_tensor({2, 2}, 1);
  a.set_requires_grad(true);
  num::Tape tape;
  Tensor y;
  {
    num::TapeScope scope(tape);
    y = num::scale(a, 2.0);
  }
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, UnusedLeafGetsZero) {
  Tensor a = random_tensor({2}, 1);
  Tensor unused = random_tensor({3}, 2);
  a.set_requires_grad(true);
  unused.set_requires_grad(true);
  num::Tape tape;
  Tensor loss;
  {
    num::TapeScope scope(tape);
    loss = num::sum(a);
  }
  const auto g = tape.backward(loss);
  EXPECT_EQ(g.of(unused), std::vector<double>(3, 0.0));
}

TEST(Backward, SharedNodeAccumulates) {
  Tensor x = Tensor::scalar(2.0);
  x.set_requires_grad(true);
  num::Tape tape;
  Tensor loss;
  {
    num::TapeScope scope(tape);
    const Tensor y = num::mul(x, x);
    loss = num::add(y, num::mul(y, x));  // x^2 + x^3
  }
  EXPECT_DOUBLE_EQ(tape.backward(loss).of(x)[0], 4.0 + 12.0);
}

TEST(Backward, NoGradScopeRecordsNothing) {
  Tensor x = random_tensor({2, 2}, 1);
  x.set_requires_grad(true);
  num::Tape tape;
  {
    num::TapeScope scope(tape);
    num::NoGradScope off;
    num::matmul(x, x);
  }
  EXPECT_EQ(tape.size(), 0u);
}

// Finite-difference checks, one per differentiable operation.

TEST(OpGradients, Elementwise) {
  EXPECT_LT(max_fd_error({random_tensor({3, 4}, 1), random_tensor({3, 4}, 2)},
                         [](auto& v) { return num::sum(num::mul(num::add(v[0], v[1]), num::sub(v[0], v[1]))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({5}, 3)}, [](auto& v) { return num::sum(num::mul(num::one_minus(v[0]), num::scale(v[0], 3.0))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({3, 4}, 4), random_tensor({4}, 5)},
                         [](auto& v) { return num::sum(num::mul(num::add_row(v[0], v[1]), num::add_row(v[0], v[1]))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({3, 4}, 6), random_tensor({4}, 7)},
                         [](auto& v) { return num::sum(num::mul(num::mul_row(v[0], v[1]), v[0])); }),
            1e-6);
}

TEST(Ops, MulRowScalesColumns) {
  const Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor s({3}, {2, 0, -1});
  const Tensor y = num::mul_row(x, s);
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), (std::vector<double>{2, 0, -3, 8, 0, -6}));
  EXPECT_THROW(num::mul_row(x, Tensor({2}, {1, 1})), DimensionError);
}

TEST(OpGradients, MatrixProducts) {
  const Tensor w = random_tensor({4, 3}, 9);
  EXPECT_LT(max_fd_error({random_tensor({2, 4}, 6), random_tensor({4, 3}, 7)},
                         [&](auto& v) { return num::sum(num::mul(num::matmul(v[0], v[1]), num::matmul(v[0], v[1]))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({2, 4}, 6), random_tensor({3, 4}, 7)},
                         [&](auto& v) { return num::sum(num::mul(num::matmul_transposed(v[0], v[1]), num::matmul_transposed(v[0], v[1]))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({2, 4}, 8)},
                         [&](auto& v) { return num::sum(num::mul(num::transpose(v[0]), num::transpose(v[0]))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({2, 4}, 6), random_tensor({4, 3}, 7), random_tensor({3}, 8)},
                         [&](auto& v) { return num::sum(num::gelu(num::affine(v[0], v[1], v[2]))); }),
            1e-6);
}

TEST(OpGradients, NonlinearitiesAndNorms) {
  const Tensor weights = random_tensor({3, 5}, 99);
  auto weighted = [&](const Tensor& t) { return num::sum(num::mul(t, weights)); };
  EXPECT_LT(max_fd_error({random_tensor({3, 5}, 10, -3, 3)}, [&](auto& v) { return weighted(num::softmax_rows(v[0])); }), 1e-6);
  EXPECT_LT(max_fd_error({random_tensor({3, 5}, 11), random_tensor({5}, 12), random_tensor({5}, 13)},
                         [&](auto& v) { return weighted(num::layer_norm(v[0], v[1], v[2], 1e-5)); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({3, 5}, 14, -3, 3)}, [&](auto& v) { return weighted(num::gelu(v[0])); }), 1e-6);
  EXPECT_LT(max_fd_error({random_tensor({3, 5}, 15, -3, 3)}, [&](auto& v) { return weighted(num::sigmoid(v[0])); }), 1e-6);
}

TEST(OpGradients, ReductionsAndShapes) {
  const Tensor w3 = random_tensor({3}, 98);
  EXPECT_LT(max_fd_error({random_tensor({2, 3, 4}, 16)},
                         [&](auto& v) { return num::sum(num::mul(num::mean(num::mean_axis(v[0], 2)), num::mean(v[0]))); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({2, 3, 4}, 17)},
                         [&](auto& v) { return num::sum(num::mul(num::mean_axis(num::mean_axis(v[0], 0), 1), w3)); }),
            1e-6);
  EXPECT_LT(max_fd_error({random_tensor({4, 6}, 18)},
                         [&](auto& v) {
                           const Tensor r = num::reshape(v[0], {6, 4});
                           const Tensor parts[] = {num::slice_rows(r, 1, 2), num::slice_rows(r, 4, 2)};
                           const Tensor c = num::concat_rows(parts);
                           const Tensor cols[] = {num::slice_cols(c, 0, 1), num::slice_cols(c, 2, 2)};
                           const Tensor cc = num::concat_cols(cols);
                           return num::sum(num::mul(cc, cc));
                         }),
            1e-6);
}

TEST(OpGradients, Losses) {
  const Tensor y({1, 4}, {1.0, 0.0, 1.0, 0.0});
  EXPECT_LT(max_fd_error({random_tensor({1, 4}, 19, -4, 4)}, [&](auto& v) { return num::bce_with_logits(v[0], y); }), 1e-6);
  const Tensor teacher = random_tensor({1, 4}, 20, -3, 3);
  EXPECT_LT(max_fd_error({random_tensor({1, 4}, 21, -3, 3)},
                         [&](auto& v) { return num::binary_kl_with_temperature(v[0], teacher, 2.0); }),
            1e-6);
}

TEST(OpGradients, Convolutions) {
  const Tensor wt = random_tensor({2, 3, 6, 6}, 97);
  EXPECT_LT(max_fd_error({random_tensor({2, 2, 6, 6}, 22), random_tensor({3, 2, 3, 3}, 23), random_tensor({3}, 24)},
                         [&](auto& v) { return num::sum(num::mul(num::conv2d(v[0], v[1], v[2]), wt)); }),
            1e-6);
  const Tensor wt2 = random_tensor({2, 4, 3, 2, 2}, 96);
  EXPECT_LT(max_fd_error({random_tensor({2, 4, 2, 2, 2}, 25), random_tensor({3, 2, 3}, 26), random_tensor({3}, 27)},
                         [&](auto& v) { return num::sum(num::mul(num::conv_time(v[0], v[1], v[2]), wt2)); }),
            1e-6);
  const Tensor wp = random_tensor({2, 3, 2, 2}, 95);
  EXPECT_LT(max_fd_error({random_tensor({2, 3, 4, 4}, 28)},
                         [&](auto& v) { return num::sum(num::mul(num::avg_pool2d(v[0]), wp)); }),
            1e-6);
  const Tensor wpt = random_tensor({2, 2, 3}, 94);
  EXPECT_LT(max_fd_error({random_tensor({2, 4, 3}, 29)},
                         [&](auto& v) { return num::sum(num::mul(num::avg_pool_time(v[0]), wpt)); }),
            1e-6);
  const Tensor wn = random_tensor({2, 3, 4, 4}, 93);
  EXPECT_LT(max_fd_error({random_tensor({2, 3, 4, 4}, 30), random_tensor({3}, 31), random_tensor({3}, 32)},
                         [&](auto& v) { return num::sum(num::mul(num::channel_norm(v[0], v[1], v[2], 1e-5), wn)); }),
            1e-6);
}

TEST(Conv, AntisymmetricTemporalKernelZeroOnStaticInterior) {
  // 12 identical frames, kernel [1, 0, -1] on one channel: interior outputs vanish.
  const Tensor frame = random_tensor({1, 3, 3}, 40);
  std::vector<double> v;
  for (int t = 0; t < 12; ++t) v.insert(v.end(), frame.values().begin(), frame.values().end());
  const Tensor x({1, 12, 1, 3, 3}, v);
  const Tensor y = num::conv_time(x, Tensor({1, 1, 3}, {1.0, 0.0, -1.0}), Tensor::zeros({1}));
  for (std::size_t t = 1; t + 1 < 12; ++t)
    for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(y[t * 9 + k], 0.0);
}

TEST(Determinism, SameInputsSameBits) {
  auto run = [] {
    num::Rng rng(5);
    const Tensor w = num::uniform_fan_in({8, 8}, 8, rng);
    const Tensor x = num::normal_init({4, 8}, 1.0, rng);
    return to_vec(num::softmax_rows(num::gelu(num::matmul(x, w))));
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, IndependentTapesOnThreads) {
  Tensor w = random_tensor({3, 3}, 50);
  w.set_requires_grad(true);
  std::vector<double> g1, g2;
  auto work = [&](std::vector<double>& out, double s) {
    num::Tape tape;
    Tensor loss;
    {
      num::TapeScope scope(tape);
      loss = num::sum(num::scale(num::matmul(w, w), s));
    }
    out = tape.backward(loss).of(w);
  };
  std::thread a(work, std::ref(g1), 1.0), b(work, std::ref(g2), 2.0);
  a.join();
  b.join();
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_DOUBLE_EQ(2.0 * g1[i], g2[i]);
}

TEST(Parameters, RegistryOrderAndGroups) {
  num::ParameterSet ps;
  num::Rng rng(1);
  ps.add("a", "g1", num::uniform_fan_in({2, 2}, 2, rng));
  ps.add("b", "g2", Tensor::zeros({3}));
  ps.add("c", "g1", Tensor::zeros({1}));
  EXPECT_EQ(ps.groups(), (std::vector<std::string>{"g1", "g2"}));
  EXPECT_EQ(ps.scalar_count("g1"), 5u);
  EXPECT_EQ(ps.scalar_count(), 8u);
  EXPECT_TRUE(ps.get("b").requires_grad());
  EXPECT_THROW(ps.add("a", "g3", Tensor::zeros({1})), ContractError);
  EXPECT_THROW(ps.get("zzz"), NotFoundError);
}
