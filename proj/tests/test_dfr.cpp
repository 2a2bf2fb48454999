#include "doctest.h"

#include <cmath>

#include "racmc/dfr.hpp"
#include "racmc/gradcheck.hpp"
#include "test_util.hpp"

using namespace racmc;
using testutil::random_matrix;

namespace {

FusedFeatures fused_from(const Matrix& t_prime, const Matrix& i_prime, const Matrix& m_prime) {
  FusedFeatures f;
  f.t_prime = Tensor(Matrix(t_prime));
  f.i_prime = Tensor(Matrix(i_prime));
  f.m_prime = Tensor(Matrix(m_prime));
  return f;
}

}  // namespace

TEST_CASE("reasoning_features: coincident fused inputs") {
  const Index b = 3, n = 4;
  Rng rng(1);
  Matrix m = random_matrix(b, n, rng);
  // T' = M', I' = 0, so M^ equals M' bitwise
  FusedFeatures f = fused_from(m, Matrix::Zero(b, n), m);
  DfrParams params(n, rng);
  Rng drop(0);
  ReasoningFeatures r = reasoning_features(f, params, Mode::eval(), drop);
  CHECK(r.m_hat.value() == m);
  CHECK(r.f1.value().isZero(0.0));
  CHECK(r.f2.value() == Matrix(m.cwiseProduct(m)));
  CHECK(r.f4.value() == m);  // iAFF identity on equal inputs
}

TEST_CASE("reasoning_features: sign example and shapes") {
  Rng rng(2);
  DfrParams params(2, rng);
  FusedFeatures f = fused_from(Tensor::of({{-1, 1}}).value(), Matrix::Zero(1, 2),
                               Tensor::of({{1, -1}}).value());
  Rng drop(0);
  ReasoningFeatures r = reasoning_features(f, params, Mode::eval(), drop);
  CHECK(r.f1.value() == Tensor::of({{2, 2}}).value());
  CHECK(r.f2.value() == Tensor::of({{-1, -1}}).value());

  const Index b = 4, n = 6;
  DfrParams params2(n, rng);
  FusedFeatures f2 = fused_from(random_matrix(b, n, rng), random_matrix(b, n, rng),
                                random_matrix(b, n, rng));
  ReasoningFeatures r2 = reasoning_features(f2, params2, Mode::eval(), drop);
  for (const Tensor* t : {&r2.f1, &r2.f2, &r2.f3, &r2.f4}) {
    CHECK(t->rows() == b);
    CHECK(t->cols() == n);
  }
  CHECK(r2.fused_concat.rows() == b);
  CHECK(r2.fused_concat.cols() == 4 * n);
}

TEST_CASE("reasoning_features: F1 is nonnegative and vanishes only at coincidence") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Index b = 2, n = 5;
    DfrParams params(n, rng);
    FusedFeatures f = fused_from(random_matrix(b, n, rng), random_matrix(b, n, rng),
                                 random_matrix(b, n, rng));
    Rng drop(0);
    ReasoningFeatures r = reasoning_features(f, params, Mode::eval(), drop);
    CHECK(r.f1.value().minCoeff() >= 0.0);
    const Matrix gap = f.m_prime.value() - r.m_hat.value();
    for (Index i = 0; i < b; ++i)
      for (Index j = 0; j < n; ++j)
        CHECK((r.f1.value()(i, j) == 0.0) == (gap(i, j) == 0.0));
  }
}

TEST_CASE("classifier: uniform rows under zero final layer; rows are distributions") {
  const Index b = 5, in = 8;
  Rng rng(4);
  Classifier clf(in, 4, rng);
  clf.W2.mutable_value().setZero();
  clf.b2.mutable_value().setZero();
  Tensor x(random_matrix(b, in, rng));
  Matrix probs = clf.forward(x).value();
  for (Index i = 0; i < b; ++i) {
    CHECK(probs(i, 0) == doctest::Approx(0.5));
    CHECK(probs(i, 1) == doctest::Approx(0.5));
  }

  Classifier clf2(in, 4, rng);
  Matrix p2 = clf2.forward(x).value();
  Matrix p3 = clf2.forward(x).value();
  CHECK(p2 == p3);  // deterministic for fixed params
  for (Index i = 0; i < b; ++i) {
    CHECK(std::fabs(p2.row(i).sum() - 1.0) <= 1e-12);
    for (Index j = 0; j < 2; ++j) CHECK(p2(i, j) > 0.0);
  }
}

TEST_CASE("cross_entropy examples and label validation") {
  Tensor sure = Tensor::of({{1.0, 0.0}});
  CHECK(cross_entropy(sure, {0}).item() == doctest::Approx(0.0));

  Tensor half = Tensor::of({{0.5, 0.5}});
  CHECK(cross_entropy(half, {0}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy(half, {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor skew = Tensor::of({{0.25, 0.75}});
  CHECK(cross_entropy(skew, {1}).item() ==
        doctest::Approx(-std::log(0.75)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(half, {2}), data_error);
  CHECK_THROWS_AS(cross_entropy(half, {0, 1}), shape_error);
}

TEST_CASE("total_loss: weighting, arithmetic example, bitwise report") {
  Tensor l_ic = Tensor::scalar(2.0);
  Tensor l_no = Tensor::scalar(-0.5);
  Tensor l_ni = Tensor::scalar(-1.0);
  Tensor l_ce = Tensor::scalar(0.7);

  TotalLoss unweighted = total_loss(0.0, l_ic, l_no, l_ni, l_ce);
  CHECK(unweighted.report.total == ((0.0 + -0.5) + -1.0) + 0.7);

  TotalLoss l = total_loss(0.1, l_ic, l_no, l_ni, l_ce);
  CHECK(l.report.total == doctest::Approx(-0.6).epsilon(1e-12));
  const double recomputed =
      ((l.report.lambda * l.report.l_ic + l.report.l_no) + l.report.l_ni) + l.report.l_ce;
  CHECK(l.report.total == recomputed);
}

TEST_CASE("classifier + cross_entropy gradient check") {
  const Index b = 4, in = 6;
  Rng rng(5);
  Classifier clf(in, 4, rng);
  std::vector<int> labels = {0, 1, 1, 0};
  Matrix x = random_matrix(b, in, rng);
  auto loss = [&]() { return cross_entropy(clf.forward(Tensor(Matrix(x))), labels); };
  std::vector<std::pair<std::string, Tensor>> params = {
      {"W1", clf.W1}, {"b1", clf.b1}, {"W2", clf.W2}, {"b2", clf.b2}};
  CHECK(grad_check_params(loss, params) < 1e-6);
}
