#include "doctest.h"

#include <cmath>

#include "racmc/gradcheck.hpp"
#include "racmc/mrc.hpp"
#include "test_util.hpp"

using namespace racmc;
using testutil::make_batch;
using testutil::random_matrix;

namespace {

void force_threshold(ThresholdNet& thr, double value) {
  thr.W1.mutable_value().setZero();
  thr.b1.mutable_value().setZero();
  thr.W2.mutable_value().setZero();
  thr.b2.mutable_value().setConstant(value);
}

void zero_gates(IaffParams& p) {
  for (GateBranch* g : {&p.global1, &p.local1, &p.global2, &p.local2}) {
    g->W2.mutable_value().setZero();
    g->b2.mutable_value().setZero();
  }
}

}  // namespace

TEST_CASE("masked_attention: open mask with zero scores averages value rows") {
  const Index b = 4, n = 3;
  Rng rng(1);
  MaskedAttentionParams params(n, 1, rng);
  params.W_q.mutable_value().setZero();  // Q K^t = 0 -> uniform scores
  params.W_k.mutable_value() = Matrix::Identity(n, n);
  params.W_v.mutable_value() = Matrix::Identity(n, n);
  params.W_o.mutable_value() = Matrix::Identity(n, n);
  ThresholdNet thr(n, n, 1, rng);
  force_threshold(thr, -10.0);  // Theta far below any score -> Omega all ones

  Tensor q(random_matrix(b, n, rng));
  Tensor kv(random_matrix(b, n, rng));
  Rng drop(0);
  Tensor out = masked_attention(q, kv, kv, params, thr, Mode::eval(), drop);
  Matrix mean_row = kv.value().colwise().mean();
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < n; ++j)
      CHECK(out.value()(i, j) == doctest::Approx(mean_row(j)).epsilon(1e-12));
}

TEST_CASE("masked_attention: fully masked rows fall back to uniform attention") {
  const Index b = 4, n = 3;
  Rng rng(2);
  MaskedAttentionParams params(n, 1, rng);
  params.W_v.mutable_value() = Matrix::Identity(n, n);
  params.W_o.mutable_value() = Matrix::Identity(n, n);
  ThresholdNet thr(n, n, 1, rng);
  force_threshold(thr, 10.0);  // Theta above every score -> Omega all zeros

  Tensor q(random_matrix(b, n, rng));
  Tensor kv(random_matrix(b, n, rng));
  Rng drop(0);
  AttentionDiag diag;
  Tensor out = masked_attention(q, kv, kv, params, thr, Mode::eval(), drop, &diag);
  CHECK(diag.omega[0].isZero(0.0));
  // zeroed scores -> outer softmax uniform -> mean of value rows
  Matrix mean_row = kv.value().colwise().mean();
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < n; ++j)
      CHECK(out.value()(i, j) == doctest::Approx(mean_row(j)).epsilon(1e-12));
}

TEST_CASE("masked_attention: single-row batch ignores the mask entirely") {
  const Index n = 4;
  Rng rng(3);
  MaskedAttentionParams params(n, 1, rng);
  ThresholdNet thr(n, n, 1, rng);
  Tensor q(random_matrix(1, n, rng));
  Tensor kv(random_matrix(1, n, rng));
  Matrix expect = kv.value() * params.W_v.value() * params.W_o.value();

  Rng drop(0);
  for (double t : {-10.0, 10.0}) {
    force_threshold(thr, t);
    Tensor out = masked_attention(q, kv, kv, params, thr, Mode::eval(), drop);
    for (Index j = 0; j < n; ++j)
      CHECK(out.value()(0, j) == doctest::Approx(expect(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("masked_attention: head count must divide the width") {
  Rng rng(4);
  CHECK_THROWS_AS(MaskedAttentionParams(5, 2, rng), config_error);
}

TEST_CASE("masked_attention: mask is binary in eval, strictly inside (0,1) in train") {
  const Index b = 5, n = 8;
  Rng rng(5);
  MaskedAttentionParams params(n, 2, rng);
  ThresholdNet thr(n, n, 2, rng);
  Tensor q(random_matrix(b, n, rng));
  Tensor kv(random_matrix(b, n, rng));
  Rng drop(0);

  AttentionDiag hard;
  masked_attention(q, kv, kv, params, thr, Mode::eval(), drop, &hard);
  for (const Matrix& m : hard.omega)
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) CHECK((m(i, j) == 0.0 || m(i, j) == 1.0));

  AttentionDiag soft;
  Mode train = Mode::train();
  train.dropout = false;
  masked_attention(q, kv, kv, params, thr, train, drop, &soft);
  for (const Matrix& m : soft.omega)
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) {
        CHECK(m(i, j) > 0.0);
        CHECK(m(i, j) < 1.0);
      }
}

TEST_CASE("masked_attention: soft mask converges to the hard mask as tau -> 0") {
  const Index b = 4, n = 6;
  Rng rng(11);
  MaskedAttentionParams params(n, 2, rng);
  ThresholdNet thr(n, n, 2, rng);
  Tensor q(random_matrix(b, n, rng));
  Tensor kv(random_matrix(b, n, rng));
  Rng drop(0);

  AttentionDiag hard_diag;
  Tensor hard = masked_attention(q, kv, kv, params, thr, Mode::eval(), drop, &hard_diag);

  Mode soft_mode = Mode::eval();
  soft_mode.soft_mask = true;
  soft_mode.mask_tau = 1e-4;
  AttentionDiag soft_diag;
  Tensor soft = masked_attention(q, kv, kv, params, thr, soft_mode, drop, &soft_diag);

  // precondition: scores stay away from the threshold decision boundary
  double margin = 1e9;
  for (std::size_t h = 0; h < hard_diag.omega.size(); ++h)
    for (Index i = 0; i < b; ++i)
      for (Index j = 0; j < b; ++j) {
        const double w = soft_diag.omega[h](i, j);
        margin = std::min(margin, std::fabs(std::log(w / (1.0 - w))) * 1e-4);
      }
  REQUIRE(margin > 1e-3);

  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < n; ++j)
      CHECK(std::fabs(soft.value()(i, j) - hard.value()(i, j)) < 1e-3);
}

TEST_CASE("masked_attention: gradients reach projections, thresholds and inputs") {
  const Index b = 3, n = 4;
  Rng rng(21);
  MaskedAttentionParams params(n, 2, rng);
  ThresholdNet thr(n, 3, 2, rng);
  Tensor q(random_matrix(b, n, rng), true);
  Tensor kv(random_matrix(b, n, rng), true);
  Rng drop(0);
  auto loss = [&]() {
    Rng local(0);
    Tensor o = masked_attention(q, kv, kv, params, thr, Mode::smooth(), local);
    return sum_all(mul(o, o));
  };
  std::vector<std::pair<std::string, Tensor>> checked = {
      {"W_q", params.W_q}, {"W_v", params.W_v}, {"W_o", params.W_o},
      {"thr.W1", thr.W1},  {"thr.W2", thr.W2},  {"thr.b2", thr.b2},
      {"q", q},            {"kv", kv},
  };
  CHECK(grad_check_params(loss, checked, 1e-5) < 1e-5);
}

TEST_CASE("interact_granularities: zero W_o reduces every feature to its query input") {
  const Index b = 4, n1 = 5, n2 = 6, n = 4;
  Rng rng(31);
  EncodedBatch batch = make_batch(b, n1, n2, n, rng);
  MrcParams params({n1, n2, n}, n, 2, rng);
  for (InteractionPairParams* p :
       {&params.text_pair, &params.image_pair, &params.fine_cross, &params.coarse_cross}) {
    p->fwd.W_o.mutable_value().setZero();
    p->rev.W_o.mutable_value().setZero();
  }
  Rng drop(0);
  InteractionSet inter = interact_granularities(batch, params, Mode::eval(), drop);
  CHECK(inter.t_fc.value() == batch.text_fine.value());
  CHECK(inter.t_cf.value() == batch.text_coarse.value());
  CHECK(inter.i_fc.value() == batch.image_fine.value());
  CHECK(inter.i_cf.value() == batch.image_coarse.value());
  CHECK(inter.m_f1.value() == batch.text_fine.value());
  CHECK(inter.m_f2.value() == batch.image_fine.value());
  CHECK(inter.m_c1.value() == batch.text_coarse.value());
  CHECK(inter.m_c2.value() == batch.image_coarse.value());
}

TEST_CASE("interact_granularities: identical inputs and mirrored params coincide") {
  const Index b = 3, n1 = 5, n2 = 6, n = 4;
  Rng rng(41);
  EncodedBatch batch = make_batch(b, n1, n2, n, rng);
  batch.text_coarse = batch.text_fine;  // identical granularities
  MrcParams params({n1, n2, n}, n, 2, rng);
  // mirror the reverse direction onto the forward one
  params.text_pair.rev.W_q.mutable_value() = params.text_pair.fwd.W_q.value();
  params.text_pair.rev.W_k.mutable_value() = params.text_pair.fwd.W_k.value();
  params.text_pair.rev.W_v.mutable_value() = params.text_pair.fwd.W_v.value();
  params.text_pair.rev.W_o.mutable_value() = params.text_pair.fwd.W_o.value();
  force_threshold(params.text_pair.threshold, 0.0);
  Rng drop(0);
  InteractionSet inter = interact_granularities(batch, params, Mode::eval(), drop);
  CHECK(inter.t_fc.value() == inter.t_cf.value());
}

TEST_CASE("interact_granularities: all eight outputs are BxN") {
  const Index b = 3, n1 = 5, n2 = 6, n = 4;
  Rng rng(51);
  EncodedBatch batch = make_batch(b, n1, n2, n, rng);
  MrcParams params({n1, n2, n}, n, 2, rng);
  Rng drop(7);
  InteractionSet inter = interact_granularities(batch, params, Mode::train(), drop);
  for (const Tensor* t : {&inter.t_fc, &inter.t_cf, &inter.i_fc, &inter.i_cf, &inter.m_f1,
                          &inter.m_f2, &inter.m_c1, &inter.m_c2}) {
    CHECK(t->rows() == b);
    CHECK(t->cols() == n);
  }
}

TEST_CASE("projection_head: zero second layer and width contract") {
  const Index b = 3, n = 4;
  Rng rng(61);
  ProjectionHead head(9, n, n, rng);  // 5 + 4 wide input
  head.W2.mutable_value().setZero();
  Rng drop(0);
  Tensor a(random_matrix(b, 5, rng));
  Tensor c(random_matrix(b, 4, rng));
  Tensor out = head.forward(a, c, Mode::eval(), drop);
  CHECK(out.rows() == b);
  CHECK(out.cols() == n);
  CHECK(out.value().isZero(0.0));
}

TEST_CASE("projection_head: gradient check in eval mode") {
  const Index b = 4, n = 3;
  Rng rng(62);
  ProjectionHead head(6, n, n, rng);
  Tensor a(random_matrix(b, 3, rng));
  auto f = [&](const Tensor& t) {
    Rng local(0);
    Tensor c(Matrix(a.value()));
    return sum_all(mul(head.forward(t, c, Mode::smooth(), local),
                       head.forward(t, c, Mode::smooth(), local)));
  };
  Tensor x(random_matrix(b, 3, rng));
  CHECK(grad_check(f, x) < 1e-5);
}

TEST_CASE("iaff_fuse: equal inputs pass through bitwise") {
  const Index b = 4, n = 8;
  Rng rng(71);
  IaffParams params(n, kIaffReduction, rng);
  Tensor x(random_matrix(b, n, rng));
  Tensor y = x;
  Tensor out = iaff_fuse(x, y, params, Mode::eval());
  CHECK(out.value() == x.value());
}

TEST_CASE("iaff_fuse: zeroed gates average the inputs") {
  const Index b = 3, n = 6;
  Rng rng(72);
  IaffParams params(n, kIaffReduction, rng);
  zero_gates(params);
  Tensor x(random_matrix(b, n, rng));
  Tensor y(random_matrix(b, n, rng));
  Tensor out = iaff_fuse(x, y, params, Mode::eval());
  Matrix expect = 0.5 * (x.value() + y.value());
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < n; ++j)
      CHECK(std::fabs(out.value()(i, j) - expect(i, j)) < 1e-12);
}

TEST_CASE("iaff_fuse: output stays inside the elementwise envelope, 1e4 trials") {
  Rng rng(73);
  const Index b = 5, n = 20;
  IaffParams params(n, kIaffReduction, rng);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x(random_matrix(b, n, rng, 2.0));
    Tensor y(random_matrix(b, n, rng, 2.0));
    Matrix out = iaff_fuse(x, y, params, Mode::eval()).value();
    for (Index i = 0; i < b; ++i)
      for (Index j = 0; j < n; ++j) {
        const double lo = std::min(x.value()(i, j), y.value()(i, j));
        const double hi = std::max(x.value()(i, j), y.value()(i, j));
        CHECK(out(i, j) >= lo);
        CHECK(out(i, j) <= hi);
      }
  }
}

TEST_CASE("iaff_fuse: gradient check through both gate stages") {
  const Index b = 4, n = 4;
  Rng rng(74);
  IaffParams params(n, kIaffReduction, rng);
  // give the zero-initialized final normalizations nontrivial scale so the
  // check exercises their gradients too
  params.local1.bn2.gamma.mutable_value().setConstant(0.7);
  params.global2.bn2.gamma.mutable_value().setConstant(-0.4);
  Tensor y(random_matrix(b, n, rng));
  auto f = [&](const Tensor& t) {
    Tensor yy(Matrix(y.value()));
    return sum_all(mul(iaff_fuse(t, yy, params, Mode::smooth()),
                       iaff_fuse(t, yy, params, Mode::smooth())));
  };
  Tensor x(random_matrix(b, n, rng));
  CHECK(grad_check(f, x) < 1e-5);
}

TEST_CASE("mrc_forward: shapes, determinism, and the zeroed-weights identity") {
  const Index b = 4, n1 = 5, n2 = 6, n = 4;
  Rng rng(81);
  EncodedBatch batch = make_batch(b, n1, n2, n, rng);
  MrcParams params({n1, n2, n}, n, 2, rng);

  Rng d1(9), d2(9);
  auto [inter1, fused1] = mrc_forward(batch, params, Mode::eval(), d1);
  auto [inter2, fused2] = mrc_forward(batch, params, Mode::eval(), d2);
  for (const Tensor* t : {&fused1.t_prime, &fused1.i_prime, &fused1.m_prime}) {
    CHECK(t->rows() == b);
    CHECK(t->cols() == n);
  }
  CHECK(fused1.t_prime.value() == fused2.t_prime.value());
  CHECK(fused1.m_prime.value() == fused2.m_prime.value());

  // zero interaction outputs and gate layers: M^f collapses to the average of
  // its origin and interaction projections
  for (InteractionPairParams* p :
       {&params.text_pair, &params.image_pair, &params.fine_cross, &params.coarse_cross}) {
    p->fwd.W_o.mutable_value().setZero();
    p->rev.W_o.mutable_value().setZero();
  }
  for (IaffParams* ia : {&params.text_fuse, &params.image_fuse, &params.multi_fine_fuse,
                         &params.multi_coarse_fuse})
    zero_gates(*ia);
  Rng d3(9);
  auto [inter3, fused3] = mrc_forward(batch, params, Mode::eval(), d3);
  Rng d4(9);
  Tensor m1 = params.multi_fine_inter.forward(inter3.m_f1, inter3.m_f2, Mode::eval(), d4);
  Matrix expect = 0.5 * (fused3.m_o1.value() + m1.value());
  for (Index i = 0; i < b; ++i)
    for (Index j = 0; j < n; ++j)
      CHECK(std::fabs(fused3.m_f.value()(i, j) - expect(i, j)) < 1e-12);
}

TEST_CASE("mrc_forward is permutation-equivariant in eval mode") {
  const Index b = 5, n1 = 4, n2 = 6, n = 4;
  Rng rng(91);
  EncodedBatch batch = make_batch(b, n1, n2, n, rng);
  MrcParams params({n1, n2, n}, n, 2, rng);
  Rng d1(0);
  auto [inter, fused] = mrc_forward(batch, params, Mode::eval(), d1);

  const std::vector<Index> perm = {3, 1, 4, 0, 2};
  EncodedBatch shuffled;
  shuffled.text_fine_raw = gather_rows(batch.text_fine_raw, perm);
  shuffled.image_fine_raw = gather_rows(batch.image_fine_raw, perm);
  shuffled.text_fine = gather_rows(batch.text_fine, perm);
  shuffled.text_coarse = gather_rows(batch.text_coarse, perm);
  shuffled.image_fine = gather_rows(batch.image_fine, perm);
  shuffled.image_coarse = gather_rows(batch.image_coarse, perm);
  for (Index i : perm) shuffled.labels.push_back(batch.labels[static_cast<std::size_t>(i)]);

  Rng d2(0);
  auto [inter_p, fused_p] = mrc_forward(shuffled, params, Mode::eval(), d2);
  for (Index k = 0; k < b; ++k) {
    CHECK(fused_p.t_prime.value().row(k).isApprox(fused.t_prime.value().row(perm[static_cast<std::size_t>(k)]), 1e-12));
    CHECK(fused_p.m_prime.value().row(k).isApprox(fused.m_prime.value().row(perm[static_cast<std::size_t>(k)]), 1e-12));
  }
}
