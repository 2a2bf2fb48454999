#include "racmc/mgc.hpp"

#include <algorithm>
#include <cmath>

namespace racmc {

LabelSplit LabelSplit::from_labels(const std::vector<int>& labels) {
  LabelSplit out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      out.positives.push_back(static_cast<Index>(i));
    else if (labels[i] == 0)
      out.negatives.push_back(static_cast<Index>(i));
    else
      throw data_error("LabelSplit: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " is not 0 (fake) or 1 (real)");
  }
  return out;
}

double median_heuristic_bandwidth(const Matrix& x, const Matrix& y) {
  Matrix z(x.rows() + y.rows(), x.cols());
  z.topRows(x.rows()) = x;
  z.bottomRows(y.rows()) = y;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(z.rows() * (z.rows() - 1) / 2));
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = i + 1; j < z.rows(); ++j)
      dists.push_back((z.row(i) - z.row(j)).norm());
  if (dists.empty()) return 1.0;
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? *mid : 1.0;
}

namespace {

// Pairwise squared distances |a_i - b_j|^2 as a differentiable graph.
Tensor pairwise_sq_dists(const Tensor& a, const Tensor& b) {
  Tensor gram = matmul(a, transpose(b));                         // [n x m]
  Tensor ra = row_sums(mul(a, a));                               // [n x 1]
  Tensor rb = row_sums(mul(b, b));                               // [m x 1]
  Tensor d = sub(add(broadcast_col(ra, b.rows()),
                     broadcast_row(transpose(rb), a.rows())),
                 mul_scalar(gram, 2.0));
  return d;
}

Tensor kernel_sum(const Tensor& a, const Tensor& b, double sigma) {
  Tensor k = exp(mul_scalar(pairwise_sq_dists(a, b), -1.0 / (2.0 * sigma * sigma)));
  return sum_all(k);
}

}  // namespace

MmdResult mmd_squared(const Tensor& x, const Tensor& y, double bandwidth) {
  MmdResult out;
  const Index n = x.rows();
  const Index m = y.rows();
  if (n == 0 || m == 0) {
    out.value = Tensor::scalar(0.0);
    out.degenerate = true;
    out.bandwidth = bandwidth > 0.0 ? bandwidth : 1.0;
    return out;
  }
  const double sigma =
      bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(x.value(), y.value());
  out.bandwidth = sigma;
  Tensor xx = mul_scalar(kernel_sum(x, x, sigma), 1.0 / static_cast<double>(n * n));
  Tensor xy = mul_scalar(kernel_sum(x, y, sigma), -2.0 / static_cast<double>(n * m));
  Tensor yy = mul_scalar(kernel_sum(y, y, sigma), 1.0 / static_cast<double>(m * m));
  out.value = add(add(xx, xy), yy);
  return out;
}

NewsOverallLoss news_overall_loss(const Tensor& m_prime, const LabelSplit& split,
                                  double bandwidth) {
  NewsOverallLoss out;
  if (split.positives.empty() || split.negatives.empty()) {
    out.value = Tensor::scalar(0.0);
    out.degenerate = true;
    out.bandwidth = bandwidth > 0.0 ? bandwidth : 1.0;
    return out;
  }
  Tensor pos = gather_rows(m_prime, split.positives);
  Tensor neg = gather_rows(m_prime, split.negatives);
  MmdResult mmd = mmd_squared(pos, neg, bandwidth);
  out.value = mul_scalar(mmd.value, -1.0);
  out.degenerate = mmd.degenerate;
  out.bandwidth = mmd.bandwidth;
  return out;
}

Tensor cosine_sim(const Tensor& x, const Tensor& y, bool* zero_flagged) {
  if (x.rows() != 1 || y.rows() != 1 || x.cols() != y.cols())
    throw shape_error("cosine_sim: expected two equal-length row vectors");
  Tensor dot = sum_all(mul(x, y));
  Tensor nx = sqrt(sum_all(mul(x, x)));
  Tensor ny = sqrt(sum_all(mul(y, y)));
  if (zero_flagged) *zero_flagged = nx.item() == 0.0 || ny.item() == 0.0;
  return div(dot, add_scalar(mul(nx, ny), 1e-12));
}

namespace {

// [n x m] matrix of cosine similarities between rows of a and rows of b,
// denominator floored exactly like cosine_sim.
Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  Tensor dots = matmul(a, transpose(b));
  Tensor na = sqrt(row_sums(mul(a, a)));  // [n x 1]
  Tensor nb = sqrt(row_sums(mul(b, b)));  // [m x 1]
  Tensor norm_prod = matmul(na, transpose(nb));
  return div(dots, add_scalar(norm_prod, 1e-12));
}

}  // namespace

NewsInternalLoss news_internal_loss(const Tensor& t_prime, const Tensor& i_prime,
                                    const LabelSplit& split) {
  NewsInternalLoss out;
  const Index bp = static_cast<Index>(split.positives.size());
  const Index bn = static_cast<Index>(split.negatives.size());

  if (bp == 0) {
    out.l_t = Tensor::scalar(0.0);
  } else {
    Tensor tp = gather_rows(t_prime, split.positives);
    Tensor ip = gather_rows(i_prime, split.positives);
    Tensor sims = cosine_matrix(tp, ip);  // [bp x bp]
    Tensor eye{Matrix(Matrix::Identity(bp, bp))};
    Tensor matched = sum_all(mul(sims, eye));
    Tensor pulled = mul_scalar(matched, -1.0 / static_cast<double>(bp));
    if (bp > 1) {
      Tensor mismatched = sub(sum_all(sims), matched);
      out.l_t = add(pulled, mul_scalar(mismatched, 1.0 / static_cast<double>(bp * (bp - 1))));
    } else {
      out.l_t = pulled;  // empty mismatch sum
    }
  }

  if (bn == 0) {
    out.l_f = Tensor::scalar(0.0);
  } else {
    Tensor tn = gather_rows(t_prime, split.negatives);
    Tensor in = gather_rows(i_prime, split.negatives);
    out.l_f = mul_scalar(sum_all(cosine_matrix(tn, in)), 1.0 / static_cast<double>(bn * bn));
  }

  out.value = add(out.l_t, out.l_f);
  return out;
}

}  // namespace racmc
