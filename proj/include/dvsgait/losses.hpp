#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dvsgait/tensor.hpp"

namespace dvsgait {

// Fused descriptor with its retrieval identity.
struct GaitEmbedding {
  Tensor f_gait;
  int label = -1;
  std::string sample_id;
};

struct LossWeights {
  double lambda_d = 0.2;      // cross-modal alignment weight
  double triplet_margin = 0.2;

  void validate() const {
    if (lambda_d < 0.0)
      throw Error(ErrorKind::invalid_argument, "loss: lambda_d must be >= 0");
    if (triplet_margin < 0.0)
      throw Error(ErrorKind::invalid_argument, "loss: triplet margin must be >= 0");
  }
};

// -log softmax(logits)[label] with log-sum-exp stabilization. Fills the
// logit gradient (softmax - onehot) when requested.
inline double ce_loss(const Tensor& logits, std::size_t label, Tensor* grad = nullptr) {
  if (label >= logits.size())
    throw Error(ErrorKind::invalid_argument, "ce_loss: label out of range");
  double mx = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += std::exp(logits[i] - mx);
  const double lse = mx + std::log(z);
  if (grad) {
    grad->reshape({logits.size()});
    for (std::size_t i = 0; i < logits.size(); ++i)
      (*grad)[i] = std::exp(logits[i] - lse) - (i == label ? 1.0 : 0.0);
  }
  return lse - logits[label];
}

inline double euclidean(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Batch-hard triplet: per anchor, the farthest positive and nearest negative
// under Euclidean distance, hinged at the margin, averaged over anchors that
// have both a positive and a negative. Needs at least two identities and a
// repeated identity somewhere.
inline double triplet_loss(const std::vector<Tensor>& emb, const std::vector<int>& labels,
                           double margin, std::vector<Tensor>* grads = nullptr) {
  const std::size_t n = emb.size();
  if (n != labels.size() || n < 2)
    throw Error(ErrorKind::invalid_argument, "triplet: batch too small");
  bool has_two_ids = false;
  for (std::size_t i = 1; i < n; ++i)
    if (labels[i] != labels[0]) has_two_ids = true;
  if (!has_two_ids)
    throw Error(ErrorKind::degenerate_batch, "triplet: batch holds a single identity");

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = euclidean(emb[i], emb[j]);

  if (grads) {
    grads->assign(n, Tensor());
    for (std::size_t i = 0; i < n; ++i) (*grads)[i].reshape({emb[0].size()});
  }

  double loss = 0.0;
  std::size_t valid = 0;
  struct Active {
    std::size_t a, p, ng;
  };
  std::vector<Active> active;
  for (std::size_t a = 0; a < n; ++a) {
    double d_ap = -1.0, d_an = -1.0;
    std::size_t hardest_p = n, hardest_n = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (dist[a][j] > d_ap) {
          d_ap = dist[a][j];
          hardest_p = j;
        }
      } else if (d_an < 0.0 || dist[a][j] < d_an) {
        d_an = dist[a][j];
        hardest_n = j;
      }
    }
    if (hardest_p == n || hardest_n == n) continue;
    ++valid;
    const double h = d_ap - d_an + margin;
    if (h > 0.0) {
      loss += h;
      active.push_back({a, hardest_p, hardest_n});
    }
  }
  if (valid == 0)
    throw Error(ErrorKind::degenerate_batch, "triplet: no anchor has both positive and negative");
  loss /= static_cast<double>(valid);

  if (grads) {
    const double scale = 1.0 / static_cast<double>(valid);
    const std::size_t dim = emb[0].size();
    for (const Active& t : active) {
      // d||a-p|| contributions; a zero distance contributes no gradient
      if (dist[t.a][t.p] > 1e-12) {
        const double inv = scale / dist[t.a][t.p];
        for (std::size_t i = 0; i < dim; ++i) {
          const double d = (emb[t.a][i] - emb[t.p][i]) * inv;
          (*grads)[t.a][i] += d;
          (*grads)[t.p][i] -= d;
        }
      }
      if (dist[t.a][t.ng] > 1e-12) {
        const double inv = scale / dist[t.a][t.ng];
        for (std::size_t i = 0; i < dim; ++i) {
          const double d = (emb[t.a][i] - emb[t.ng][i]) * inv;
          (*grads)[t.a][i] -= d;
          (*grads)[t.ng][i] += d;
        }
      }
    }
  }
  return loss;
}

// L_total = L_ce + L_tri + lambda_d L_align
inline double total_loss(double ce, double tri, double align, const LossWeights& w) {
  if (!std::isfinite(ce) || !std::isfinite(tri) || !std::isfinite(align))
    throw Error(ErrorKind::numeric_error, "total_loss: non-finite term");
  return ce + tri + w.lambda_d * align;
}

}  // namespace dvsgait
