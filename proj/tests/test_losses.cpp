#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "dvsgait/checkpoint.hpp"
#include "dvsgait/losses.hpp"
#include "dvsgait/optim.hpp"

using namespace dvsgait;

namespace {

std::vector<Tensor> random_embeddings(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor e({dim});
    e.fill_uniform(rng, -1.0, 1.0);
    out.push_back(std::move(e));
  }
  return out;
}

// exhaustive batch-hard reference: enumerate every (anchor, positive,
// negative) triple and keep the hardest pair per anchor
double brute_force_batch_hard(const std::vector<Tensor>& emb, const std::vector<int>& labels,
                              double margin) {
  const std::size_t n = emb.size();
  double loss = 0.0;
  std::size_t valid = 0;
  for (std::size_t a = 0; a < n; ++a) {
    double worst_pos = -1.0, best_neg = -1.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t ng = 0; ng < n; ++ng) {
        if (labels[ng] == labels[a]) continue;
        worst_pos = std::max(worst_pos, euclidean(emb[a], emb[p]));
        best_neg = best_neg < 0.0 ? euclidean(emb[a], emb[ng])
                                  : std::min(best_neg, euclidean(emb[a], emb[ng]));
      }
    }
    if (worst_pos < 0.0 || best_neg < 0.0) continue;
    ++valid;
    loss += std::max(0.0, worst_pos - best_neg + margin);
  }
  return loss / static_cast<double>(valid);
}

}  // namespace

TEST_CASE("ce_loss", "[losses]") {
  SECTION("uniform logits give ln C") {
    Tensor logits({5});
    logits.fill(0.7);
    CHECK(ce_loss(logits, 2) == Catch::Approx(std::log(5.0)).margin(1e-12));
  }

  SECTION("a saturated true logit gives ~0") {
    Tensor logits({4});
    logits[1] = 1000.0;
    CHECK(ce_loss(logits, 1) < 1e-6);
  }

  SECTION("matches the shifted scalar reference, extremes included") {
    Rng rng(61);
    for (int trial = 0; trial < 30; ++trial) {
      Tensor logits({6});
      logits.fill_uniform(rng, -1e4, 1e4);
      const std::size_t label = rng.below(6);
      double mx = logits[0];
      for (std::size_t i = 1; i < 6; ++i) mx = std::max(mx, logits[i]);
      double z = 0.0;
      for (std::size_t i = 0; i < 6; ++i) z += std::exp(logits[i] - mx);
      const double ref = -(logits[label] - mx - std::log(z));
      const double got = ce_loss(logits, label);
      REQUIRE(std::isfinite(got));
      REQUIRE(got == Catch::Approx(ref).margin(1e-10));
    }
  }

  SECTION("gradient is softmax minus one-hot and matches finite differences") {
    Rng rng(67);
    Tensor logits({5});
    logits.fill_uniform(rng, -2.0, 2.0);
    Tensor grad;
    ce_loss(logits, 3, &grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 5; ++i) {
      Tensor lp = logits, lm = logits;
      lp[i] += h;
      lm[i] -= h;
      const double fd = (ce_loss(lp, 3) - ce_loss(lm, 3)) / (2.0 * h);
      REQUIRE(grad[i] == Catch::Approx(fd).margin(1e-8));
    }
  }

  SECTION("label out of range rejected") {
    Tensor logits({3});
    CHECK_THROWS_AS(ce_loss(logits, 3), Error);
  }
}

TEST_CASE("triplet_loss", "[losses]") {
  const double margin = 0.3;

  SECTION("identical embeddings leave the margin") {
    std::vector<Tensor> emb(4, Tensor({3}));
    std::vector<int> labels{0, 0, 1, 1};
    CHECK(triplet_loss(emb, labels, margin) == Catch::Approx(margin).margin(1e-12));
  }

  SECTION("well-separated clusters give zero") {
    std::vector<Tensor> emb;
    std::vector<int> labels;
    Rng rng(71);
    for (int i = 0; i < 4; ++i) {
      Tensor e({3});
      e.fill_uniform(rng, 0.0, 0.01);
      e[0] += (i < 2) ? 0.0 : 10.0;
      emb.push_back(std::move(e));
      labels.push_back(i < 2 ? 0 : 1);
    }
    CHECK(triplet_loss(emb, labels, margin) == 0.0);
  }

  SECTION("matches the exhaustive enumeration oracle") {
    Rng rng(73);
    for (int trial = 0; trial < 10; ++trial) {
      auto emb = random_embeddings(rng, 8, 4);
      std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1};
      const double ref = brute_force_batch_hard(emb, labels, margin);
      CHECK(triplet_loss(emb, labels, margin) == Catch::Approx(ref).margin(1e-10));
    }
  }

  SECTION("single identity is a degenerate batch") {
    Rng rng(79);
    auto emb = random_embeddings(rng, 4, 3);
    std::vector<int> labels{2, 2, 2, 2};
    CHECK_THROWS_AS(triplet_loss(emb, labels, margin), Error);
  }

  SECTION("invariant under a rigid rotation of all embeddings") {
    Rng rng(83);
    auto emb = random_embeddings(rng, 8, 4);
    std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
    const double base = triplet_loss(emb, labels, margin);

    // random orthogonal matrix via Gram-Schmidt on a Gaussian matrix
    std::vector<std::vector<double>> q(4, std::vector<double>(4));
    for (auto& row : q)
      for (auto& v : row) v = rng.normal();
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < 4; ++k) dot += q[i][k] * q[j][k];
        for (std::size_t k = 0; k < 4; ++k) q[i][k] -= dot * q[j][k];
      }
      double norm = 0.0;
      for (double v : q[i]) norm += v * v;
      norm = std::sqrt(norm);
      for (auto& v : q[i]) v /= norm;
    }
    std::vector<Tensor> rotated;
    for (const Tensor& e : emb) {
      Tensor r({4});
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 4; ++k) r[i] += q[i][k] * e[k];
      rotated.push_back(std::move(r));
    }
    CHECK(triplet_loss(rotated, labels, margin) == Catch::Approx(base).margin(1e-9));
  }

  SECTION("gradients match finite differences") {
    Rng rng(89);
    auto emb = random_embeddings(rng, 6, 3);
    std::vector<int> labels{0, 0, 1, 1, 2, 2};
    std::vector<Tensor> grads;
    triplet_loss(emb, labels, margin, &grads);
    const double h = 1e-6;
    for (std::size_t s = 0; s < emb.size(); ++s)
      for (std::size_t i = 0; i < 3; ++i) {
        auto ep = emb, em = emb;
        ep[s][i] += h;
        em[s][i] -= h;
        const double fd =
            (triplet_loss(ep, labels, margin) - triplet_loss(em, labels, margin)) / (2.0 * h);
        REQUIRE(grads[s][i] == Catch::Approx(fd).margin(1e-6));
      }
  }
}

TEST_CASE("total_loss", "[losses]") {
  LossWeights w;
  w.lambda_d = 0.2;  // ablation optimum
  CHECK(total_loss(1.0, 0.5, 2.0, w) == Catch::Approx(1.9).margin(1e-12));
  w.lambda_d = 0.0;
  CHECK(total_loss(1.0, 0.5, 123.0, w) == Catch::Approx(1.5).margin(1e-12));
  CHECK_THROWS_AS(total_loss(std::nan(""), 0.0, 0.0, w), Error);
}

TEST_CASE("sgd_step", "[optim]") {
  SECTION("zero gradient with zero decay leaves parameters unchanged") {
    Rng rng(91);
    Tensor p({3}), g({3});
    p.fill_uniform(rng, -1.0, 1.0);
    Tensor before = p;
    SgdOptimizer opt(0.1, 0.0, 0.9);
    ParamList params{{"p", &p, &g}};
    opt.step(params);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(p[i] == before[i]);
  }

  SECTION("single scalar arithmetic") {
    Tensor p({1}), g({1});
    p[0] = 1.0;
    g[0] = 1.0;
    SgdOptimizer opt(0.1, 0.0, 0.0);
    ParamList params{{"p", &p, &g}};
    opt.step(params);
    CHECK(p[0] == Catch::Approx(0.9).margin(1e-15));
  }

  SECTION("three momentum steps match the hand-unrolled recurrence") {
    Tensor p({1}), g({1});
    p[0] = 1.0;
    const double lr = 0.05, wd = 0.01, mu = 0.9;
    SgdOptimizer opt(lr, wd, mu);
    ParamList params{{"p", &p, &g}};
    double rp = 1.0, rv = 0.0;
    for (int it = 0; it < 3; ++it) {
      const double grad = 0.3 + 0.1 * it;
      g[0] = grad;
      opt.step(params);
      const double rg = grad + wd * rp;
      rv = mu * rv + rg;
      rp -= lr * rv;
      REQUIRE(p[0] == Catch::Approx(rp).margin(1e-12));
    }
  }

  SECTION("lr = 0 keeps every parameter bit-identical") {
    Rng rng(97);
    Tensor p({5}), g({5});
    p.fill_uniform(rng, -1.0, 1.0);
    g.fill_uniform(rng, -1.0, 1.0);
    Tensor before = p;
    SgdOptimizer opt(0.0, 0.0005, 0.9);
    ParamList params{{"p", &p, &g}};
    opt.step(params);
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(p[i] == before[i]);
  }

  SECTION("non-finite gradient aborts the step") {
    Tensor p({2}), g({2});
    g[1] = std::numeric_limits<double>::quiet_NaN();
    SgdOptimizer opt(0.1, 0.0, 0.0);
    ParamList params{{"p", &p, &g}};
    CHECK_THROWS_AS(opt.step(params), Error);
  }
}

TEST_CASE("checkpoint container", "[checkpoint]") {
  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "dvsgait_tests" / "model.ckpt").string();
  fs::create_directories(fs::temp_directory_path() / "dvsgait_tests");

  Rng rng(101);
  Tensor a({3, 4});
  a.fill_uniform(rng, -1.0, 1.0);
  Tensor b({5});
  b.fill_uniform(rng, -1.0, 1.0);

  std::vector<CheckpointBlob> blobs;
  blobs.push_back(blob_from_tensor("layer/w", a));
  blobs.push_back(blob_from_tensor("layer/b", b));
  blobs.push_back(blob_from_text("meta/config", "lr=0.1\nstreams=dual\n"));
  save_checkpoint(blobs, path);

  auto back = load_checkpoint(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].name == "layer/w");
  CHECK(back[0].dims == std::vector<std::uint32_t>{3, 4});
  CHECK(text_from_blob(back[2]) == "lr=0.1\nstreams=dual\n");

  Tensor a2({3, 4}), b2({5});
  Tensor ga({3, 4}), gb({5});
  ParamList params{{"layer/w", &a2, &ga}, {"layer/b", &b2, &gb}};
  restore_params(params, back);
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(a2[i] == Catch::Approx(a[i]).margin(1e-6));

  SECTION("missing parameter is a data error") {
    Tensor c({2}), gc({2});
    ParamList more{{"layer/missing", &c, &gc}};
    CHECK_THROWS_AS(restore_params(more, back), Error);
  }
}
