#include <gtest/gtest.h>

#include <cmath>

#include "fwgd/nn.hpp"
#include "test_util.hpp"

using namespace fwgd;

namespace {

std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(classes));
  return y;
}

// Particle with nonzero biases so no ReLU sits exactly at its kink.
Particle random_particle(Rng& rng, std::vector<std::size_t> sizes) {
  Particle p = Particle::init(sizes, rng.next_u64(), 0);
  for (double& v : p.params()) v += 0.1 * rng.normal();
  return p;
}

}  // namespace

TEST(Particle, LayoutAndInit) {
  const std::vector<std::size_t> sizes{3, 5, 2};
  EXPECT_EQ(Particle::parameter_count(sizes), 3u * 5 + 5 + 5 * 2 + 2);
  const Particle a = Particle::init(sizes, 1, 0);
  const Particle b = Particle::init(sizes, 1, 0);
  const Particle c = Particle::init(sizes, 1, 1);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l]));
    for (std::size_t i = 0; i < sizes[l]; ++i)
      for (std::size_t o = 0; o < sizes[l + 1]; ++o) EXPECT_LE(std::abs(a.weight(l, i, o)), bound);
    for (std::size_t o = 0; o < sizes[l + 1]; ++o) EXPECT_EQ(a.bias(l, o), 0.0);
  }
}

TEST(Forward, FeaturesAreNonnegativeAndMatchHandComputation) {
  Particle p({2, 2}, Vector{1.0, -1.0, 2.0, 0.5, 0.1, -0.2});
  const Matrix x = Matrix::from_rows({{1.0, 1.0}, {-1.0, 0.0}});
  const Matrix h = forward_features(p, x).values;
  // h = relu(x·W + b), W = [[1,-1],[2,0.5]], b = [0.1,-0.2]
  EXPECT_DOUBLE_EQ(h(0, 0), 3.1);
  EXPECT_DOUBLE_EQ(h(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(h(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(h(1, 1), 0.8);
}

TEST(Likelihood, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 4, h = 5, c = 3;
    const Classifier head = Classifier::init(h, c, rng.next_u64(), 0);
    const Matrix feats = test::random_matrix(rng, b, h);
    const std::vector<int> y = random_labels(rng, b, c);
    const LikelihoodGrads g = loglik_and_grads(head, feats, y);

    auto f_feat = [&](const Vector& v) { return loglik_and_grads(head, Matrix(b, h, v), y).loglik; };
    EXPECT_LT(test::relative_error(g.g_feat.flat(), test::numeric_gradient(f_feat, feats.data())), 1e-7);

    auto f_theta = [&](const Vector& v) { return loglik_and_grads(Classifier(h, c, v), feats, y).loglik; };
    EXPECT_LT(test::relative_error(g.g_theta, test::numeric_gradient(f_theta, head.params())), 1e-7);

    const Matrix logits = classifier_logits(head, feats);
    auto f_logit = [&](const Vector& v) { return logit_loglik_and_grads(Matrix(b, c, v), y).loglik; };
    EXPECT_LT(test::relative_error(g.g_logit.flat(), test::numeric_gradient(f_logit, logits.data())), 1e-7);
  }
}

TEST(Likelihood, StableForLargeLogitsAndRejectsBadLabels) {
  const Matrix logits = Matrix::from_rows({{1000.0, 0.0}});
  const LogitGrads g = logit_loglik_and_grads(logits, std::vector<int>{0});
  EXPECT_TRUE(std::isfinite(g.loglik));
  EXPECT_NEAR(g.loglik, 0.0, 1e-12);
  EXPECT_THROW(logit_loglik_and_grads(logits, std::vector<int>{2}), std::invalid_argument);
  EXPECT_THROW(logit_loglik_and_grads(logits, std::vector<int>{-1}), std::invalid_argument);
}

TEST(Backprop, VectorJacobianProductMatchesFiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<std::size_t> sizes{3, 6, 4};
    const Particle p = random_particle(rng, sizes);
    const Matrix x = test::random_matrix(rng, 5, 3);
    const Matrix v = test::random_matrix(rng, 5, 4);
    const Vector vjp = backprop_to_weights(p, x, v);
    auto f = [&](const Vector& w) {
      const Matrix h = forward_features(Particle(sizes, w), x).values;
      return dot(h.flat(), v.flat());
    };
    EXPECT_LT(test::relative_error(vjp, test::numeric_gradient(f, p.params())), 1e-6);
  }
}

TEST(ClassifierBackward, AgreesWithLikelihoodGradients) {
  Rng rng(13);
  const Classifier head = Classifier::init(4, 3, 5, 0);
  const Matrix feats = test::random_matrix(rng, 6, 4);
  const std::vector<int> y = random_labels(rng, 6, 3);
  const LikelihoodGrads g = loglik_and_grads(head, feats, y);
  const ClassifierCotangents ct = classifier_backward(head, feats, g.g_logit);
  EXPECT_LT(test::max_abs_diff(ct.g_feat.flat(), g.g_feat.flat()), 1e-14);
  EXPECT_LT(test::max_abs_diff(ct.g_theta, g.g_theta), 1e-14);
}

TEST(Predict, SoftmaxAndEnsembleMean) {
  const Matrix p = softmax_rows(Matrix::from_rows({{0.0, 0.0}, {std::log(3.0), 0.0}}));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_NEAR(p(1, 0), 0.75, 1e-15);

  Rng rng(2);
  std::vector<Particle> ps{Particle::init({2, 3}, 1, 0), Particle::init({2, 3}, 1, 1)};
  const Classifier head = Classifier::init(3, 2, 1, 0);
  const Matrix x = test::random_matrix(rng, 4, 2);
  const Matrix shared = ensemble_predict(ps, head, x);
  const std::vector<Classifier> heads{head};
  const Matrix per = ensemble_predict(ps, std::span<const Classifier>(heads), x);
  EXPECT_LT(test::max_abs_diff(shared.flat(), per.flat()), 1e-15);
  const Matrix p0 = softmax_rows(classifier_logits(head, forward_features(ps[0], x).values));
  const Matrix p1 = softmax_rows(classifier_logits(head, forward_features(ps[1], x).values));
  for (std::size_t k = 0; k < shared.size(); ++k)
    EXPECT_NEAR(shared.flat()[k], 0.5 * (p0.flat()[k] + p1.flat()[k]), 1e-15);
}

TEST(Predict, CountCorrect) {
  const Matrix logits = Matrix::from_rows({{2, 1}, {0, 3}, {5, 1}});
  const LogitGrads g = logit_loglik_and_grads(logits, std::vector<int>{0, 1, 1});
  EXPECT_EQ(count_correct(g.g_logit, std::vector<int>{0, 1, 1}), 2u);
}
