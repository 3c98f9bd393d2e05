#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "tsseg/errors.hpp"
#include "tsseg/gcn.hpp"
#include "tsseg/kernels.hpp"

using namespace tsseg;
using test::random_matrix;

namespace {

// Three well separated segments with one timestamp each.
struct Video {
  Matrix x;
  Labels gt;
  TimestampAnnotation ts;
  TemporalGraph graph;
};

Video separable_video(std::uint64_t seed, std::size_t d = 8) {
  Rng rng(seed);
  const Matrix means = random_matrix(3, d, rng, 0, 1);
  Video v;
  v.x = Matrix(60, d);
  for (std::size_t t = 0; t < 60; ++t) {
    const int c = static_cast<int>(t / 20);
    v.gt.push_back(c);
    for (std::size_t k = 0; k < d; ++k) v.x(t, k) = means(c, k) + 0.1 * rng.normal();
  }
  v.ts = {{7, 0}, {31, 1}, {50, 2}};
  v.graph = build_graph(v.x, 7, EdgeMode::weighted);
  return v;
}

}  // namespace

TEST(GcnInit, ShapesAndDeterminism) {
  const GcnParams a = gcn_init(64, 32, 10, GcnVariant::gcn, 5);
  EXPECT_EQ(a.w1.rows(), 64u);
  EXPECT_EQ(a.w1.cols(), 32u);
  EXPECT_EQ(a.w2.rows(), 32u);
  EXPECT_EQ(a.w2.cols(), 10u);
  const GcnParams b = gcn_init(64, 32, 10, GcnVariant::gcn, 5);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.w2, b.w2);
  const GcnParams c = gcn_init(64, 32, 10, GcnVariant::gcn, 6);
  EXPECT_NE(a.w1, c.w1);

  const double limit = std::sqrt(6.0 / (64 + 32));
  for (Real x : a.w1.values()) EXPECT_LE(std::abs(x), limit);
  EXPECT_EQ(a.adam1.m, Matrix(64, 32));
  EXPECT_THROW(gcn_init(0, 32, 3, GcnVariant::gcn, 1), ConfigError);
}

TEST(GcnForward, SingleFrameVariantsAgree) {
  Rng rng(41);
  const Matrix x = random_matrix(1, 6, rng, 0, 1);
  const TemporalGraph g = build_graph(x, 31, EdgeMode::weighted);
  const GcnParams p = gcn_init(6, 5, 3, GcnVariant::gcn, 2);
  GcnParams q = p;
  q.variant = GcnVariant::mlp;
  EXPECT_EQ(gcn_forward(p, g, x).probs, gcn_forward(q, g, x).probs);
}

TEST(GcnForward, ZeroFirstLayerGivesUniformProbs) {
  Rng rng(42);
  const Matrix x = random_matrix(7, 4, rng);
  GcnParams p = gcn_init(4, 5, 3, GcnVariant::gcn, 3);
  p.w1.fill(0);
  const GcnForwardTrace tr = gcn_forward(p, build_graph(x, 3, EdgeMode::binary), x);
  for (Real v : tr.probs.values()) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
}

TEST(GcnForward, MatchesCompositionalOracle) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(6, 5, rng);
    const TemporalGraph g = build_graph(x, 3, trial % 2 ? EdgeMode::binary : EdgeMode::weighted);
    const GcnParams p = gcn_init(5, 4, 3, GcnVariant::gcn, 100 + trial);
    const Matrix& a = g.norm_adj;
    const Matrix expected = row_softmax(matmul(matmul(a, relu(matmul(matmul(a, x), p.w1))), p.w2));
    const GcnForwardTrace tr = gcn_forward(p, g, x);
    EXPECT_LE(max_abs_diff(tr.probs, expected), 1e-9);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (Real v : tr.probs.row(i)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(GcnForward, MlpEqualsGcnOnIdentityGraph) {
  Rng rng(44);
  const Matrix x = random_matrix(12, 5, rng);
  const TemporalGraph identity = build_graph(x, 1, EdgeMode::binary);
  ASSERT_EQ(identity.norm_adj, Matrix::identity(12));
  const GcnParams p = gcn_init(5, 4, 3, GcnVariant::gcn, 7);
  GcnParams q = p;
  q.variant = GcnVariant::mlp;
  const TemporalGraph wide = build_graph(x, 31, EdgeMode::binary);
  const GcnForwardTrace a = gcn_forward(p, identity, x), b = gcn_forward(q, wide, x);
  EXPECT_EQ(a.h1, b.h1);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.probs, b.probs);
  // And the forward pass is deterministic.
  EXPECT_EQ(gcn_forward(p, wide, x).probs, gcn_forward(p, wide, x).probs);
}

TEST(GcnForward, ShapeMismatch) {
  Rng rng(45);
  const Matrix x = random_matrix(5, 4, rng);
  const GcnParams p = gcn_init(3, 4, 2, GcnVariant::gcn, 1);
  EXPECT_THROW(gcn_forward(p, build_graph(x, 3, EdgeMode::binary), x), ShapeError);
  const GcnParams q = gcn_init(4, 4, 2, GcnVariant::gcn, 1);
  EXPECT_THROW(gcn_forward(q, build_graph(random_matrix(6, 4, rng), 3, EdgeMode::binary), x), ShapeError);
}

TEST(GcnBackward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    const Matrix x = random_matrix(5, 4, rng);
    const TemporalGraph g = build_graph(x, 3, EdgeMode::weighted);
    const GcnParams p = gcn_init(4, 6, 3, seed % 2 ? GcnVariant::mlp : GcnVariant::gcn, seed);
    Labels labels(5, kUnlabeled);
    labels[1] = static_cast<int>(rng.index(0, 2));
    labels[4] = static_cast<int>(rng.index(0, 2));
    const LossWeights w;
    const GcnGradients grads = gcn_backward(p, g, x, gcn_forward(p, g, x), labels, w);

    const auto loss_with = [&](const Matrix& w1, const Matrix& w2) {
      GcnParams q = p;
      q.w1 = w1;
      q.w2 = w2;
      return graph_loss(gcn_forward(q, g, x).log_probs, labels, w).value;
    };
    EXPECT_LE(relative_error(grads.w1, finite_diff_grad([&](const Matrix& m) { return loss_with(m, p.w2); }, p.w1)),
              1e-4);
    EXPECT_LE(relative_error(grads.w2, finite_diff_grad([&](const Matrix& m) { return loss_with(p.w1, m); }, p.w2)),
              1e-4);
  }
}

TEST(GcnBackward, SingleLabelWithoutSmoothingIsCrossEntropy) {
  Rng rng(46);
  const Matrix x = random_matrix(5, 4, rng);
  const TemporalGraph g = build_graph(x, 3, EdgeMode::binary);
  const GcnParams p = gcn_init(4, 6, 3, GcnVariant::gcn, 9);
  const GcnForwardTrace tr = gcn_forward(p, g, x);
  const Labels labels{2, kUnlabeled, kUnlabeled, kUnlabeled, kUnlabeled};
  const GcnGradients a = gcn_backward(p, g, x, tr, labels, {.alpha = 0});
  EXPECT_NEAR(a.loss, -tr.log_probs(0, 2), 1e-12);

  // Cross-entropy of frame 0 alone: d/dlogits = probs - onehot on that row.
  Matrix dlogits(5, 3);
  for (std::size_t k = 0; k < 3; ++k) dlogits(0, k) = tr.probs(0, k) - (k == 2 ? 1 : 0);
  const Matrix d_hw2 = kernels::matmul(g.norm_adj, dlogits);
  EXPECT_LE(max_abs_diff(a.w2, matmul(transpose(tr.h1), d_hw2)), 1e-12);
}

TEST(GcnBackward, SmoothingGradientIsLinearInAlpha) {
  Rng rng(47);
  const Matrix x = random_matrix(8, 4, rng);
  const TemporalGraph g = build_graph(x, 5, EdgeMode::weighted);
  const GcnParams p = gcn_init(4, 6, 3, GcnVariant::gcn, 10);
  const GcnForwardTrace tr = gcn_forward(p, g, x);
  const Labels labels{0, kUnlabeled, 1, kUnlabeled, kUnlabeled, 2, kUnlabeled, kUnlabeled};
  const GcnGradients base = gcn_backward(p, g, x, tr, labels, {.alpha = 0});
  const GcnGradients one = gcn_backward(p, g, x, tr, labels, {.alpha = 0.15});
  const GcnGradients two = gcn_backward(p, g, x, tr, labels, {.alpha = 0.30});
  EXPECT_LE(max_abs_diff((two.w1 - base.w1), (one.w1 - base.w1) * Real(2)), 1e-12);
  EXPECT_LE(max_abs_diff((two.w2 - base.w2), (one.w2 - base.w2) * Real(2)), 1e-12);
  EXPECT_THROW(gcn_backward(p, g, x, tr, Labels(8, kUnlabeled), {}), AnnotationError);
}

TEST(GenerateLabels, OverrideAndTies) {
  EXPECT_EQ(labels_from_probs(Matrix(5, 4, 0.25), {{2, 2}}), (Labels{0, 0, 2, 0, 0}));
  const Matrix onehot{{0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}};
  EXPECT_EQ(labels_from_probs(onehot, {{1, 2}}), (Labels{1, 2, 2, 1}));
  EXPECT_EQ(labels_from_probs(onehot, {}), (Labels{1, 0, 2, 1}));
}

TEST(GenerateLabels, CoversEveryFrame) {
  const Video v = separable_video(48);
  const GcnParams p = gcn_init(8, 6, 3, GcnVariant::gcn, 1);
  const Labels y = generate_labels(p, v.graph, v.x, v.ts);
  ASSERT_EQ(y.size(), 60u);
  for (int c : y) {
    EXPECT_GE(c, 0);
    EXPECT_LT(c, 3);
  }
  for (const auto& t : v.ts) EXPECT_EQ(y[t.frame], t.label);
}

TEST(GcnTraining, DescendsOnSeparableData) {
  const Video v = separable_video(49);
  GcnParams p = gcn_init(8, 32, 3, GcnVariant::gcn, 2);
  gcn_configure_optimizer(p, {.lr = 0.01, .weight_decay = 0.0005});
  const GcnExample ex{&v.graph, &v.x, &v.ts};
  const LossWeights w;
  const double first = train_gcn_epoch(p, {&ex, 1}, w);
  double last = first;
  for (int e = 1; e < 300; ++e) last = train_gcn_epoch(p, {&ex, 1}, w);
  EXPECT_LT(last, first);
  const Labels y = generate_labels(p, v.graph, v.x, v.ts);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < 60; ++t) hits += y[t] == v.gt[t];
  EXPECT_GT(hits, 50u);
}

TEST(GcnTraining, ZeroLearningRateFreezesParameters) {
  const Video v = separable_video(50);
  GcnParams p = gcn_init(8, 6, 3, GcnVariant::gcn, 3);
  gcn_configure_optimizer(p, {.lr = 0, .weight_decay = 0.0005});
  const GcnParams before = p;
  const GcnExample ex{&v.graph, &v.x, &v.ts};
  const double first = train_gcn_epoch(p, {&ex, 1}, {});
  for (int e = 0; e < 5; ++e) EXPECT_EQ(train_gcn_epoch(p, {&ex, 1}, {}), first);
  EXPECT_EQ(p.w1, before.w1);
  EXPECT_EQ(p.w2, before.w2);
}

TEST(GcnTraining, DeterministicTrajectory) {
  std::vector<Video> videos;
  for (std::uint64_t s = 0; s < 11; ++s) videos.push_back(separable_video(60 + s));
  std::vector<GcnExample> batch;
  for (const auto& v : videos) batch.push_back({&v.graph, &v.x, &v.ts});
  const auto trajectory = [&] {
    GcnParams p = gcn_init(8, 6, 3, GcnVariant::gcn, 4);
    gcn_configure_optimizer(p, {.lr = 0.01});
    Rng order(77);
    std::vector<double> losses;
    for (int e = 0; e < 10; ++e) losses.push_back(train_gcn_epoch(p, batch, {}, 8, &order));
    return std::make_pair(losses, p.w1);
  };
  const auto a = trajectory(), b = trajectory();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(GcnTraining, MinibatchAveragesVideoGradients) {
  const Video u = separable_video(70), v = separable_video(71);
  GcnParams p = gcn_init(8, 6, 3, GcnVariant::gcn, 5);
  gcn_configure_optimizer(p, {.lr = 0.01});
  GcnParams q = p;
  const std::vector<GcnExample> batch{{&u.graph, &u.x, &u.ts}, {&v.graph, &v.x, &v.ts}};
  train_gcn_epoch(p, batch, {}, 8);

  const LossWeights w;
  const GcnGradients gu = gcn_backward(q, u.graph, u.x, gcn_forward(q, u.graph, u.x), sparse_labels(u.ts, 60), w);
  const GcnGradients gv = gcn_backward(q, v.graph, v.x, gcn_forward(q, v.graph, v.x), sparse_labels(v.ts, 60), w);
  adam_step(q.w1, (gu.w1 + gv.w1) * Real(0.5), q.adam1);
  adam_step(q.w2, (gu.w2 + gv.w2) * Real(0.5), q.adam2);
  EXPECT_LE(max_abs_diff(p.w1, q.w1), 1e-12);
  EXPECT_LE(max_abs_diff(p.w2, q.w2), 1e-12);
}

TEST(GcnCheckpoint, RoundTripAndRejections) {
  const GcnParams p = gcn_init(5, 4, 3, GcnVariant::mlp, 11);
  const auto bytes = encode_gcn(p);
  ASSERT_EQ(bytes.size(), 4u + 4 + 12 + 1 + 8 * (20 + 12));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TSGC");
  const GcnParams q = decode_gcn(bytes);
  EXPECT_EQ(q.w1, p.w1);
  EXPECT_EQ(q.w2, p.w2);
  EXPECT_EQ(q.variant, GcnVariant::mlp);

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_gcn(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_gcn(trailing), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_gcn(bad_magic), FormatError);
  auto bad_variant = bytes;
  bad_variant[20] = 7;
  EXPECT_THROW(decode_gcn(bad_variant), FormatError);
}
