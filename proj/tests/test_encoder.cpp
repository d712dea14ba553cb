#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"
#include "unilight/encoder.hpp"
#include "unilight/learn.hpp"

using namespace unilight;
using testing_support::Gen;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.tokens = 2;
  c.dim = 8;
  c.model_dim = 8;
  c.heads = 2;
  c.head_hidden = 5;
  c.backbone_dim = 6;
  c.text_tokens = 4;
  c.patch_grid = 2;
  return c;
}

template <class S>
Mat<S> random_mat(Gen& g, int r, int c) {
  Mat<S> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(g.normal());
  return m;
}

}  // namespace

TEST(StubBackbone, ShapesAndDeterminism) {
  Gen g(40);
  EncoderConfig c;
  const Image payload = g.image(64, 64, 9);
  const auto a = stub_backbone(payload, Modality::envmap, 3, c);
  const auto b = stub_backbone(payload, Modality::envmap, 3, c);
  EXPECT_EQ(a.tokens.rows(), 256);
  EXPECT_EQ(a.tokens.cols(), c.backbone_dim);
  EXPECT_EQ(a.tokens, b.tokens);
  const auto other_seed = stub_backbone(payload, Modality::envmap, 4, c);
  EXPECT_NE(a.tokens, other_seed.tokens);
  EXPECT_THROW(stub_backbone(g.image(60, 64, 3), Modality::image, 3, c), InvalidArgument);
}

TEST(StubBackbone, PatchLocality) {
  Gen g(41);
  const EncoderConfig c = tiny_config();
  Image payload = g.image(8, 8, 3);
  const auto before = stub_backbone(payload, Modality::image, 1, c);
  payload.at(6, 1, 0) += 1.0f;  // top-right patch, index 1
  const auto after = stub_backbone(payload, Modality::image, 1, c);
  for (int t = 0; t < 4; ++t) {
    if (t == 1) EXPECT_NE(before.tokens.row(t), after.tokens.row(t));
    else EXPECT_EQ(before.tokens.row(t), after.tokens.row(t));
  }
}

TEST(StubBackbone, TextCaseInsensitiveAndEmpty) {
  const EncoderConfig c = tiny_config();
  EXPECT_EQ(stub_backbone("Warm Light", 2, c).tokens, stub_backbone("warm light", 2, c).tokens);
  EXPECT_NE(stub_backbone("warm light", 2, c).tokens, stub_backbone("cold light", 2, c).tokens);
  const auto empty = stub_backbone("", 2, c);
  EXPECT_TRUE(empty.empty_input);
  EXPECT_EQ(empty.tokens.rows(), c.text_tokens);
  EXPECT_TRUE(empty.tokens.isZero());
}

TEST(EnvmapPayload, NineChannels) {
  Gen g(42);
  EquirectMap m(g.image(32, 16, 3, 0.0, 5.0));
  const Image p = envmap_payload(m);
  EXPECT_EQ(p.channels, 9);
  const Image dropped = envmap_payload(m, {}, true);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) {
      for (int c = 3; c < 6; ++c) EXPECT_EQ(dropped.at(x, y, c), 0.0f);
      EXPECT_NEAR(Vec3(p.at(x, y, 6), p.at(x, y, 7), p.at(x, y, 8)).norm(), 1.0, 1e-6);
    }
}

TEST(Params, DeterministicAndPerModality) {
  const EncoderConfig c = tiny_config();
  const auto a = init_params<float>(c, 5);
  const auto b = init_params<float>(c, 5);
  EXPECT_EQ(flatten_params<float>(a), flatten_params<float>(b));
  EXPECT_NE(a.fusion[0].w_key, a.fusion[1].w_key);
  EXPECT_NE(flatten_params<float>(a), flatten_params<float>(init_params<float>(c, 6)));
  EXPECT_TRUE(a.fusion[2].ln_gain.isOnes());
  EXPECT_TRUE(a.fusion[2].b_proj.isZero());
}

TEST(Params, ConfigValidation) {
  EncoderConfig c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(init_params<float>(c, 0), InvalidArgument);
}

TEST(Fusion, OutputShape) {
  Gen g(43);
  const EncoderConfig c = tiny_config();
  const auto p = init_params<float>(c, 1);
  FeatureSequence f{random_mat<float>(g, 7, c.backbone_dim), Modality::irradiance};
  const Embedding e = encode(p, f, "x");
  EXPECT_EQ(e.tokens.rows(), c.tokens);
  EXPECT_EQ(e.tokens.cols(), c.dim);
  EXPECT_EQ(e.modality, Modality::irradiance);
  EXPECT_EQ(e.id, "x");
  FeatureSequence wrong{random_mat<float>(g, 7, c.backbone_dim + 1), Modality::image};
  EXPECT_THROW(encode(p, wrong), InvalidArgument);
}

TEST(Fusion, PermutationInvariantOverBackboneTokens) {
  Gen g(44);
  const EncoderConfig c = tiny_config();
  const auto p = init_params<double>(c, 2);
  const Mat<double> f = random_mat<double>(g, 9, c.backbone_dim);
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), g.engine());
  Mat<double> shuffled(9, c.backbone_dim);
  for (int i = 0; i < 9; ++i) shuffled.row(i) = f.row(perm[i]);
  const auto a = fusion_forward<double>(p.fusion[1], c, f);
  const auto b = fusion_forward<double>(p.fusion[1], c, shuffled);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fusion, AttentionRowsSumToOne) {
  Gen g(45);
  const EncoderConfig c = tiny_config();
  const auto p = init_params<double>(c, 3);
  const Mat<double> f1 = random_mat<double>(g, 5, c.backbone_dim) * 10.0;
  const Mat<double> f2 = random_mat<double>(g, 3, c.backbone_dim);
  FusionCache<double> cache;
  fusion_forward_batch<double>(p.fusion[0], c, {&f1, &f2}, &cache);
  ASSERT_EQ(cache.attention.size(), 4u);
  for (const auto& a : cache.attention) {
    EXPECT_EQ(a.rows(), c.tokens);
    for (int i = 0; i < a.rows(); ++i) {
      EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-12);
      EXPECT_GE(a.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(Fusion, BatchMatchesSingleSample) {
  Gen g(46);
  const EncoderConfig c = tiny_config();
  const auto p = init_params<double>(c, 4);
  const Mat<double> f1 = random_mat<double>(g, 5, c.backbone_dim);
  const Mat<double> f2 = random_mat<double>(g, 8, c.backbone_dim);
  const auto stacked = fusion_forward_batch<double>(p.fusion[3], c, {&f1, &f2});
  EXPECT_LT((stacked.topRows(c.tokens) - fusion_forward<double>(p.fusion[3], c, f1)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((stacked.bottomRows(c.tokens) - fusion_forward<double>(p.fusion[3], c, f2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fusion, ZeroFeaturesGiveFiniteQueryOnlyOutput) {
  const EncoderConfig c = tiny_config();
  const auto p = init_params<float>(c, 5);
  const Embedding a = encode(p, stub_backbone("", 1, c));
  FeatureSequence zeros{Mat<float>::Zero(11, c.backbone_dim), Modality::text};
  const Embedding b = encode(p, zeros);
  EXPECT_TRUE(a.tokens.allFinite());
  EXPECT_LT((a.tokens - b.tokens).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(a.tokens.norm(), 0.0f);
}

TEST(ShHead, ZeroWeightsWithoutBiasGiveZero) {
  EncoderConfig c = tiny_config();
  c.head_bias = false;
  auto p = init_params<float>(c, 6);
  p.heads[0].w1.setZero();
  p.heads[0].w2.setZero();
  p.heads[0].b2.setConstant(3.0f);  // ignored without bias
  Gen g(47);
  const Embedding e{random_mat<float>(g, c.tokens, c.dim), Modality::image, ""};
  const ShCoefficients sh = predict_sh(p.heads[0], c, e);
  EXPECT_EQ(sh.norm(), 0.0);
}

TEST(ShHead, BiasOnlyOutput) {
  EncoderConfig c = tiny_config();
  auto p = init_params<float>(c, 6);
  p.heads[0].w2.setZero();
  for (int k = 0; k < 48; ++k) p.heads[0].b2(0, k) = static_cast<float>(k);
  Gen g(48);
  const ShCoefficients sh = predict_sh(p.heads[0], c, {random_mat<float>(g, c.tokens, c.dim), Modality::image, ""});
  EXPECT_EQ(sh(1, 2), 18.0);
  EXPECT_EQ(sh(2, 15), 47.0);
}

TEST(ShHead, RejectsWrongEmbeddingShape) {
  const EncoderConfig c = tiny_config();
  const auto p = init_params<float>(c, 6);
  Gen g(49);
  EXPECT_THROW(predict_sh(p.heads[0], c, {random_mat<float>(g, c.tokens, c.dim + 1), Modality::image, ""}),
               InvalidArgument);
}

TEST(Fusion, BackwardMatchesFiniteDifferences) {
  using S = long double;
  Gen g(50);
  const EncoderConfig c = tiny_config();
  const auto p0 = init_params<S>(c, 7);
  const Mat<S> f1 = random_mat<S>(g, 4, c.backbone_dim);
  const Mat<S> f2 = random_mat<S>(g, 3, c.backbone_dim);
  const Mat<S> weights = random_mat<S>(g, 2 * c.tokens, c.dim);  // loss = <out, weights> + head term
  const Mat<S> head_weights = random_mat<S>(g, 2, 3 * kShCount);

  auto loss = [&](const EncoderParams<S>& p) {
    const Mat<S> out = fusion_forward_batch<S>(p.fusion[0], c, {&f1, &f2});
    const Mat<S> sh = head_forward<S>(p.heads[0], c, out);
    return (out.array() * weights.array()).sum() + (sh.array() * head_weights.array()).sum();
  };

  EncoderParams<S> grads = p0.zeros_like();
  FusionCache<S> fc;
  const Mat<S> out = fusion_forward_batch<S>(p0.fusion[0], c, {&f1, &f2}, &fc);
  HeadCache<S> hc;
  head_forward<S>(p0.heads[0], c, out, &hc);
  const Mat<S> d_emb = head_backward<S>(p0.heads[0], c, hc, head_weights, grads.heads[0], out.rows(), out.cols());
  fusion_backward<S>(p0.fusion[0], c, fc, Mat<S>(weights + d_emb), grads.fusion[0]);

  const auto x0 = flatten_params<S>(p0);
  const auto analytic = flatten_params<S>(grads);
  std::function<S(std::span<const S>)> f = [&](std::span<const S> x) {
    EncoderParams<S> p = p0;
    scatter_params<S>(p, x);
    return loss(p);
  };
  const auto report = grad_check<S>(f, analytic, x0, 1e-6, S(1e-6));
  EXPECT_TRUE(report.passed) << report.max_relative_error << " at " << report.worst_index;
}
