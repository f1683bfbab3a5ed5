#include "dlab/engine.hpp"

#include <gtest/gtest.h>

#include "dlab/objectives.hpp"

using namespace dlab;

TEST(LrSchedule, WarmupAndCosineTail) {
  const double peak = 0.3;
  EXPECT_DOUBLE_EQ(lr_at(1000, 5000, peak), peak);
  EXPECT_NEAR(lr_at(5000, 5000, peak), 0.05 * peak, 1e-15);
  EXPECT_DOUBLE_EQ(lr_at(500, 5000, peak), 0.5 * peak);
  EXPECT_DOUBLE_EQ(lr_at(0, 5000, peak), 0.0);
  EXPECT_THROW(lr_at(5001, 5000, peak), std::invalid_argument);
}

TEST(LrSchedule, MonotoneDecayAfterWarmup) {
  double prev = lr_at(1000, 4000, 1.0);
  for (int t = 1001; t <= 4000; ++t) {
    double cur = lr_at(t, 4000, 1.0);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(ClipGlobal, SmallVectorUnchanged) {
  std::vector<double> g = {0.3, 0.4};  // norm 0.5
  EXPECT_EQ(clip_global(g, 1.0), g);
}

TEST(ClipGlobal, LargeVectorScaled) {
  std::vector<double> g = {0.0, 4.0};  // norm 4
  auto c = clip_global(g, 1.0);
  EXPECT_DOUBLE_EQ(c[1], 1.0);
  EXPECT_DOUBLE_EQ(c[0], 0.0);
}

TEST(ClipGlobal, NormBoundHolds) {
  auto rng = make_rng(11);
  std::normal_distribution<double> n01(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> g(10);
    for (double& v : g) v = n01(rng);
    auto c = clip_global(g, 1.0);
    EXPECT_LE(l2_norm(c), 1.0 + 1e-12);
  }
  std::vector<double> zero(5, 0.0);
  EXPECT_EQ(clip_global(zero, 1.0), zero);
}

TEST(AdamW, ZeroGradientNoDecayLeavesThetaFixed) {
  ReplicaState st({1.0, -2.0, 3.0}, 0);
  Hyperparams hp;
  hp.weight_decay = 0.0;
  auto before = st.theta;
  adamw_step(st, {0.0, 0.0, 0.0}, 0.1, hp);
  EXPECT_EQ(st.theta, before);
}

TEST(AdamW, FirstStepIsSignedLrStep) {
  // Bias-corrected first step from zero moments: theta moves by
  // lr * g / (|g| + eps) = lr * sign(g), up to eps.
  ReplicaState st({0.0, 0.0}, 0);
  Hyperparams hp;
  hp.weight_decay = 0.0;
  adamw_step(st, {0.5, -2.0}, 0.01, hp);
  EXPECT_NEAR(st.theta[0], -0.01, 1e-6);
  EXPECT_NEAR(st.theta[1], 0.01, 1e-6);
}

TEST(AdamW, DecoupledWeightDecayShrinksTheta) {
  const double t_total = 100.0;
  ReplicaState st({2.0}, 0);
  Hyperparams hp;
  hp.weight_decay = 1.0 / t_total;
  adamw_step(st, {0.0}, 0.1, hp);
  EXPECT_NEAR(st.theta[0], 2.0 - 0.1 * 2.0 / t_total, 1e-15);
}

TEST(AdamW, RejectsNonFiniteGradient) {
  ReplicaState st({0.0}, 0);
  Hyperparams hp;
  EXPECT_THROW(adamw_step(st, {std::nan("")}, 0.1, hp), std::domain_error);
}

TEST(OuterGradient, ZeroWhenReplicasEqualGlobal) {
  std::vector<double> prev = {1.0, 2.0};
  std::vector<double> r1 = prev, r2 = prev;
  auto d = outer_gradient(prev, {&r1, &r2});
  EXPECT_EQ(d, std::vector<double>({0.0, 0.0}));
}

TEST(OuterGradient, SingleReplicaDifference) {
  std::vector<double> prev = {1.0, 2.0};
  std::vector<double> r1 = {0.5, 3.0};
  auto d = outer_gradient(prev, {&r1});
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], -1.0);
}

TEST(OuterGradient, SymmetricPerturbationsCancel) {
  std::vector<double> prev = {1.0, -1.0};
  std::vector<double> u = {0.3, 0.7};
  std::vector<double> r1 = {prev[0] + u[0], prev[1] + u[1]};
  std::vector<double> r2 = {prev[0] - u[0], prev[1] - u[1]};
  auto d = outer_gradient(prev, {&r1, &r2});
  EXPECT_NEAR(d[0], 0.0, 1e-15);
  EXPECT_NEAR(d[1], 0.0, 1e-15);
}

TEST(OuterGradient, RejectsEmptyReplicaList) {
  std::vector<double> prev = {1.0};
  EXPECT_THROW(outer_gradient(prev, {}), std::invalid_argument);
}

TEST(NesterovOuter, PlainAveragingReduction) {
  // mu = 0, eta = 1: theta becomes the replica mean.
  std::vector<double> prev = {1.0, 1.0};
  std::vector<double> r1 = {2.0, 0.0};
  std::vector<double> r2 = {4.0, 2.0};
  OuterState outer(prev);
  auto delta = outer_gradient(prev, {&r1, &r2});
  nesterov_outer_step(outer, delta, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(outer.theta[0], 3.0);
  EXPECT_DOUBLE_EQ(outer.theta[1], 1.0);
}

TEST(NesterovOuter, ZeroDeltaZeroBufIsNoOp) {
  OuterState outer({1.0, 2.0});
  nesterov_outer_step(outer, {0.0, 0.0}, 0.7, 0.9);
  EXPECT_EQ(outer.theta, std::vector<double>({1.0, 2.0}));
}

TEST(NesterovOuter, TwoStepRecursionWithConstantDelta) {
  // Sutskever form, mu = 0.9, eta = 1, constant delta d:
  //   step 1: buf = d,            theta -= (d + 0.9 d)      = 1.9 d
  //   step 2: buf = 0.9 d + d,    theta -= (d + 0.9*1.9 d)  = 2.71 d
  OuterState outer({0.0});
  nesterov_outer_step(outer, {1.0}, 1.0, 0.9);
  EXPECT_NEAR(outer.theta[0], -1.9, 1e-15);
  nesterov_outer_step(outer, {1.0}, 1.0, 0.9);
  EXPECT_NEAR(outer.theta[0], -1.9 - 2.71, 1e-12);
}

TEST(ShardBatch, IdentityForSingleReplica) {
  Batch b;
  b.count = 4;
  b.sample_dim = 2;
  b.features = {1, 2, 3, 4, 5, 6, 7, 8};
  auto shards = shard_batch(b, 1);
  ASSERT_EQ(shards.size(), 1u);
  EXPECT_EQ(shards[0].features, b.features);
}

TEST(ShardBatch, DisjointUnionEqualsInput) {
  auto obj = NoisyQuadratic::standard(3, 1.0);
  for (int m : {2, 4}) {
    for (std::size_t count : {8u, 16u}) {
      Batch b = obj.sample(stream_key(9, "shard", m * 100 + count), count);
      auto shards = shard_batch(b, m);
      ASSERT_EQ(shards.size(), static_cast<std::size_t>(m));
      std::vector<double> merged;
      for (const auto& s : shards) {
        EXPECT_EQ(s.count, count / m);
        merged.insert(merged.end(), s.features.begin(), s.features.end());
      }
      EXPECT_EQ(merged, b.features);
    }
  }
}

TEST(ShardBatch, RejectsIndivisibleBatch) {
  Batch b;
  b.count = 7;
  b.sample_dim = 1;
  b.features.assign(7, 0.0);
  EXPECT_THROW(shard_batch(b, 2), std::invalid_argument);
}

namespace {

RunConfig quadratic_config(Algorithm algo, int m, int h, std::uint64_t seed) {
  RunConfig cfg;
  cfg.algorithm = algo;
  cfg.n = 8;
  cfg.tokens_d = 1600;  // 200 steps at batch 8
  cfg.hp.global_batch = 8;
  cfg.hp.replicas = m;
  cfg.hp.cadence = h;
  cfg.hp.inner_lr = 0.05;
  cfg.hp.warmup_steps = 10;
  cfg.seed = seed;
  cfg.eval_batch = 16;
  return cfg;
}

}  // namespace

TEST(Train, TokenAccountingInvariant) {
  auto obj = NoisyQuadratic::standard(8, 0.5);
  auto rec = train(obj, quadratic_config(Algorithm::kDataParallel, 1, 1, 3));
  EXPECT_GE(rec.t_steps * rec.b, rec.tokens_d);
  EXPECT_LT((rec.t_steps - 1) * rec.b, rec.tokens_d);
  EXPECT_DOUBLE_EQ(rec.weight_decay, 1.0 / rec.t_steps);
  EXPECT_EQ(rec.final_loss, rec.loss_curve.back().second);
}

TEST(Train, HalvingBatchDoublesStepsAndHalvesWeightDecay) {
  auto obj = NoisyQuadratic::standard(8, 0.5);
  auto cfg1 = quadratic_config(Algorithm::kDataParallel, 1, 1, 3);
  auto cfg2 = cfg1;
  cfg2.hp.global_batch = 4;
  auto r1 = train(obj, cfg1);
  auto r2 = train(obj, cfg2);
  EXPECT_EQ(r2.t_steps, 2 * r1.t_steps);
  EXPECT_DOUBLE_EQ(r2.weight_decay, 0.5 * r1.weight_decay);
}

TEST(Train, DeterministicAcrossRuns) {
  auto obj = NoisyQuadratic::standard(8, 0.5);
  auto cfg = quadratic_config(Algorithm::kDiLoCo, 2, 5, 12);
  auto r1 = train(obj, cfg);
  auto r2 = train(obj, cfg);
  EXPECT_EQ(r1.final_theta, r2.final_theta);
  EXPECT_EQ(r1.loss_curve, r2.loss_curve);
}

TEST(Train, SequentialAndParallelReplicasAgreeBitwise) {
  auto obj = NoisyQuadratic::standard(8, 0.5);
  auto cfg = quadratic_config(Algorithm::kDiLoCo, 4, 10, 21);
  cfg.parallel_replicas = false;
  auto seq = train(obj, cfg);
  cfg.parallel_replicas = true;
  auto par = train(obj, cfg);
  EXPECT_EQ(seq.final_theta, par.final_theta);
  EXPECT_EQ(seq.loss_curve, par.loss_curve);
}

TEST(Train, DiLoCoM1H1ReducesToDataParallel) {
  auto obj = NoisyQuadratic::standard(8, 0.5);
  auto dp = train(obj, quadratic_config(Algorithm::kDataParallel, 1, 1, 5));
  auto cfg = quadratic_config(Algorithm::kDiLoCo, 1, 1, 5);
  cfg.hp.outer_lr = 1.0;
  cfg.hp.outer_momentum = 0.0;
  auto dl = train(obj, cfg);
  ASSERT_EQ(dp.final_theta.size(), dl.final_theta.size());
  for (std::size_t i = 0; i < dp.final_theta.size(); ++i) {
    EXPECT_NEAR(dl.final_theta[i], dp.final_theta[i],
                1e-6 * std::max(1.0, std::abs(dp.final_theta[i])));
  }
}

TEST(Train, IdenticalShardsMatchSingleReplica) {
  // Deterministic full-batch objective (sigma 0): every replica sees the same
  // zero-noise batch, so DiLoCo(M=2, H=1, eta=1, mu=0) averages identical
  // replicas and matches M=1.
  auto obj = NoisyQuadratic::standard(6, 0.0);
  auto cfg1 = quadratic_config(Algorithm::kDiLoCo, 1, 1, 8);
  cfg1.hp.outer_lr = 1.0;
  cfg1.hp.outer_momentum = 0.0;
  cfg1.n = 6;
  auto cfg2 = cfg1;
  cfg2.hp.replicas = 2;
  auto r1 = train(obj, cfg1);
  auto r2 = train(obj, cfg2);
  for (std::size_t i = 0; i < r1.final_theta.size(); ++i) {
    EXPECT_NEAR(r2.final_theta[i], r1.final_theta[i], 1e-12);
  }
}

TEST(Train, ConvergesTowardQuadraticOptimum) {
  auto obj = NoisyQuadratic::standard(8, 0.1);
  auto cfg = quadratic_config(Algorithm::kDataParallel, 1, 1, 2);
  cfg.tokens_d = 8000;  // 1000 steps
  auto rec = train(obj, cfg);
  EXPECT_LT(rec.final_loss, 0.05);
  EXPECT_LT(rec.final_loss, rec.loss_curve.front().second);
}

TEST(Train, RejectsIndivisibleGlobalBatch) {
  auto obj = NoisyQuadratic::standard(8, 0.5);
  auto cfg = quadratic_config(Algorithm::kDiLoCo, 3, 5, 2);  // 8 % 3 != 0
  EXPECT_THROW(train(obj, cfg), std::invalid_argument);
}
