// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "relmusic/errors.hpp"
#include "relmusic/model/checkpoint.hpp"
#include "relmusic/model/decoder.hpp"
#include "relmusic/model/gradcheck.hpp"
#include "relmusic/model/optimizer.hpp"
#include "relmusic/model/sampler.hpp"
#include "relmusic/model/trainer.hpp"
#include "test_util.hpp"

using namespace relmusic;
using namespace relmusic::model;
using namespace relmusic::testing;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 130;
  c.max_len = 8;
  c.depth = 8;
  c.heads = 2;
  c.layers = 2;
  c.feedforward_size = 16;
  c.dropout = 0.0;
  c.relative_max_distance = 4;
  c.use_pitch_time_relative = true;
  c.max_time_distance = 2;
  c.max_pitch_interval = 3;
  return c;
}

ModelConfig small_config(std::size_t vocab, std::size_t max_len) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.max_len = max_len;
  c.depth = 16;
  c.heads = 2;
  c.layers = 2;
  c.feedforward_size = 32;
  c.dropout = 0.0;
  return c;
}

std::vector<int> random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(vocab) - 1);
  std::vector<int> t(n);
  for (auto& x : t) x = d(rng);
  return t;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("relmusic_model_test_" + name)).string();
}

// Plain decoder built from scalar loops: pre-norm layers, softmax attention
// over QK^T / sqrt(dh) with a causal mask, no relative terms.
Tensor plain_decoder_oracle(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& tokens) {
  const std::size_t len = tokens.size(), d = cfg.depth, heads = cfg.heads, dh = d / heads;
  std::vector<std::vector<double>> h(len, std::vector<double>(d));
  for (std::size_t p = 0; p < len; ++p) {
    for (std::size_t c = 0; c < d; ++c) {
      const double rate = std::pow(10000.0, static_cast<double>(c - c % 2) / static_cast<double>(d));
      const double pos = static_cast<double>(p) / rate;
      h[p][c] = w.embedding(static_cast<std::size_t>(tokens[p]), c) + (c % 2 == 0 ? std::sin(pos) : std::cos(pos));
    }
  }
  auto norm = [&](const std::vector<std::vector<double>>& x, const LayerNormWeights& nw) {
    auto y = x;
    for (std::size_t p = 0; p < len; ++p) {
      double mean = 0, var = 0;
      for (double v : x[p]) mean += v;
      mean /= static_cast<double>(d);
      for (double v : x[p]) var += (v - mean) * (v - mean);
      var /= static_cast<double>(d);
      for (std::size_t c = 0; c < d; ++c) {
        y[p][c] = (x[p][c] - mean) / std::sqrt(var + cfg.layer_norm_epsilon) * nw.gamma[c] + nw.beta[c];
      }
    }
    return y;
  };
  auto project = [&](const std::vector<std::vector<double>>& x, const Tensor& m) {
    std::vector<std::vector<double>> y(len, std::vector<double>(m.cols()));
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t c = 0; c < m.rows(); ++c) y[p][j] += x[p][c] * m(c, j);
    return y;
  };
  for (const auto& lw : w.layers) {
    const auto a = norm(h, lw.norm1);
    const auto q = project(a, lw.attention.wq), k = project(a, lw.attention.wk), v = project(a, lw.attention.wv);
    std::vector<std::vector<double>> z(len, std::vector<double>(d));
    for (std::size_t hd = 0; hd < heads; ++hd) {
      for (std::size_t i = 0; i < len; ++i) {
        std::vector<double> logit(i + 1);
        double mx = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          for (std::size_t c = 0; c < dh; ++c) logit[j] += q[i][hd * dh + c] * k[j][hd * dh + c];
          logit[j] /= std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, logit[j]);
        }
        double sum = 0;
        for (auto& l : logit) sum += l = std::exp(l - mx);
        for (std::size_t j = 0; j <= i; ++j)
          for (std::size_t c = 0; c < dh; ++c) z[i][hd * dh + c] += logit[j] / sum * v[j][hd * dh + c];
      }
    }
    const auto o = project(z, lw.attention.wo);
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t c = 0; c < d; ++c) h[p][c] += o[p][c];
    const auto b = norm(h, lw.norm2);
    auto inner = project(b, lw.ff.w1);
    for (auto& row : inner)
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = std::max(0.0, row[c] + lw.ff.b1[c]);
    const auto f = project(inner, lw.ff.w2);
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t c = 0; c < d; ++c) h[p][c] += f[p][c] + lw.ff.b2[c];
  }
  const auto y = norm(h, w.final_norm);
  const auto logits = project(y, w.out_w);
  Tensor out({len, cfg.vocab_size});
  for (std::size_t p = 0; p < len; ++p)
    for (std::size_t c = 0; c < cfg.vocab_size; ++c) out(p, c) = logits[p][c] + w.out_b[c];
  return out;
}

}  // namespace

TEST(ModelConfig, JsonRoundTrip) {
  auto c = tiny_config();
  c.attention_mode = AttentionMode::local;
  c.block_length = 4;
  c.norm = NormPlacement::post;
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(ModelConfig, RejectsInvalidConfigs) {
  auto c = tiny_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.position_mode = PositionMode::concat_sinusoid;
  c.embedding_width = 4;
  c.sinusoid_width = 6;
  EXPECT_THROW(c.validate(), ConfigError);
  c.sinusoid_width = 4;
  EXPECT_NO_THROW(c.validate());
  c = tiny_config();
  c.attention_mode = AttentionMode::local;
  c.block_length = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(config_from_json({{"depth", 8}, {"bogus", 1}}), ConfigError);
  EXPECT_THROW(config_from_json({{"position_mode", "learned"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"depth", -8}}), ConfigError);
}

TEST(ModelConfig, ParameterCountIsExact) {
  // V=10, D=8, H=2, F=16, one layer, L=8 -> 5 global relative rows.
  ModelConfig c;
  c.vocab_size = 10;
  c.max_len = 8;
  c.depth = 8;
  c.heads = 2;
  c.layers = 1;
  c.feedforward_size = 16;
  const std::size_t embedding = 10 * 8;
  const std::size_t layer = 4 * 64 + 5 * 8 + 2 * 8 * 16 + 16 + 8 + 4 * 8;
  const std::size_t head = 2 * 8 + 8 * 10 + 10;
  EXPECT_EQ(parameter_count(c), embedding + layer + head);
  EXPECT_EQ(zero_weights(c).parameter_count(), parameter_count(c));

  std::vector<ModelConfig> variants(5, tiny_config());
  variants[1].attention_mode = AttentionMode::local;
  variants[1].block_length = 4;
  variants[2].position_mode = PositionMode::concat_sinusoid_and_instrument;
  variants[3].use_relative = false;
  variants[3].use_pitch_time_relative = false;
  variants[4].position_mode = PositionMode::none;
  variants[4].relative_max_distance = 0;
  for (const auto& v : variants) EXPECT_EQ(zero_weights(v).parameter_count(), parameter_count(v));
}

TEST(Positional, SinusoidBank) {
  const auto bank = sinusoid_bank(0, 3, 6);
  for (std::size_t c = 0; c < 6; c += 2) {
    EXPECT_EQ(bank(0, c), 0.0);
    EXPECT_EQ(bank(0, c + 1), 1.0);
  }
  EXPECT_DOUBLE_EQ(bank(2, 0), std::sin(2.0));
  EXPECT_DOUBLE_EQ(bank(2, 1), std::cos(2.0));
  EXPECT_DOUBLE_EQ(bank(2, 2), std::sin(2.0 / std::pow(10000.0, 2.0 / 6.0)));
}

TEST(Positional, ModesProduceDepthWideInputs) {
  for (const auto mode : {PositionMode::add_sinusoid, PositionMode::concat_sinusoid,
                          PositionMode::concat_sinusoid_and_instrument, PositionMode::none}) {
    auto c = tiny_config();
    c.depth = 16;
    c.position_mode = mode;
    std::mt19937_64 rng(1);
    const auto w = init_weights(c, rng);
    const auto x = positional_signal(c, w.embedding, {1, 2, 3, 4, 5});
    EXPECT_EQ(x.shape(), (Shape{5, 16})) << to_string(mode);
  }
}

TEST(Positional, InstrumentLabelIsOneHot) {
  auto c = tiny_config();
  c.depth = 16;
  c.position_mode = PositionMode::concat_sinusoid_and_instrument;
  const auto w = zero_weights(c);
  const auto x = positional_signal(c, w.embedding, {0, 0, 0, 0, 0, 0});
  const std::size_t base = c.resolved_embedding_width() + c.resolved_sinusoid_width();
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t voice = 0; voice < 4; ++voice) EXPECT_EQ(x(p, base + voice), voice == p % 4 ? 1.0 : 0.0);
  }
  // Concat mode keeps the embedding channels untouched by the sinusoids.
  EXPECT_EQ(x(3, 0), 0.0);
}

TEST(FeedForward, ZeroWeightsAndRelu) {
  FeedForwardWeights w{Tensor({3, 5}), Tensor({5}), Tensor({5, 3}), Tensor({3})};
  std::mt19937_64 rng(2);
  const auto z = random_tensor<double>({4, 3}, rng);
  EXPECT_EQ(feedforward(z, w), Tensor({4, 3}));

  FeedForwardWeights one{Tensor({1, 1}, 1.0), Tensor({1}), Tensor({1, 1}, 1.0), Tensor({1}, 0.5)};
  FeedForwardCache cache;
  const auto out = feedforward(Tensor({1, 1}, -1.0), one, 0.0, nullptr, &cache);
  EXPECT_EQ(cache.act[0], 0.0);
  EXPECT_EQ(out[0], 0.5);
}

TEST(FeedForward, PositionWise) {
  std::mt19937_64 rng(3);
  FeedForwardWeights w{random_tensor<double>({4, 6}, rng), random_tensor<double>({6}, rng),
                       random_tensor<double>({6, 4}, rng), random_tensor<double>({4}, rng)};
  const auto z = random_tensor<double>({5, 4}, rng);
  const auto out = feedforward(z, w);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Tensor zp({5, 4});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) zp(r, c) = z(perm[r], c);
  const auto outp = feedforward(zp, w);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(outp(r, c), out(perm[r], c));
  EXPECT_THROW(feedforward(Tensor({5, 3}), w), DimensionError);
}

TEST(LayerNorm, NormalizesRows) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor<double>({3, 8}, rng, -5.0, 5.0);
  LayerNormWeights w{Tensor({8}, 1.0), Tensor({8})};
  const auto y = layer_norm(x, w, 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 8; ++c) mean += y(r, c);
    mean /= 8;
    for (std::size_t c = 0; c < 8; ++c) var += (y(r, c) - mean) * (y(r, c) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 8, 1.0, 1e-9);
  }
}

TEST(Decoder, UniformLogitsGiveLogVocab) {
  auto c = small_config(37, 16);
  std::mt19937_64 rng(5);
  auto w = init_weights(c, rng);
  w.out_w.fill(0.0);
  w.out_b.fill(0.0);
  const auto nll = evaluate_nll(c, w, random_tokens(16, 37, rng));
  EXPECT_NEAR(nll, std::log(37.0), 1e-9);
}

TEST(Decoder, SingleTokenVocabularyHasZeroLoss) {
  auto c = small_config(1, 16);
  std::mt19937_64 rng(6);
  const auto w = init_weights(c, rng);
  EXPECT_EQ(evaluate_nll(c, w, std::vector<int>(16, 0)), 0.0);
}

TEST(Decoder, MatchesPlainDecoderWithoutRelativeTerms) {
  auto c = small_config(11, 12);
  c.use_relative = false;
  std::mt19937_64 rng(7);
  const auto w = init_weights(c, rng);
  const auto tokens = random_tokens(12, 11, rng);
  const auto logits = forward(c, w, tokens).logits;
  EXPECT_LT(max_abs_diff(logits, plain_decoder_oracle(c, w, tokens)), 1e-10);
}

TEST(Decoder, ZeroRelativeTablesMatchAbsoluteModel) {
  auto c = small_config(11, 12);
  std::mt19937_64 rng(8);
  auto w = init_weights(c, rng);
  for (auto& layer : w.layers)
    for (auto& t : layer.tables) t.rel->weights.fill(0.0);
  auto plain = c;
  plain.use_relative = false;
  auto wp = zero_weights(plain);
  auto dst = wp.named();
  const auto src = w.named();
  for (auto& [name, tensor] : dst) {
    for (const auto& [sname, stensor] : src) {
      if (sname == name) *tensor = *stensor;
    }
  }
  const auto tokens = random_tokens(12, 11, rng);
  EXPECT_TRUE(bitwise_equal(forward(c, w, tokens).logits, forward(plain, wp, tokens).logits));
}

class CausalityTest : public ::testing::TestWithParam<AttentionMode> {};

TEST_P(CausalityTest, FutureTokensDoNotAffectPastLogits) {
  auto c = small_config(130, 32);
  c.attention_mode = GetParam();
  c.block_length = 8;
  c.use_pitch_time_relative = true;
  std::mt19937_64 rng(9);
  const auto w = init_weights(c, rng);
  const auto tokens = random_tokens(32, 130, rng);
  const auto base = forward(c, w, tokens).logits;
  for (std::size_t t = 0; t + 1 < 32; ++t) {
    auto changed = tokens;
    for (std::size_t u = t + 1; u < 32; ++u) changed[u] = (changed[u] + 1 + static_cast<int>(u)) % 130;
    const auto out = forward(c, w, changed).logits;
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t v = 0; v < 130; ++v) ASSERT_EQ(out(r, v), base(r, v)) << "t=" << t << " row " << r;
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, CausalityTest, ::testing::Values(AttentionMode::global, AttentionMode::local));

TEST(Decoder, LengthPolicy) {
  auto c = small_config(11, 8);
  std::mt19937_64 rng(10);
  const auto w = init_weights(c, rng);
  const auto tokens = random_tokens(12, 11, rng);
  EXPECT_THROW(forward(c, w, tokens), ConfigError);
  ForwardOptions longer;
  longer.allow_longer = true;
  EXPECT_THROW(forward(c, w, tokens, longer), ConfigError);
  longer.extrapolate_positions = true;
  EXPECT_NO_THROW(forward(c, w, tokens, longer));

  c.position_mode = PositionMode::none;
  const auto wr = init_weights(c, rng);
  ForwardOptions relative;
  relative.allow_longer = true;
  EXPECT_EQ(forward(c, wr, tokens, relative).logits.rows(), 12u);
  EXPECT_THROW(forward(c, w, {0, 11}), BoundsError);
}

TEST(Decoder, LocalModePadsPartialBlocks) {
  auto c = small_config(11, 16);
  c.attention_mode = AttentionMode::local;
  c.block_length = 4;
  std::mt19937_64 rng(11);
  const auto w = init_weights(c, rng);
  const auto tokens = random_tokens(10, 11, rng);
  const auto short_out = forward(c, w, tokens).logits;
  auto full = tokens;
  full.resize(12, 5);
  const auto full_out = forward(c, w, full).logits;
  ASSERT_EQ(short_out.rows(), 10u);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t v = 0; v < 11; ++v) EXPECT_EQ(short_out(r, v), full_out(r, v));
}

TEST(Decoder, AnnotationFollowsCodec) {
  auto c = tiny_config();
  const auto jsb = annotate_tokens(c, {60, 128, 55, 40, 61});
  EXPECT_EQ(jsb.pitch, (std::vector<int>{60, -1, 55, 40, 61}));
  EXPECT_EQ(jsb.time, (std::vector<int>{0, 0, 0, 0, 1}));
  c.annotation_codec = AnnotationCodec::performance;
  // SET_VELOCITY, NOTE_ON 60, TIME_SHIFT 250 ms, NOTE_OFF 60
  const auto perf = annotate_tokens(c, {372, 60, 256 + 24, 188});
  EXPECT_EQ(perf.pitch, (std::vector<int>{-1, 60, -1, -1}));
  EXPECT_EQ(perf.time, (std::vector<int>{0, 0, 2, 2}));
}

class GradCheckTest : public ::testing::TestWithParam<int> {};

TEST_P(GradCheckTest, FullModelMatchesFiniteDifferences) {
  auto c = tiny_config();
  switch (GetParam()) {
    case 1:
      c.attention_mode = AttentionMode::local;
      c.block_length = 4;
      break;
    case 2:
      c.norm = NormPlacement::post;
      c.position_mode = PositionMode::concat_sinusoid_and_instrument;
      break;
    case 3:
      c.annotation_codec = AnnotationCodec::performance;
      c.vocab_size = 388;
      break;
    default:
      break;
  }
  std::mt19937_64 rng(12);
  auto w = init_weights(c, rng);
  const std::vector<int> tokens = GetParam() == 3 ? std::vector<int>{370, 60, 64, 270, 188, 67, 300, 192}
                                                  : std::vector<int>{60, 64, 128, 67, 62, 60, 128, 65};
  const auto report = gradient_check(c, w, tokens);
  EXPECT_LT(report.max_relative_error, 1e-5)
      << report.worst_slot << "[" << report.worst_index << "] analytic " << report.analytic_at_worst << " numeric "
      << report.numeric_at_worst;
  EXPECT_EQ(report.checked + report.kinks_skipped, w.parameter_count());
  EXPECT_LT(report.kinks_skipped, report.checked / 100 + 1);
}

INSTANTIATE_TEST_SUITE_P(Variants, GradCheckTest, ::testing::Values(0, 1, 2, 3));

TEST(Checkpoint, RoundTripIsBitwise) {
  auto c = tiny_config();
  std::mt19937_64 rng(13);
  const auto w = init_weights(c, rng);
  const auto path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, c, w, 42);
  const auto ck = load_checkpoint(path);
  EXPECT_EQ(ck.step, 42u);
  EXPECT_EQ(to_json(ck.config), to_json(c));
  const auto a = w.named();
  const auto b = ck.weights.named();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_TRUE(bitwise_equal(*a[i].second, *b[i].second)) << a[i].first;
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignAndIncompatibleFiles) {
  const auto path = temp_path("bad.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint at all";
  }
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), CheckpointError);

  auto c = tiny_config();
  std::mt19937_64 rng(14);
  save_checkpoint(path, c, init_weights(c, rng), 1);
  auto bytes = read_bytes(path);
  bytes[8] = 9;  // format version
  {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
  }
  try {
    load_checkpoint(path);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version 9"), std::string::npos);
  }
  save_checkpoint(path, c, init_weights(c, rng), 1);
  bytes = read_bytes(path);
  {
    std::ofstream out(path, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);

  auto other = c;
  other.depth = 16;
  EXPECT_THROW(require_compatible(c, other), CheckpointError);
  other = c;
  other.dropout = 0.3;
  EXPECT_NO_THROW(require_compatible(c, other));
}

TEST(Optimizer, ScheduleWarmsUpThenDecays) {
  AdamConfig a;
  a.learning_rate = 0.01;
  a.warmup_steps = 100;
  EXPECT_DOUBLE_EQ(learning_rate_at(a, 50), 0.005);
  EXPECT_DOUBLE_EQ(learning_rate_at(a, 100), 0.01);
  EXPECT_DOUBLE_EQ(learning_rate_at(a, 400), 0.005);
  EXPECT_EQ(learning_rate_at(a, 0), 0.0);
}

TEST(Optimizer, AdamStepMatchesHandComputation) {
  auto c = small_config(3, 4);
  auto w = zero_weights(c);
  auto g = zero_weights(c);
  g.out_b[0] = 2.0;
  g.out_b[1] = -0.5;
  AdamConfig a;
  a.learning_rate = 0.1;
  a.warmup_steps = 1;
  a.clip_norm = 0.0;
  Adam adam(a, w);
  EXPECT_DOUBLE_EQ(adam.step(w, g), std::sqrt(4.25));
  // First step: mhat = g, vhat = g^2, update = lr * g / (|g| + eps).
  EXPECT_NEAR(w.out_b[0], -0.1, 1e-9);
  EXPECT_NEAR(w.out_b[1], 0.1, 1e-9);
  EXPECT_EQ(w.out_b[2], 0.0);
}

TEST(Optimizer, ClipsGlobalNorm) {
  auto c = small_config(3, 4);
  auto w = zero_weights(c);
  auto g = zero_weights(c);
  g.out_b[0] = 30.0;
  g.out_b[1] = 40.0;
  AdamConfig a;
  a.clip_norm = 1.0;
  Adam adam(a, w);
  EXPECT_DOUBLE_EQ(adam.step(w, g), 50.0);
}

TEST(Trainer, MemorizesSmallCorpus) {
  std::mt19937_64 rng(15);
  Corpus corpus;
  corpus.sequences.push_back(random_tokens(200, 16, rng));
  auto c = small_config(16, 200);
  c.depth = 32;
  c.heads = 4;
  c.feedforward_size = 64;
  TrainConfig t;
  t.steps = 2000;
  t.batch_size = 1;
  t.adam.learning_rate = 3e-3;
  t.adam.warmup_steps = 100;
  t.eval_every = 25;
  t.eval_crops = 0;
  t.target_nll = 0.1;
  const auto r = train(c, t, corpus, &corpus);
  EXPECT_TRUE(r.reached_target) << "last validation NLL " << r.evals.back().nll;
  EXPECT_LE(r.steps_taken, 2000u);
  EXPECT_LT(corpus_nll(c, r.weights, tile_crops(corpus, 200)), 0.1);
}

TEST(Trainer, GradientNormFiniteAndDeterministic) {
  std::mt19937_64 rng(16);
  Corpus corpus;
  for (int i = 0; i < 4; ++i) corpus.sequences.push_back(random_tokens(40, 20, rng));
  auto c = small_config(20, 16);
  c.dropout = 0.1;
  TrainConfig t;
  t.steps = 100;
  t.batch_size = 2;
  t.eval_every = 0;
  t.checkpoint_every = 100;
  std::vector<std::string> paths;
  for (int run = 0; run < 2; ++run) {
    TrainCallbacks cb;
    cb.on_step = [](const StepMetrics& m) { ASSERT_TRUE(std::isfinite(m.grad_norm)); };
    cb.on_checkpoint = [&](std::size_t step, const ModelWeights& w) {
      paths.push_back(temp_path("det" + std::to_string(run) + ".ckpt"));
      save_checkpoint(paths.back(), c, w, step);
    };
    train(c, t, corpus, nullptr, cb);
  }
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(read_bytes(paths[0]), read_bytes(paths[1]));
  for (const auto& p : paths) std::filesystem::remove(p);
}

TEST(Trainer, EarlyStoppingOnPlateau) {
  std::mt19937_64 rng(17);
  Corpus train_set, val_set;
  train_set.sequences.push_back(random_tokens(64, 8, rng));
  val_set.sequences.push_back(random_tokens(64, 8, rng));  // unrelated: no lasting improvement
  auto c = small_config(8, 16);
  TrainConfig t;
  t.steps = 2000;
  t.batch_size = 1;
  t.adam.learning_rate = 1e-2;
  t.eval_every = 10;
  t.patience = 3;
  const auto r = train(c, t, train_set, &val_set);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_LT(r.steps_taken, 2000u);
  EXPECT_LE(r.best_val_nll, r.evals.back().nll);
}

TEST(Trainer, DivergenceIsReported) {
  std::mt19937_64 rng(18);
  Corpus corpus;
  corpus.sequences.push_back(random_tokens(32, 8, rng));
  auto c = small_config(8, 16);
  TrainConfig t;
  t.steps = 200;
  t.batch_size = 1;
  t.eval_every = 0;
  t.adam.learning_rate = 1e300;
  t.adam.warmup_steps = 1;
  EXPECT_THROW(train(c, t, corpus, nullptr), DivergenceError);
}

TEST(Trainer, RejectsOutOfVocabularyCorpus) {
  Corpus corpus;
  corpus.sequences.push_back({1, 2, 99});
  EXPECT_THROW(train(small_config(8, 16), TrainConfig{}, corpus, nullptr), ConfigError);
}

TEST(Corpus, MotifCorpusRepeats) {
  MotifCorpusConfig mc;
  mc.sequences = 5;
  mc.length = 50;
  mc.motif_length = 7;
  const auto corpus = make_motif_corpus(mc);
  ASSERT_EQ(corpus.size(), 5u);
  for (const auto& s : corpus.sequences) {
    for (std::size_t i = 7; i < s.size(); ++i) EXPECT_EQ(s[i], s[i - 7]);
    for (const int t : s) EXPECT_LT(t, 64);
  }
  EXPECT_EQ(make_motif_corpus(mc).sequences, corpus.sequences);
  const auto crops = tile_crops(corpus, 16, 6);
  EXPECT_EQ(crops.size(), 6u);
  EXPECT_EQ(crops[3].size(), 2u);  // 50 = 16 + 16 + 16 + 2
}

TEST(Corpus, DirectoryRoundTrip) {
  const auto dir = temp_path("corpus_dir");
  std::filesystem::remove_all(dir);
  MotifCorpusConfig mc;
  mc.sequences = 3;
  mc.length = 10;
  const auto corpus = make_motif_corpus(mc);
  save_corpus_dir(corpus, dir);
  const auto back = load_corpus_dir(dir);
  EXPECT_EQ(back.sequences, corpus.sequences);
  EXPECT_EQ(back.names, corpus.names);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_corpus_dir(dir), ConfigError);
}

class SamplerTest : public ::testing::TestWithParam<AttentionMode> {};

TEST_P(SamplerTest, Contracts) {
  auto c = small_config(12, 16);
  c.attention_mode = GetParam();
  c.block_length = 4;
  c.position_mode = PositionMode::none;
  std::mt19937_64 rng(19);
  const auto w = init_weights(c, rng);
  const std::vector<int> prime{3, 1, 4, 1, 5};
  SampleOptions opt;
  opt.length = 32;  // twice max_len
  opt.temperature = 0.0;
  opt.trace = true;
  const auto a = sample(c, w, prime, opt);
  const auto b = sample(c, w, prime, opt);
  EXPECT_EQ(a.tokens, b.tokens);
  ASSERT_EQ(a.tokens.size(), 32u);
  EXPECT_TRUE(std::equal(prime.begin(), prime.end(), a.tokens.begin()));
  ASSERT_EQ(a.trace.rows.size(), (32u - prime.size()) * c.layers * c.heads);
  for (const auto& row : a.trace.rows) {
    const double sum = std::accumulate(row.weights.begin(), row.weights.end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_EQ(row.key_start + row.weights.size(), row.query + 1);
  }
  const auto json = a.trace.to_json();
  EXPECT_EQ(json["rows"].size(), a.trace.rows.size());

  opt.temperature = 1.0;
  opt.trace = false;
  opt.seed = 5;
  EXPECT_EQ(sample(c, w, prime, opt).tokens, sample(c, w, prime, opt).tokens);
}

INSTANTIATE_TEST_SUITE_P(Modes, SamplerTest, ::testing::Values(AttentionMode::global, AttentionMode::local));

TEST(Sampler, AbsolutePositionsRefuseLongerOutput) {
  auto c = small_config(12, 16);
  std::mt19937_64 rng(20);
  const auto w = init_weights(c, rng);
  SampleOptions opt;
  opt.length = 32;
  EXPECT_THROW(sample(c, w, {1, 2}, opt), ConfigError);
  opt.length = 16;
  EXPECT_NO_THROW(sample(c, w, {1, 2}, opt));
  opt.length = 2;
  EXPECT_THROW(sample(c, w, {1, 2}, opt), ConfigError);
  opt.length = 8;
  EXPECT_THROW(sample(c, w, {}, opt), ConfigError);
  EXPECT_THROW(sample(c, w, {12}, opt), ConfigError);
}
