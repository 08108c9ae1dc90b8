// SPDX-License-Identifier: Apache-2.0
#include "relmusic/model/layers.hpp"

#include <cmath>

#include "relmusic/errors.hpp"
#include "relmusic/ops.hpp"

namespace relmusic::model {

Tensor sinusoid_bank(std::size_t first, std::size_t count, std::size_t width) {
  if (width % 2 != 0) throw ConfigError("sinusoid width must be even, got " + std::to_string(width));
  Tensor out({count, width});
  for (std::size_t p = 0; p < count; ++p) {
    const auto pos = static_cast<double>(first + p);
    for (std::size_t i = 0; i < width / 2; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
      out(p, 2 * i) = std::sin(pos / rate);
      out(p, 2 * i + 1) = std::cos(pos / rate);
    }
  }
  return out;
}

Tensor positional_signal(const ModelConfig& cfg, const Tensor& embedding, const std::vector<int>& tokens) {
  const std::size_t len = tokens.size(), d = cfg.depth, e = cfg.resolved_embedding_width();
  if (embedding.rank() != 2 || embedding.cols() != e || embedding.rows() != cfg.vocab_size) {
    throw DimensionError("positional_signal: embedding table is " + shape_str(embedding.shape()));
  }
  Tensor x({len, d});
  for (std::size_t p = 0; p < len; ++p) {
    const int tok = tokens[p];
    if (tok < 0 || static_cast<std::size_t>(tok) >= cfg.vocab_size) {
      throw BoundsError("token id " + std::to_string(tok) + " at position " + std::to_string(p) +
                        " outside vocabulary of " + std::to_string(cfg.vocab_size));
    }
    std::copy_n(embedding.data() + static_cast<std::size_t>(tok) * e, e, x.data() + p * d);
  }
  switch (cfg.position_mode) {
    case PositionMode::none:
      break;
    case PositionMode::add_sinusoid: {
      const auto bank = sinusoid_bank(0, len, d);
      add_inplace(x, bank);
      break;
    }
    case PositionMode::concat_sinusoid:
    case PositionMode::concat_sinusoid_and_instrument: {
      const std::size_t s = cfg.resolved_sinusoid_width();
      const auto bank = sinusoid_bank(0, len, s);
      for (std::size_t p = 0; p < len; ++p) {
        std::copy_n(bank.data() + p * s, s, x.data() + p * d + e);
        if (cfg.instrument_width() > 0) x(p, e + s + p % 4) = 1.0;
      }
      break;
    }
  }
  return x;
}

void positional_signal_backward(const ModelConfig& cfg, const std::vector<int>& tokens, const Tensor& d_input,
                                Tensor& d_embedding) {
  const std::size_t d = cfg.depth, e = cfg.resolved_embedding_width();
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    double* dst = d_embedding.data() + static_cast<std::size_t>(tokens[p]) * e;
    const double* src = d_input.data() + p * d;
    for (std::size_t c = 0; c < e; ++c) dst[c] += src[c];
  }
}

Tensor layer_norm(const Tensor& x, const LayerNormWeights& w, double epsilon, LayerNormCache* cache) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (w.gamma.size() != d || w.beta.size() != d) {
    throw DimensionError("layer_norm: parameters of width " + std::to_string(w.gamma.size()) + " for input " +
                         shape_str(x.shape()));
  }
  Tensor y({rows, d});
  Tensor xhat({rows, d});
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (in[c] - mean) * rstd[r];
      y(r, c) = xhat(r, c) * w.gamma[c] + w.beta[c];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Tensor layer_norm_backward(const LayerNormCache& cache, const LayerNormWeights& w, const Tensor& dy,
                           LayerNormWeights& grads) {
  const std::size_t rows = dy.rows(), d = dy.cols();
  Tensor dx({rows, d});
  std::vector<double> g(d);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      grads.gamma[c] += dy(r, c) * cache.xhat(r, c);
      grads.beta[c] += dy(r, c);
      g[c] = dy(r, c) * w.gamma[c];
      sum_g += g[c];
      sum_gx += g[c] * cache.xhat(r, c);
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dx(r, c) = cache.rstd[r] * (g[c] - inv_d * sum_g - cache.xhat(r, c) * inv_d * sum_gx);
    }
  }
  return dx;
}

Tensor feedforward(const Tensor& z, const FeedForwardWeights& w, double dropout, std::mt19937_64* rng,
                   FeedForwardCache* cache) {
  if (z.rank() != 2 || w.w1.rank() != 2 || w.w2.rank() != 2 || z.cols() != w.w1.rows() ||
      w.w1.cols() != w.b1.size() || w.w2.rows() != w.w1.cols() || w.w2.cols() != w.b2.size()) {
    throw DimensionError("feedforward: input " + shape_str(z.shape()) + " with W1 " + shape_str(w.w1.shape()) +
                         ", b1 " + shape_str(w.b1.shape()) + ", W2 " + shape_str(w.w2.shape()) + ", b2 " +
                         shape_str(w.b2.shape()));
  }
  const std::size_t rows = z.rows(), f = w.w1.cols(), d = w.w2.cols();
  auto pre = matmul(z, w.w1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < f; ++c) pre(r, c) += w.b1[c];
  Tensor act({rows, f});
  for (std::size_t i = 0; i < pre.size(); ++i) act.data()[i] = pre.data()[i] > 0.0 ? pre.data()[i] : 0.0;
  std::optional<Tensor> keep;
  if (dropout > 0.0) {
    if (!rng) throw ConfigError("feedforward: dropout requires an RNG");
    keep = relmusic::detail::dropout_multipliers<double>({rows, f}, dropout, *rng);
    for (std::size_t i = 0; i < act.size(); ++i) act.data()[i] *= keep->data()[i];
  }
  auto out = matmul(act, w.w2);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) += w.b2[c];
  if (cache) {
    cache->z = z;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
    cache->keep = std::move(keep);
  }
  return out;
}

Tensor feedforward_backward(const FeedForwardCache& cache, const FeedForwardWeights& w, const Tensor& dout,
                            FeedForwardWeights& grads) {
  const std::size_t rows = dout.rows(), f = w.w1.cols(), d = w.w2.cols();
  add_inplace(grads.w2, matmul_tn(cache.act, dout));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) grads.b2[c] += dout(r, c);
  auto dpre = matmul_nt(dout, w.w2);
  for (std::size_t i = 0; i < dpre.size(); ++i) {
    double g = cache.pre.data()[i] > 0.0 ? dpre.data()[i] : 0.0;
    if (cache.keep) g *= cache.keep->data()[i];
    dpre.data()[i] = g;
  }
  add_inplace(grads.w1, matmul_tn(cache.z, dpre));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < f; ++c) grads.b1[c] += dpre(r, c);
  return matmul_nt(dpre, w.w1);
}

}  // namespace relmusic::model
