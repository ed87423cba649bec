#include "dapt/encoder.hpp"

#include <cmath>

#include "dapt/kernels.hpp"
#include "dapt/util.hpp"
#include "json.hpp"

namespace dapt::nn {

using nlohmann::json;

void EncoderConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || ff == 0 || vocab == 0 || max_positions == 0)
    throw InvalidArgument("encoder config fields must be positive");
  if (hidden % heads != 0) throw InvalidArgument("hidden size must be divisible by the head count");
}

std::string EncoderConfig::to_json() const {
  json j{{"layers", layers},       {"hidden", hidden}, {"heads", heads},
         {"ff", ff},               {"vocab", vocab},   {"max_positions", max_positions},
         {"ln_eps", ln_eps}};
  return j.dump(2);
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  EncoderConfig c;
  c.layers = j.at("layers").get<size_t>();
  c.hidden = j.at("hidden").get<size_t>();
  c.heads = j.at("heads").get<size_t>();
  c.ff = j.at("ff").get<size_t>();
  c.vocab = j.at("vocab").get<size_t>();
  c.max_positions = j.at("max_positions").get<size_t>();
  c.ln_eps = j.at("ln_eps").get<double>();
  return c;
}

Batch make_batch(const std::vector<TokenSequence>& seqs) {
  Batch b;
  b.batch_size = seqs.size();
  for (const TokenSequence& s : seqs) b.seq_len = std::max(b.seq_len, s.size());
  b.ids.assign(b.positions(), Vocab::kPad);
  b.valid.assign(b.positions(), 0);
  for (size_t i = 0; i < seqs.size(); ++i) {
    for (size_t t = 0; t < seqs[i].size(); ++t) {
      b.ids[i * b.seq_len + t] = seqs[i][t];
      b.valid[i * b.seq_len + t] = 1;
    }
  }
  return b;
}

ParamLayout ParamLayout::build(const EncoderConfig& cfg) {
  ParamLayout L;
  size_t off = 0;
  auto take = [&off](size_t n) {
    size_t at = off;
    off += n;
    return at;
  };
  const size_t H = cfg.hidden, F = cfg.ff, V = cfg.vocab, P = cfg.max_positions;
  L.tok_emb = take(V * H);
  L.pos_emb = take(P * H);
  L.ln_e_g = take(H);
  L.ln_e_b = take(H);
  L.layers.resize(cfg.layers);
  for (LayerOffsets& l : L.layers) {
    l.wq = take(H * H);
    l.bq = take(H);
    l.wk = take(H * H);
    l.bk = take(H);
    l.wv = take(H * H);
    l.bv = take(H);
    l.wo = take(H * H);
    l.bo = take(H);
    l.ln1_g = take(H);
    l.ln1_b = take(H);
    l.w1 = take(H * F);
    l.b1 = take(F);
    l.w2 = take(F * H);
    l.b2 = take(H);
    l.ln2_g = take(H);
    l.ln2_b = take(H);
  }
  L.mlm_w = take(H * V);
  L.mlm_b = take(V);
  L.total = off;
  return L;
}

EncoderModel::EncoderModel(EncoderConfig cfg) : cfg_(cfg), layout_(ParamLayout::build(cfg)) {
  cfg_.validate();
  params_.assign(layout_.total, 0.0);
  grads_.assign(layout_.total, 0.0);
}

void EncoderModel::init_params(uint64_t seed) {
  Rng rng(derive_seed(seed, "encoder-init"));
  for (double& p : params_) p = rng.next_normal() * 0.02;
  const size_t H = cfg_.hidden;
  auto ones = [&](size_t off) {
    for (size_t i = 0; i < H; ++i) params_[off + i] = 1.0;
  };
  auto zeros = [&](size_t off, size_t n) {
    for (size_t i = 0; i < n; ++i) params_[off + i] = 0.0;
  };
  ones(layout_.ln_e_g);
  zeros(layout_.ln_e_b, H);
  for (const LayerOffsets& l : layout_.layers) {
    zeros(l.bq, H);
    zeros(l.bk, H);
    zeros(l.bv, H);
    zeros(l.bo, H);
    ones(l.ln1_g);
    zeros(l.ln1_b, H);
    zeros(l.b1, cfg_.ff);
    zeros(l.b2, H);
    ones(l.ln2_g);
    zeros(l.ln2_b, H);
  }
  zeros(layout_.mlm_b, cfg_.vocab);
  // PAD embedding stays zero
  zeros(layout_.tok_emb + static_cast<size_t>(Vocab::kPad) * H, H);
}

void EncoderModel::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

const std::vector<double>& EncoderModel::forward(const Batch& batch, Cache& cache) const {
  const size_t B = batch.batch_size, T = batch.seq_len, H = cfg_.hidden, F = cfg_.ff;
  const size_t A = cfg_.heads, dh = cfg_.head_dim();
  const size_t N = B * T;
  if (T > cfg_.max_positions) throw InvalidArgument("sequence length exceeds max_positions");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.emb.assign(N * H, 0.0);
  for (size_t p = 0; p < N; ++p) {
    const int32_t id = batch.ids[p];
    if (id < 0 || static_cast<size_t>(id) >= cfg_.vocab) throw InvalidArgument("token id out of vocabulary range");
    const double* tok = param(layout_.tok_emb + static_cast<size_t>(id) * H);
    const double* pos = param(layout_.pos_emb + (p % T) * H);
    double* dst = cache.emb.data() + p * H;
    for (size_t j = 0; j < H; ++j) dst[j] = tok[j] + pos[j];
  }
  cache.emb_mean.assign(N, 0.0);
  cache.emb_rstd.assign(N, 0.0);
  cache.x0.assign(N * H, 0.0);
  par::layernorm_forward(cache.x0.data(), cache.emb_mean.data(), cache.emb_rstd.data(), cache.emb.data(),
                         param(layout_.ln_e_g), param(layout_.ln_e_b), N, H, cfg_.ln_eps);

  cache.layers.assign(cfg_.layers, LayerCache{});
  std::vector<double> layer_in = cache.x0;
  for (size_t li = 0; li < cfg_.layers; ++li) {
    const LayerOffsets& L = layout_.layers[li];
    LayerCache& c = cache.layers[li];
    c.x_in = std::move(layer_in);

    c.q.assign(N * H, 0.0);
    c.k.assign(N * H, 0.0);
    c.v.assign(N * H, 0.0);
    par::gemm_nn(c.q.data(), c.x_in.data(), param(L.wq), {N, H, H});
    par::add_bias(c.q.data(), param(L.bq), N, H);
    par::gemm_nn(c.k.data(), c.x_in.data(), param(L.wk), {N, H, H});
    par::add_bias(c.k.data(), param(L.bk), N, H);
    par::gemm_nn(c.v.data(), c.x_in.data(), param(L.wv), {N, H, H});
    par::add_bias(c.v.data(), param(L.bv), N, H);

    c.probs.assign(B * A * T * T, 0.0);
    c.ctx.assign(N * H, 0.0);
    const long BA = static_cast<long>(B * A);
#pragma omp parallel for schedule(static)
    for (long ba = 0; ba < BA; ++ba) {
      const size_t b = static_cast<size_t>(ba) / A;
      const size_t a = static_cast<size_t>(ba) % A;
      double* probs = c.probs.data() + (b * A + a) * T * T;
      const uint8_t* key_valid = batch.valid.data() + b * T;
      for (size_t t = 0; t < T; ++t) {
        const double* qv = c.q.data() + (b * T + t) * H + a * dh;
        double* row = probs + t * T;
        for (size_t u = 0; u < T; ++u) {
          const double* kv = c.k.data() + (b * T + u) * H + a * dh;
          double acc = 0.0;
          for (size_t e = 0; e < dh; ++e) acc += qv[e] * kv[e];
          row[u] = acc * scale;
        }
      }
      ref::softmax_rows_masked(probs, key_valid, T, T);
      for (size_t t = 0; t < T; ++t) {
        const double* row = probs + t * T;
        double* out = c.ctx.data() + (b * T + t) * H + a * dh;
        for (size_t e = 0; e < dh; ++e) out[e] = 0.0;
        for (size_t u = 0; u < T; ++u) {
          const double pw = row[u];
          if (pw == 0.0) continue;
          const double* vv = c.v.data() + (b * T + u) * H + a * dh;
          for (size_t e = 0; e < dh; ++e) out[e] += pw * vv[e];
        }
      }
    }

    std::vector<double> attn(N * H, 0.0);
    par::gemm_nn(attn.data(), c.ctx.data(), param(L.wo), {N, H, H});
    par::add_bias(attn.data(), param(L.bo), N, H);
    c.res1.assign(N * H, 0.0);
    par::add(c.res1.data(), c.x_in.data(), attn.data(), N * H);

    c.ln1_mean.assign(N, 0.0);
    c.ln1_rstd.assign(N, 0.0);
    c.x_mid.assign(N * H, 0.0);
    par::layernorm_forward(c.x_mid.data(), c.ln1_mean.data(), c.ln1_rstd.data(), c.res1.data(), param(L.ln1_g),
                           param(L.ln1_b), N, H, cfg_.ln_eps);

    c.ffn_pre.assign(N * F, 0.0);
    par::gemm_nn(c.ffn_pre.data(), c.x_mid.data(), param(L.w1), {N, F, H});
    par::add_bias(c.ffn_pre.data(), param(L.b1), N, F);
    c.ffn_act.assign(N * F, 0.0);
    par::gelu_forward(c.ffn_act.data(), c.ffn_pre.data(), N * F);
    std::vector<double> ffn_out(N * H, 0.0);
    par::gemm_nn(ffn_out.data(), c.ffn_act.data(), param(L.w2), {N, H, F});
    par::add_bias(ffn_out.data(), param(L.b2), N, H);
    c.res2.assign(N * H, 0.0);
    par::add(c.res2.data(), c.x_mid.data(), ffn_out.data(), N * H);

    c.ln2_mean.assign(N, 0.0);
    c.ln2_rstd.assign(N, 0.0);
    std::vector<double> out(N * H, 0.0);
    par::layernorm_forward(out.data(), c.ln2_mean.data(), c.ln2_rstd.data(), c.res2.data(), param(L.ln2_g),
                           param(L.ln2_b), N, H, cfg_.ln_eps);
    layer_in = std::move(out);
  }
  cache.hidden = std::move(layer_in);
  return cache.hidden;
}

void EncoderModel::backward(const Batch& batch, const Cache& cache, const std::vector<double>& d_hidden) {
  const size_t B = batch.batch_size, T = batch.seq_len, H = cfg_.hidden, F = cfg_.ff;
  const size_t A = cfg_.heads, dh = cfg_.head_dim();
  const size_t N = B * T;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> dx = d_hidden;  // gradient flowing down through layers
  std::vector<double> tmpNH(N * H), tmpNF(N * F), dres(N * H);

  for (size_t li = cfg_.layers; li-- > 0;) {
    const LayerOffsets& L = layout_.layers[li];
    const LayerCache& c = cache.layers[li];

    // ln2
    par::layernorm_backward(dres.data(), grad(L.ln2_g), grad(L.ln2_b), dx.data(), c.res2.data(), c.ln2_mean.data(),
                            c.ln2_rstd.data(), param(L.ln2_g), N, H);
    // res2 = x_mid + ffn_out
    std::vector<double> d_xmid = dres;          // identity branch
    const std::vector<double>& d_ffn_out = dres;  // ffn branch

    // ffn_out = gelu(x_mid*W1+b1)*W2 + b2
    par::gemm_tn(grad(L.w2), c.ffn_act.data(), d_ffn_out.data(), {F, H, N});
    par::bias_grad(grad(L.b2), d_ffn_out.data(), N, H);
    par::gemm_nt(tmpNF.data(), d_ffn_out.data(), param(L.w2), {N, F, H});  // d(ffn_act)
    std::vector<double> d_ffn_pre(N * F);
    par::gelu_backward(d_ffn_pre.data(), c.ffn_pre.data(), tmpNF.data(), N * F);
    par::gemm_tn(grad(L.w1), c.x_mid.data(), d_ffn_pre.data(), {H, F, N});
    par::bias_grad(grad(L.b1), d_ffn_pre.data(), N, F);
    par::gemm_nt(tmpNH.data(), d_ffn_pre.data(), param(L.w1), {N, H, F});
    for (size_t i = 0; i < N * H; ++i) d_xmid[i] += tmpNH[i];

    // ln1
    par::layernorm_backward(dres.data(), grad(L.ln1_g), grad(L.ln1_b), d_xmid.data(), c.res1.data(),
                            c.ln1_mean.data(), c.ln1_rstd.data(), param(L.ln1_g), N, H);
    // res1 = x_in + attn_proj
    std::vector<double> d_xin = dres;            // identity branch
    const std::vector<double>& d_attn = dres;    // attention branch

    // attn_proj = ctx*Wo + bo
    par::gemm_tn(grad(L.wo), c.ctx.data(), d_attn.data(), {H, H, N});
    par::bias_grad(grad(L.bo), d_attn.data(), N, H);
    std::vector<double> d_ctx(N * H);
    par::gemm_nt(d_ctx.data(), d_attn.data(), param(L.wo), {N, H, H});

    std::vector<double> dq(N * H, 0.0), dk(N * H, 0.0), dv(N * H, 0.0);
    const long BA = static_cast<long>(B * A);
#pragma omp parallel for schedule(static)
    for (long ba = 0; ba < BA; ++ba) {
      const size_t b = static_cast<size_t>(ba) / A;
      const size_t a = static_cast<size_t>(ba) % A;
      const double* probs = c.probs.data() + (b * A + a) * T * T;
      std::vector<double> dprobs(T * T, 0.0);
      // ctx[t] = sum_u probs[t,u] v[u]
      for (size_t t = 0; t < T; ++t) {
        const double* dctx = d_ctx.data() + (b * T + t) * H + a * dh;
        for (size_t u = 0; u < T; ++u) {
          const double* vv = c.v.data() + (b * T + u) * H + a * dh;
          double acc = 0.0;
          for (size_t e = 0; e < dh; ++e) acc += dctx[e] * vv[e];
          dprobs[t * T + u] = acc;
        }
      }
      for (size_t u = 0; u < T; ++u) {
        double* dvv = dv.data() + (b * T + u) * H + a * dh;
        for (size_t t = 0; t < T; ++t) {
          const double pw = probs[t * T + u];
          if (pw == 0.0) continue;
          const double* dctx = d_ctx.data() + (b * T + t) * H + a * dh;
          for (size_t e = 0; e < dh; ++e) dvv[e] += pw * dctx[e];
        }
      }
      // softmax backward: ds = p .* (dp - sum(dp .* p))
      std::vector<double> dscores(T * T, 0.0);
      for (size_t t = 0; t < T; ++t) {
        const double* prow = probs + t * T;
        const double* dprow = dprobs.data() + t * T;
        double dot = 0.0;
        for (size_t u = 0; u < T; ++u) dot += prow[u] * dprow[u];
        for (size_t u = 0; u < T; ++u) dscores[t * T + u] = prow[u] * (dprow[u] - dot);
      }
      // scores[t,u] = scale * q[t].k[u]
      for (size_t t = 0; t < T; ++t) {
        double* dqv = dq.data() + (b * T + t) * H + a * dh;
        for (size_t u = 0; u < T; ++u) {
          const double ds = dscores[t * T + u] * scale;
          if (ds == 0.0) continue;
          const double* kv = c.k.data() + (b * T + u) * H + a * dh;
          for (size_t e = 0; e < dh; ++e) dqv[e] += ds * kv[e];
        }
      }
      for (size_t u = 0; u < T; ++u) {
        double* dkv = dk.data() + (b * T + u) * H + a * dh;
        for (size_t t = 0; t < T; ++t) {
          const double ds = dscores[t * T + u] * scale;
          if (ds == 0.0) continue;
          const double* qv = c.q.data() + (b * T + t) * H + a * dh;
          for (size_t e = 0; e < dh; ++e) dkv[e] += ds * qv[e];
        }
      }
    }

    // q = x_in*Wq + bq (same for k, v)
    par::gemm_tn(grad(L.wq), c.x_in.data(), dq.data(), {H, H, N});
    par::bias_grad(grad(L.bq), dq.data(), N, H);
    par::gemm_nt(tmpNH.data(), dq.data(), param(L.wq), {N, H, H});
    for (size_t i = 0; i < N * H; ++i) d_xin[i] += tmpNH[i];
    par::gemm_tn(grad(L.wk), c.x_in.data(), dk.data(), {H, H, N});
    par::bias_grad(grad(L.bk), dk.data(), N, H);
    par::gemm_nt(tmpNH.data(), dk.data(), param(L.wk), {N, H, H});
    for (size_t i = 0; i < N * H; ++i) d_xin[i] += tmpNH[i];
    par::gemm_tn(grad(L.wv), c.x_in.data(), dv.data(), {H, H, N});
    par::bias_grad(grad(L.bv), dv.data(), N, H);
    par::gemm_nt(tmpNH.data(), dv.data(), param(L.wv), {N, H, H});
    for (size_t i = 0; i < N * H; ++i) d_xin[i] += tmpNH[i];

    dx = std::move(d_xin);
  }

  // embedding layernorm
  std::vector<double> d_emb(N * H);
  par::layernorm_backward(d_emb.data(), grad(layout_.ln_e_g), grad(layout_.ln_e_b), dx.data(), cache.emb.data(),
                          cache.emb_mean.data(), cache.emb_rstd.data(), param(layout_.ln_e_g), N, H);

  // scatter into embedding tables (serial: rows collide across positions)
  for (size_t p = 0; p < N; ++p) {
    const double* src = d_emb.data() + p * H;
    double* dtok = grad(layout_.tok_emb + static_cast<size_t>(batch.ids[p]) * H);
    double* dpos = grad(layout_.pos_emb + (p % T) * H);
    for (size_t j = 0; j < H; ++j) {
      dtok[j] += src[j];
      dpos[j] += src[j];
    }
  }
}

void EncoderModel::head_logits(const Cache& cache, const std::vector<size_t>& rows, std::vector<double>& logits) const {
  const size_t H = cfg_.hidden, V = cfg_.vocab;
  const size_t M = rows.size();
  std::vector<double> gathered(M * H);
  for (size_t r = 0; r < M; ++r)
    for (size_t j = 0; j < H; ++j) gathered[r * H + j] = cache.hidden[rows[r] * H + j];
  logits.assign(M * V, 0.0);
  par::gemm_nn(logits.data(), gathered.data(), param(layout_.mlm_w), {M, V, H});
  par::add_bias(logits.data(), param(layout_.mlm_b), M, V);
}

void EncoderModel::head_backward(const Cache& cache, const std::vector<size_t>& rows,
                                 const std::vector<double>& d_logits, std::vector<double>& d_hidden) {
  const size_t H = cfg_.hidden, V = cfg_.vocab;
  const size_t M = rows.size();
  std::vector<double> gathered(M * H);
  for (size_t r = 0; r < M; ++r)
    for (size_t j = 0; j < H; ++j) gathered[r * H + j] = cache.hidden[rows[r] * H + j];
  par::gemm_tn(grad(layout_.mlm_w), gathered.data(), d_logits.data(), {H, V, M});
  par::bias_grad(grad(layout_.mlm_b), d_logits.data(), M, V);
  std::vector<double> d_gathered(M * H, 0.0);
  par::gemm_nt(d_gathered.data(), d_logits.data(), param(layout_.mlm_w), {M, H, V});
  d_hidden.assign(cache.hidden.size(), 0.0);
  for (size_t r = 0; r < M; ++r)
    for (size_t j = 0; j < H; ++j) d_hidden[rows[r] * H + j] += d_gathered[r * H + j];
}

}  // namespace dapt::nn
