#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "querymesh/autograd.hpp"
#include "querymesh/bpe.hpp"
#include "querymesh/error.hpp"

namespace querymesh::model {

enum class Mode { kVanilla, kMesh };

inline const char* to_string(Mode m) { return m == Mode::kVanilla ? "vanilla" : "mesh"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "vanilla") return Mode::kVanilla;
  if (s == "mesh") return Mode::kMesh;
  throw RuntimeError("unknown model mode: " + s);
}

struct ModelConfig {
  int d_model = 64;
  int n_heads = 2;
  int n_enc_layers = 1;
  int n_dec_layers = 1;
  int d_ff = 128;
  int max_positions = 128;
  int vocab_size = 0;
  double dropout_rate = 0.1;
  Mode mode = Mode::kMesh;
  bool sinusoidal_positions = false;  // learned positions by default
  bool mesh_attn_bias = false;        // per-hypothesis bias on the fusion logit

  void validate() const {
    require(d_model > 0 && n_heads > 0 && d_ff > 0 && max_positions > 1 && vocab_size > 0 &&
                n_enc_layers > 0 && n_dec_layers > 0,
            "ModelConfig: all dimensions must be positive");
    require(d_model % n_heads == 0, "ModelConfig: d_model must be divisible by n_heads");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "ModelConfig: dropout_rate in [0,1)");
  }
};

// Encoder output for one hypothesis: states row j is S_i^(j).
template <typename S>
struct Encoding {
  ag::Var<S> states;       // [T x d_model]
  std::vector<bool> mask;  // true where the position holds a real token
};

// Eq-style meshed representation: fused row j is F^(j), alphas row j holds
// the four hypothesis weights at that position (zero where invalid).
template <typename S>
struct Meshed {
  ag::Var<S> fused;             // [T x d_model]
  std::vector<bool> union_mask; // OR of the four hypothesis masks
  ag::Var<S> alphas;            // [T x 4]
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
};

// Shared encoder-decoder transformer with hand-rolled parameters on top of
// the autograd layer. One instance serves both operating paths: a vanilla
// single-input forward and the meshed four-hypothesis forward; w_attn exists
// only in mesh mode.
template <typename S>
struct Transformer {
  using Var = ag::Var<S>;
  using MatS = ag::Mat<S>;

  struct LayerNormP {
    Var gamma, beta;
  };
  struct AttnP {
    Var wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct EncLayer {
    LayerNormP ln1;
    AttnP attn;
    LayerNormP ln2;
    Var w1, b1, w2, b2;
  };
  struct DecLayer {
    LayerNormP ln1;
    AttnP self_attn;
    LayerNormP ln2;
    AttnP cross_attn;
    LayerNormP ln3;
    Var w1, b1, w2, b2;
  };

  ModelConfig cfg;
  Var tok_emb;   // [V x d], shared between encoder and decoder
  Var pos_enc;   // [P x d]
  Var pos_dec;   // [P x d]
  std::vector<EncLayer> enc_layers;
  LayerNormP enc_final;
  std::vector<DecLayer> dec_layers;
  LayerNormP dec_final;
  Var w_out, b_out;  // [d x V], [1 x V]
  Var w_attn;        // [1 x d], mesh mode only
  Var b_attn;        // [1 x 4], only with mesh_attn_bias

  static Transformer init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Transformer m;
    m.cfg = cfg;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    auto normal = [&](int r, int c) {
      MatS w(r, c);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(dist(rng));
      return Var::param(std::move(w));
    };
    auto zeros = [&](int r, int c) { return Var::param(MatS::Zero(r, c)); };
    auto ones_row = [&](int c) { return Var::param(MatS::Ones(1, c)); };
    const int d = cfg.d_model;

    m.tok_emb = normal(cfg.vocab_size, d);
    if (cfg.sinusoidal_positions) {
      MatS pos(cfg.max_positions, d);
      for (int p = 0; p < cfg.max_positions; ++p)
        for (int i = 0; i < d; ++i) {
          double angle = p / std::pow(10000.0, 2.0 * (i / 2) / d);
          pos(p, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
      m.pos_enc = Var::constant(pos);
      m.pos_dec = Var::constant(pos);
    } else {
      m.pos_enc = normal(cfg.max_positions, d);
      m.pos_dec = normal(cfg.max_positions, d);
    }
    auto make_ln = [&] { return LayerNormP{ones_row(d), zeros(1, d)}; };
    auto make_attn = [&] {
      return AttnP{normal(d, d), zeros(1, d), normal(d, d), zeros(1, d),
                   normal(d, d), zeros(1, d), normal(d, d), zeros(1, d)};
    };
    for (int l = 0; l < cfg.n_enc_layers; ++l)
      m.enc_layers.push_back(EncLayer{make_ln(), make_attn(), make_ln(), normal(d, cfg.d_ff),
                                      zeros(1, cfg.d_ff), normal(cfg.d_ff, d), zeros(1, d)});
    m.enc_final = make_ln();
    for (int l = 0; l < cfg.n_dec_layers; ++l)
      m.dec_layers.push_back(DecLayer{make_ln(), make_attn(), make_ln(), make_attn(), make_ln(),
                                      normal(d, cfg.d_ff), zeros(1, cfg.d_ff),
                                      normal(cfg.d_ff, d), zeros(1, d)});
    m.dec_final = make_ln();
    m.w_out = normal(d, cfg.vocab_size);
    m.b_out = zeros(1, cfg.vocab_size);
    if (cfg.mode == Mode::kMesh) {
      m.w_attn = normal(1, d);
      if (cfg.mesh_attn_bias) m.b_attn = zeros(1, 4);
    }
    return m;
  }

  std::vector<std::pair<std::string, Var*>> named_params() {
    std::vector<std::pair<std::string, Var*>> out;
    auto push = [&](const std::string& name, Var& v) {
      if (v.defined() && v.requires_grad()) out.emplace_back(name, &v);
    };
    push("tok_emb", tok_emb);
    push("pos_enc", pos_enc);
    push("pos_dec", pos_dec);
    auto push_ln = [&](const std::string& p, LayerNormP& ln) {
      push(p + ".gamma", ln.gamma);
      push(p + ".beta", ln.beta);
    };
    auto push_attn = [&](const std::string& p, AttnP& a) {
      push(p + ".wq", a.wq);
      push(p + ".bq", a.bq);
      push(p + ".wk", a.wk);
      push(p + ".bk", a.bk);
      push(p + ".wv", a.wv);
      push(p + ".bv", a.bv);
      push(p + ".wo", a.wo);
      push(p + ".bo", a.bo);
    };
    for (size_t l = 0; l < enc_layers.size(); ++l) {
      std::string p = "enc" + std::to_string(l);
      push_ln(p + ".ln1", enc_layers[l].ln1);
      push_attn(p + ".attn", enc_layers[l].attn);
      push_ln(p + ".ln2", enc_layers[l].ln2);
      push(p + ".w1", enc_layers[l].w1);
      push(p + ".b1", enc_layers[l].b1);
      push(p + ".w2", enc_layers[l].w2);
      push(p + ".b2", enc_layers[l].b2);
    }
    push_ln("enc_final", enc_final);
    for (size_t l = 0; l < dec_layers.size(); ++l) {
      std::string p = "dec" + std::to_string(l);
      push_ln(p + ".ln1", dec_layers[l].ln1);
      push_attn(p + ".self", dec_layers[l].self_attn);
      push_ln(p + ".ln2", dec_layers[l].ln2);
      push_attn(p + ".cross", dec_layers[l].cross_attn);
      push_ln(p + ".ln3", dec_layers[l].ln3);
      push(p + ".w1", dec_layers[l].w1);
      push(p + ".b1", dec_layers[l].b1);
      push(p + ".w2", dec_layers[l].w2);
      push(p + ".b2", dec_layers[l].b2);
    }
    push_ln("dec_final", dec_final);
    push("w_out", w_out);
    push("b_out", b_out);
    push("w_attn", w_attn);
    push("b_attn", b_attn);
    return out;
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    for (auto& [name, v] : named_params()) n += static_cast<std::int64_t>(v->size());
    return n;
  }

  void zero_grads() {
    for (auto& [name, v] : named_params()) v->zero_grad();
  }
};

namespace detail {

template <typename S>
ag::Var<S> maybe_dropout(ag::Var<S> x, const ModelConfig& cfg, const ForwardOptions& opt) {
  if (!opt.training || cfg.dropout_rate <= 0.0) return x;
  require(opt.rng != nullptr, "training forward with dropout requires an rng");
  std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
  ag::Mat<S> mask(x.rows(), x.cols());
  const S scale = static_cast<S>(1.0 / (1.0 - cfg.dropout_rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = keep(*opt.rng) ? scale : S(0);
  return ag::cwise_mul_const(x, std::move(mask));
}

// Multi-head attention over precomputed queries/keys/values inputs.
// `valid(q, k)` says whether query position q may look at key position k.
template <typename S>
ag::Var<S> attention(const typename Transformer<S>::AttnP& p, const ag::Var<S>& q_in,
                     const ag::Var<S>& kv_in, const ag::BoolArr& valid, const ModelConfig& cfg) {
  const int d = cfg.d_model;
  const int dh = d / cfg.n_heads;
  auto q = ag::add_rowvec(ag::matmul(q_in, p.wq), p.bq);
  auto k = ag::add_rowvec(ag::matmul(kv_in, p.wk), p.bk);
  auto v = ag::add_rowvec(ag::matmul(kv_in, p.wv), p.bv);
  std::vector<ag::Var<S>> heads;
  heads.reserve(static_cast<size_t>(cfg.n_heads));
  const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  for (int h = 0; h < cfg.n_heads; ++h) {
    auto qh = ag::col_block(q, h * dh, dh);
    auto kh = ag::col_block(k, h * dh, dh);
    auto vh = ag::col_block(v, h * dh, dh);
    auto scores = ag::scale(ag::matmul_nt(qh, kh), inv_sqrt_dh);
    auto probs = ag::softmax_rows_masked(scores, valid);
    heads.push_back(ag::matmul(probs, vh));
  }
  auto ctx = cfg.n_heads == 1 ? heads[0] : ag::concat_cols(heads);
  return ag::add_rowvec(ag::matmul(ctx, p.wo), p.bo);
}

template <typename S>
ag::Var<S> feed_forward(const ag::Var<S>& x, const ag::Var<S>& w1, const ag::Var<S>& b1,
                        const ag::Var<S>& w2, const ag::Var<S>& b2) {
  return ag::add_rowvec(ag::matmul(ag::gelu(ag::add_rowvec(ag::matmul(x, w1), b1)), w2), b2);
}

inline ag::BoolArr key_mask(Eigen::Index n_query, const std::vector<bool>& key_valid) {
  ag::BoolArr m(n_query, static_cast<Eigen::Index>(key_valid.size()));
  for (Eigen::Index k = 0; k < m.cols(); ++k)
    m.col(k).setConstant(key_valid[static_cast<size_t>(k)]);
  return m;
}

inline ag::BoolArr causal_mask(Eigen::Index n) {
  ag::BoolArr m(n, n);
  for (Eigen::Index q = 0; q < n; ++q)
    for (Eigen::Index k = 0; k < n; ++k) m(q, k) = k <= q;
  return m;
}

}  // namespace detail

// Standard pre-norm encoder stack over one formatted token sequence.
// Refuses overlong input instead of truncating.
template <typename S>
Encoding<S> encode(Transformer<S>& m, const bpe::TokenSequence& seq, const ForwardOptions& opt) {
  require(seq.length() > 0, "encode: empty sequence");
  require(seq.length() <= m.cfg.max_positions,
          "encode: sequence length " + std::to_string(seq.length()) +
              " exceeds max_positions " + std::to_string(m.cfg.max_positions));
  std::vector<int> positions(seq.ids.size());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  auto x = ag::add(ag::gather_rows(m.tok_emb, seq.ids), ag::gather_rows(m.pos_enc, positions));
  x = detail::maybe_dropout(x, m.cfg, opt);
  const auto mask = detail::key_mask(seq.length(), seq.mask);
  for (auto& layer : m.enc_layers) {
    auto normed = ag::layer_norm(x, layer.ln1.gamma, layer.ln1.beta);
    auto a = detail::attention<S>(layer.attn, normed, normed, mask, m.cfg);
    x = ag::add(x, detail::maybe_dropout(a, m.cfg, opt));
    auto f = detail::feed_forward(ag::layer_norm(x, layer.ln2.gamma, layer.ln2.beta), layer.w1,
                                  layer.b1, layer.w2, layer.b2);
    x = ag::add(x, detail::maybe_dropout(f, m.cfg, opt));
  }
  return Encoding<S>{ag::layer_norm(x, m.enc_final.gamma, m.enc_final.beta), seq.mask};
}

// Tokenwise fusion of the four hypothesis encodings: at each position j the
// fusion logit of hypothesis i is w_attn . S_i^(j); alphas are the softmax
// over the hypotheses valid at j and F^(j) their convex combination.
// Positions valid in no hypothesis come out as zero rows with a false
// union mask.
template <typename S>
Meshed<S> mesh_fuse(Transformer<S>& m, const std::array<Encoding<S>, 4>& encodings) {
  require(m.cfg.mode == Mode::kMesh && m.w_attn.defined(),
          "mesh_fuse: model was not built in mesh mode");
  const Eigen::Index T = encodings[0].states.rows();
  ag::BoolArr valid(T, 4);
  std::vector<bool> union_mask(static_cast<size_t>(T), false);
  for (int i = 0; i < 4; ++i) {
    require(encodings[static_cast<size_t>(i)].states.rows() == T,
            "mesh_fuse: hypothesis encodings must share a common length");
    require(static_cast<Eigen::Index>(encodings[static_cast<size_t>(i)].mask.size()) == T,
            "mesh_fuse: encoding mask length mismatch");
    for (Eigen::Index j = 0; j < T; ++j) {
      bool ok = encodings[static_cast<size_t>(i)].mask[static_cast<size_t>(j)];
      valid(j, i) = ok;
      if (ok) union_mask[static_cast<size_t>(j)] = true;
    }
  }

  std::vector<ag::Var<S>> logit_cols;
  for (int i = 0; i < 4; ++i)
    logit_cols.push_back(ag::matmul_nt(encodings[static_cast<size_t>(i)].states, m.w_attn));
  auto logits = ag::concat_cols(logit_cols);  // [T x 4]
  if (m.b_attn.defined()) logits = ag::add_rowvec(logits, m.b_attn);
  auto alphas = ag::softmax_rows_masked(logits, valid);

  auto ones_row = ag::Var<S>::constant(ag::Mat<S>::Ones(1, m.cfg.d_model));
  ag::Var<S> fused;
  for (int i = 0; i < 4; ++i) {
    auto weight = ag::matmul(ag::col_block(alphas, i, 1), ones_row);  // [T x d] broadcast
    auto term = ag::cwise_mul(encodings[static_cast<size_t>(i)].states, weight);
    fused = i == 0 ? term : ag::add(fused, term);
  }
  return Meshed<S>{std::move(fused), std::move(union_mask), std::move(alphas)};
}

// Pre-norm decoder stack: causal self-attention over the target prefix plus
// cross-attention over the (fused or plain) encoder memory restricted to its
// validity mask. Returns next-token logits for every prefix position.
template <typename S>
ag::Var<S> decode_logits(Transformer<S>& m, const ag::Var<S>& memory,
                         const std::vector<bool>& memory_mask, const std::vector<int>& target_in,
                         const ForwardOptions& opt) {
  require(!target_in.empty() && target_in.front() == bpe::kBos,
          "decode_logits: target prefix must start with BOS");
  require(static_cast<int>(target_in.size()) <= m.cfg.max_positions,
          "decode_logits: prefix length exceeds max_positions");
  require(memory.rows() == static_cast<Eigen::Index>(memory_mask.size()),
          "decode_logits: memory mask length mismatch");
  const Eigen::Index Tt = static_cast<Eigen::Index>(target_in.size());
  std::vector<int> positions(target_in.size());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  auto x = ag::add(ag::gather_rows(m.tok_emb, target_in), ag::gather_rows(m.pos_dec, positions));
  x = detail::maybe_dropout(x, m.cfg, opt);
  const auto self_mask = detail::causal_mask(Tt);
  const auto cross_mask = detail::key_mask(Tt, memory_mask);
  for (auto& layer : m.dec_layers) {
    auto normed = ag::layer_norm(x, layer.ln1.gamma, layer.ln1.beta);
    auto a = detail::attention<S>(layer.self_attn, normed, normed, self_mask, m.cfg);
    x = ag::add(x, detail::maybe_dropout(a, m.cfg, opt));
    auto c = detail::attention<S>(layer.cross_attn,
                                  ag::layer_norm(x, layer.ln2.gamma, layer.ln2.beta), memory,
                                  cross_mask, m.cfg);
    x = ag::add(x, detail::maybe_dropout(c, m.cfg, opt));
    auto f = detail::feed_forward(ag::layer_norm(x, layer.ln3.gamma, layer.ln3.beta), layer.w1,
                                  layer.b1, layer.w2, layer.b2);
    x = ag::add(x, detail::maybe_dropout(f, m.cfg, opt));
  }
  x = ag::layer_norm(x, m.dec_final.gamma, m.dec_final.beta);
  return ag::add_rowvec(ag::matmul(x, m.w_out), m.b_out);
}

// Model inputs for one training example. Vanilla mode uses `single`; mesh
// mode uses all four hypothesis sequences in fixed K order.
struct ExampleInputs {
  std::vector<bpe::TokenSequence> sequences;  // size 1 (vanilla) or 4 (mesh)
  bpe::TokenSequence target;                  // BOS + ground truth + EOS
};

template <typename S>
struct MemoryStates {
  ag::Var<S> states;
  std::vector<bool> mask;
  ag::Var<S> alphas;  // defined in mesh mode only
};

template <typename S>
MemoryStates<S> encode_inputs(Transformer<S>& m, const ExampleInputs& ex,
                              const ForwardOptions& opt) {
  if (m.cfg.mode == Mode::kVanilla) {
    require(ex.sequences.size() == 1, "vanilla mode expects exactly one input sequence");
    auto enc = encode(m, ex.sequences[0], opt);
    return MemoryStates<S>{enc.states, enc.mask, {}};
  }
  require(ex.sequences.size() == 4, "mesh mode expects the four hypothesis sequences");
  // Right-pad the four hypotheses to their common maximum so Eq-style fusion
  // can index them by one position j.
  int common = 0;
  for (const auto& s : ex.sequences) common = std::max(common, s.length());
  std::array<Encoding<S>, 4> encs;
  for (int i = 0; i < 4; ++i)
    encs[static_cast<size_t>(i)] =
        encode(m, bpe::pad_to(ex.sequences[static_cast<size_t>(i)], common), opt);
  auto meshed = mesh_fuse(m, encs);
  return MemoryStates<S>{meshed.fused, meshed.union_mask, meshed.alphas};
}

// Sum of token-level cross entropies for one example plus the token count,
// teacher-forced: position t predicts target token t+1.
template <typename S>
std::pair<ag::Var<S>, int> example_loss_sum(Transformer<S>& m, const ExampleInputs& ex,
                                            const ForwardOptions& opt) {
  require(ex.target.length() >= 2, "example_loss_sum: target must be BOS + ... + EOS");
  auto mem = encode_inputs(m, ex, opt);
  std::vector<int> target_in(ex.target.ids.begin(), ex.target.ids.end() - 1);
  std::vector<int> target_out(ex.target.ids.begin() + 1, ex.target.ids.end());
  auto logits = decode_logits(m, mem.states, mem.mask, target_in, opt);
  return {ag::cross_entropy_sum(logits, target_out), static_cast<int>(target_out.size())};
}

// Mean token-level cross entropy over all non-PAD target positions in the
// batch, i.e. the per-session sums weighted together by token count.
template <typename S>
ag::Var<S> forward_loss(Transformer<S>& m, const std::vector<ExampleInputs>& batch,
                        const ForwardOptions& opt) {
  require(!batch.empty(), "forward_loss: empty batch");
  ag::Var<S> total;
  int tokens = 0;
  for (const auto& ex : batch) {
    auto [sum, count] = example_loss_sum(m, ex, opt);
    total = total.defined() ? ag::add(total, sum) : sum;
    tokens += count;
  }
  return ag::scale(total, static_cast<S>(1.0 / tokens));
}

// Next-token logits for a decoding prefix, as a plain row vector. Call under
// NoGradGuard with precomputed memory for beam search.
template <typename S>
Eigen::Matrix<S, 1, Eigen::Dynamic> next_token_logits(Transformer<S>& m,
                                                      const MemoryStates<S>& mem,
                                                      const std::vector<int>& prefix) {
  ag::NoGradGuard ng;
  ForwardOptions opt;  // inference
  auto logits = decode_logits(m, mem.states, mem.mask, prefix, opt);
  return logits.value().row(logits.rows() - 1);
}

// ---- checkpoint ------------------------------------------------------------

inline void write_config(std::ostream& out, const ModelConfig& cfg) {
  out << "d_model " << cfg.d_model << '\n'
      << "n_heads " << cfg.n_heads << '\n'
      << "n_enc_layers " << cfg.n_enc_layers << '\n'
      << "n_dec_layers " << cfg.n_dec_layers << '\n'
      << "d_ff " << cfg.d_ff << '\n'
      << "max_positions " << cfg.max_positions << '\n'
      << "vocab_size " << cfg.vocab_size << '\n'
      << "dropout_rate " << cfg.dropout_rate << '\n'
      << "mode " << to_string(cfg.mode) << '\n'
      << "sinusoidal_positions " << (cfg.sinusoidal_positions ? 1 : 0) << '\n'
      << "mesh_attn_bias " << (cfg.mesh_attn_bias ? 1 : 0) << '\n';
}

inline ModelConfig read_config(std::istream& in) {
  ModelConfig cfg;
  std::string key;
  std::string mode;
  int sinus = 0, bias = 0;
  in >> key >> cfg.d_model >> key >> cfg.n_heads >> key >> cfg.n_enc_layers >> key >>
      cfg.n_dec_layers >> key >> cfg.d_ff >> key >> cfg.max_positions >> key >>
      cfg.vocab_size >> key >> cfg.dropout_rate >> key >> mode >> key >> sinus >> key >> bias;
  require(static_cast<bool>(in), "checkpoint: truncated config header");
  cfg.mode = mode_from_string(mode);
  cfg.sinusoidal_positions = sinus != 0;
  cfg.mesh_attn_bias = bias != 0;
  return cfg;
}

// Hexfloat text dump: portable, bit-exact across save/load round trips.
template <typename S>
void save_model(std::ostream& out, Transformer<S>& m) {
  out << "querymesh-model v1\n";
  write_config(out, m.cfg);
  char buf[64];
  for (auto& [name, var] : m.named_params()) {
    out << "param " << name << ' ' << var->rows() << ' ' << var->cols() << '\n';
    const auto& v = var->value();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%a", static_cast<double>(v(r, c)));
        out << buf << (c + 1 < v.cols() ? " " : "");
      }
      out << '\n';
    }
  }
  out << "end\n";
}

template <typename S>
Transformer<S> load_model(std::istream& in, std::uint64_t init_seed = 0) {
  std::string magic, version;
  in >> magic >> version;
  require(magic == "querymesh-model" && version == "v1", "bad model checkpoint header");
  ModelConfig cfg = read_config(in);
  auto m = Transformer<S>::init(cfg, init_seed);
  std::map<std::string, ag::Var<S>*> by_name;
  for (auto& [name, var] : m.named_params()) by_name[name] = var;
  std::string tag;
  while (in >> tag) {
    if (tag == "end") break;
    require(tag == "param", "bad checkpoint: expected param block, got " + tag);
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    in >> name >> rows >> cols;
    auto it = by_name.find(name);
    require(it != by_name.end(), "checkpoint has unknown parameter " + name);
    require(it->second->rows() == rows && it->second->cols() == cols,
            "checkpoint shape mismatch for " + name);
    auto& v = it->second->mutable_value();
    std::string tok;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        in >> tok;
        v(r, c) = static_cast<S>(std::strtod(tok.c_str(), nullptr));
      }
  }
  require(tag == "end", "checkpoint: missing end marker");
  return m;
}

}  // namespace querymesh::model
