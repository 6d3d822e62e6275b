#pragma once
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "respira/core/error.hpp"
#include "respira/core/rng.hpp"
#include "respira/nn/lstm.hpp"
#include "respira/nn/ops.hpp"
#include "respira/nn/tensor.hpp"

namespace respira::nn {

enum class Variant { FullHybrid, DeepOnly, HandcraftedOnly, CnnOnly, NoAttention };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::FullHybrid: return "FullHybrid";
    case Variant::DeepOnly: return "DeepOnly";
    case Variant::HandcraftedOnly: return "HandcraftedOnly";
    case Variant::CnnOnly: return "CnnOnly";
    case Variant::NoAttention: return "NoAttention";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  for (Variant v : {Variant::FullHybrid, Variant::DeepOnly, Variant::HandcraftedOnly,
                    Variant::CnnOnly, Variant::NoAttention})
    if (s == variant_name(v)) return v;
  throw data_error("unknown model variant: " + s);
}

struct ConvBlockConfig {
  int filters = 0;
  int kernel = 3;
  int pool = 2;
};

struct ModelConfig {
  std::vector<ConvBlockConfig> conv_blocks = {{32, 3, 2}, {64, 3, 2}, {128, 3, 2}};
  double conv_dropout = 0.2;
  int lstm_units = 128;  // per direction
  int attention_dim = 128;
  std::vector<int> hand_hidden = {128, 128};
  double hand_dropout = 0.3;
  int fusion_hidden = 256;
  double fusion_dropout = 0.3;
  int n_classes = 5;
  Variant variant = Variant::FullHybrid;
  int mel_bins = 128;
  int mel_frames = 247;
  int hand_dim = 70;

  bool has_conv() const { return variant != Variant::HandcraftedOnly; }
  bool has_lstm() const {
    return variant == Variant::FullHybrid || variant == Variant::DeepOnly ||
           variant == Variant::NoAttention;
  }
  bool has_attention() const {
    return variant == Variant::FullHybrid || variant == Variant::DeepOnly;
  }
  bool has_hand() const { return variant != Variant::DeepOnly; }

  int conv_out_h() const {
    int h = mel_bins;
    for (const auto& b : conv_blocks) h /= b.pool;
    return h;
  }
  int conv_out_w() const {
    int w = mel_frames;
    for (const auto& b : conv_blocks) w /= b.pool;
    return w;
  }
  int conv_out_c() const { return conv_blocks.empty() ? 1 : conv_blocks.back().filters; }
  int lstm_input_dim() const { return conv_out_h() * conv_out_c(); }

  int deep_embed_dim() const {
    if (variant == Variant::HandcraftedOnly) return 0;
    if (variant == Variant::CnnOnly) return conv_out_c();
    return 2 * lstm_units;
  }
  int hand_embed_dim() const { return has_hand() ? hand_hidden.back() : 0; }
  int fused_dim() const { return deep_embed_dim() + hand_embed_dim(); }

  void validate() const {
    if (n_classes < 2) throw data_error("model config: n_classes must be >= 2");
    if (has_conv()) {
      if (conv_blocks.empty()) throw data_error("model config: at least one conv block required");
      for (const auto& b : conv_blocks) {
        if (b.filters <= 0) throw data_error("model config: conv filters must be positive");
        if (b.kernel % 2 == 0 || b.kernel <= 0)
          throw data_error("model config: conv kernels must be odd");
        if (b.pool != 2) throw data_error("model config: only 2x2 pooling is supported");
      }
      if (conv_out_h() < 1 || conv_out_w() < 1)
        throw data_error("model config: pooling collapses the spectrogram to nothing");
    }
    if (has_lstm() && lstm_units <= 0) throw data_error("model config: lstm_units must be positive");
    if (has_attention() && attention_dim <= 0)
      throw data_error("model config: attention_dim must be positive");
    if (has_hand()) {
      if (hand_hidden.size() != 2) throw data_error("model config: hand encoder takes two stages");
      for (int h : hand_hidden)
        if (h <= 0) throw data_error("model config: hand_hidden must be positive");
    }
    if (fusion_hidden <= 0) throw data_error("model config: fusion_hidden must be positive");
    auto prob = [](double p) { return p >= 0.0 && p < 1.0; };
    if (!prob(conv_dropout) || !prob(hand_dropout) || !prob(fusion_dropout))
      throw data_error("model config: dropout rates must lie in [0, 1)");
  }
};

enum class Mode { train, eval };

// Named tensor registry. Creation order is fixed per variant, which makes
// initialization draws and checkpoint layout deterministic.
template <typename S>
struct ParamSet {
  struct Entry {
    std::string name;
    Tensor<S> value;
    bool trainable = true;
    bool decay = false;  // participates in the L2 penalty
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, size_t> index;

  Tensor<S>& add(const std::string& name, std::vector<int> shape, bool trainable, bool decay) {
    index.emplace(name, entries.size());
    entries.push_back(Entry{name, Tensor<S>(std::move(shape)), trainable, decay});
    return entries.back().value;
  }

  bool has(const std::string& name) const { return index.count(name) > 0; }

  Tensor<S>& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw data_error("unknown parameter: " + name);
    return entries[it->second].value;
  }
  const Tensor<S>& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw data_error("unknown parameter: " + name);
    return entries[it->second].value;
  }

  int64_t count_trainable() const {
    int64_t n = 0;
    for (const auto& e : entries)
      if (e.trainable) n += e.value.numel();
    return n;
  }
  int64_t count_total() const {
    int64_t n = 0;
    for (const auto& e : entries) n += e.value.numel();
    return n;
  }
};

template <typename S>
struct Gradients {
  std::unordered_map<std::string, Tensor<S>> by_name;
  Tensor<S> d_mel;           // (N, bins, frames); empty for HandcraftedOnly
  Tensor<S> d_hand;          // (N, hand_dim); empty for DeepOnly
  Tensor<S> d_conv_feature;  // (N, M', T', C) at the last conv block output

  Tensor<S>& at(const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw data_error("no gradient for parameter: " + name);
    return it->second;
  }
};

// Everything retained by a forward pass: enough for exact backprop and for
// the attribution methods (conv feature maps, attention weights, ...).
template <typename S>
struct Trace {
  Mode mode = Mode::eval;
  int batch = 0;

  Tensor<S> mel;   // (N, bins, frames) as given
  Tensor<S> hand;  // (N, hand_dim)

  // conv path
  std::vector<Tensor<S>> conv_in;  // conv_in[i] = input of block i; conv_in[B] = final feature A
  std::vector<BnCache<S>> conv_bn;
  std::vector<Tensor<S>> conv_relu;               // post bn+relu
  std::vector<std::vector<int32_t>> conv_pool_arg;
  std::vector<Tensor<S>> conv_drop_mask;

  // temporal path
  Tensor<S> seq;  // (N, T', D) flattened conv features
  LstmCache<S> lstm_fw, lstm_bw;
  Tensor<S> bilstm_out;  // (N, T', 2U)
  Tensor<S> attn_u;      // (N*T', d_a) tanh activations
  Tensor<S> attn_alpha;  // (N, T')
  Tensor<S> context;     // (N, deep_embed_dim)

  // hand path
  BnCache<S> hand_bn1, hand_bn2;
  Tensor<S> hand_relu1, hand_relu2;
  Tensor<S> hand_drop_mask;
  Tensor<S> hand_out;  // (N, hand_embed)

  // fusion + head
  Tensor<S> fused;        // (N, fused_dim)
  Tensor<S> fusion_relu;  // post relu
  Tensor<S> fusion_mask;
  Tensor<S> fusion_out;  // head input
  Tensor<S> logits;      // (N, n_classes)
  Tensor<S> probs;       // (N, n_classes)

  const Tensor<S>& conv_feature() const { return conv_in.back(); }
};

template <typename S>
class Model {
public:
  Model() = default;
  explicit Model(ModelConfig cfg) : config_(std::move(cfg)) {
    config_.validate();
    build_params();
  }

  const ModelConfig& config() const { return config_; }
  ParamSet<S>& params() { return params_; }
  const ParamSet<S>& params() const { return params_; }

  // He-normal for conv and ReLU-fed dense layers, Xavier-uniform elsewhere,
  // LSTM forget bias at 1. Draw order = registry order.
  void init_params(Rng rng) {
    for (auto& e : params_.entries) {
      const std::string& n = e.name;
      Tensor<S>& t = e.value;
      if (n.find("run_mean") != std::string::npos) {
        t.fill(S(0));
        continue;
      }
      if (n.find("run_var") != std::string::npos) {
        t.fill(S(1));
        continue;
      }
      if (n.find("gamma") != std::string::npos) {
        t.fill(S(1));
        continue;
      }
      if (n.find("beta") != std::string::npos) {
        t.fill(S(0));
        continue;
      }
      if (ends_with(n, ".bias") || ends_with(n, ".b")) {
        t.fill(S(0));
        if (n == "lstm.fw.b" || n == "lstm.bw.b") {
          int u = config_.lstm_units;
          for (int j = 0; j < u; ++j) t.v[static_cast<size_t>(u + j)] = S(1);  // forget gate
        }
        continue;
      }
      if (n.find("conv") == 0 && ends_with(n, ".kernel")) {
        int fan_in = t.dim(0) * t.dim(1) * t.dim(2);
        he_normal(t, fan_in, rng);
        continue;
      }
      if (n.find("hand.fc") == 0 || n == "fusion.w") {
        he_normal(t, t.dim(0), rng);  // ReLU-fed dense
        continue;
      }
      if (n == "attn.v") {
        xavier_uniform(t, t.dim(0), 1, rng);
        continue;
      }
      if (n.find("lstm.") == 0) {
        xavier_uniform(t, t.dim(0), t.dim(1), rng);
        continue;
      }
      xavier_uniform(t, t.dim(0), t.dim(1), rng);  // attn.w, head.w
    }
  }

  Trace<S> forward(const Tensor<S>& mel, const Tensor<S>& hand, Mode mode, Rng dropout_rng = Rng(0)) const {
    return forward_impl(mel, hand, mode, dropout_rng, const_cast<Model*>(this));
  }

  // Eval-mode logits with the deep embedding held fixed: runs only the hand
  // encoder, fusion and head. Exact match with a full eval forward whose
  // trace produced `context`; this is what makes Shapley sampling over the
  // handcrafted features affordable (the deep branch never varies there).
  Tensor<S> logits_with_fixed_deep(const Tensor<S>& context, const Tensor<S>& hand) const {
    const ModelConfig& cfg = config_;
    const ParamSet<S>& P = params_;
    const int deep_dim = cfg.deep_embed_dim();
    const int hand_dim = cfg.hand_embed_dim();
    const int n = cfg.has_hand() ? hand.dim(0) : context.dim(0);
    if (deep_dim > 0) check_shape(context, {n, deep_dim}, "fixed deep embedding");

    Tensor<S> hand_out;
    if (cfg.has_hand()) {
      check_shape(hand, {n, cfg.hand_dim}, "hand input");
      auto eval_bn = [&](const Tensor<S>& x, int ch, const std::string& bn) {
        Tensor<S> y;
        batchnorm_forward(x, ch, P.at(bn + ".gamma"), P.at(bn + ".beta"),
                          const_cast<Tensor<S>&>(P.at(bn + ".run_mean")),
                          const_cast<Tensor<S>&>(P.at(bn + ".run_var")), /*train=*/false, y,
                          static_cast<BnCache<S>*>(nullptr));
        return y;
      };
      Tensor<S> h1;
      dense_forward(hand, P.at("hand.fc1.w"), P.at("hand.fc1.b"), h1);
      Tensor<S> b1 = eval_bn(h1, cfg.hand_hidden[0], "hand.bn1");
      relu_forward(b1);
      Tensor<S> h2;
      dense_forward(b1, P.at("hand.fc2.w"), P.at("hand.fc2.b"), h2);
      hand_out = eval_bn(h2, cfg.hand_hidden[1], "hand.bn2");
      relu_forward(hand_out);
    }

    Tensor<S> fused({n, deep_dim + hand_dim});
    for (int i = 0; i < n; ++i) {
      S* dst = fused.data() + static_cast<int64_t>(i) * (deep_dim + hand_dim);
      if (deep_dim > 0)
        std::copy_n(context.data() + static_cast<int64_t>(i) * deep_dim, deep_dim, dst);
      if (hand_dim > 0)
        std::copy_n(hand_out.data() + static_cast<int64_t>(i) * hand_dim, hand_dim,
                    dst + deep_dim);
    }
    Tensor<S> f;
    dense_forward(fused, P.at("fusion.w"), P.at("fusion.b"), f);
    relu_forward(f);
    Tensor<S> logits;
    dense_forward(f, P.at("head.w"), P.at("head.b"), logits);
    return logits;
  }

  // Exact reverse-mode gradients for every parameter and both inputs given
  // d(loss)/d(logits). The trace must come from this model's forward.
  Gradients<S> backward(const Trace<S>& trace, const Tensor<S>& dlogits) const {
    if (trace.logits.numel() == 0) throw data_error("backward: trace has no retained activations");
    check_shape(dlogits, trace.logits.shape, "backward upstream gradient");

    const ModelConfig& cfg = config_;
    Gradients<S> g;
    for (const auto& e : params_.entries)
      if (e.trainable) g.by_name.emplace(e.name, Tensor<S>(e.value.shape));

    // head
    Tensor<S> d_fusion_out, dw, db;
    dense_backward(trace.fusion_out, params_.at("head.w"), dlogits, d_fusion_out, dw, db);
    g.at("head.w") = std::move(dw);
    g.at("head.b") = std::move(db);

    // fusion dense + relu + dropout
    Tensor<S> d_fusion_relu = d_fusion_out;
    if (trace.mode == Mode::train && trace.fusion_mask.numel() > 0)
      dropout_backward(trace.fusion_mask, d_fusion_relu);
    relu_backward(trace.fusion_relu, d_fusion_relu);
    Tensor<S> d_fused;
    dense_backward(trace.fused, params_.at("fusion.w"), d_fusion_relu, d_fused, dw, db);
    g.at("fusion.w") = std::move(dw);
    g.at("fusion.b") = std::move(db);

    // split fused gradient
    const int n = trace.batch;
    const int deep_dim = cfg.deep_embed_dim();
    const int hand_dim = cfg.hand_embed_dim();
    Tensor<S> d_context, d_hand_out;
    if (deep_dim > 0) {
      d_context = Tensor<S>({n, deep_dim});
      for (int i = 0; i < n; ++i)
        std::copy_n(d_fused.data() + static_cast<int64_t>(i) * (deep_dim + hand_dim), deep_dim,
                    d_context.data() + static_cast<int64_t>(i) * deep_dim);
    }
    if (hand_dim > 0) {
      d_hand_out = Tensor<S>({n, hand_dim});
      for (int i = 0; i < n; ++i)
        std::copy_n(d_fused.data() + static_cast<int64_t>(i) * (deep_dim + hand_dim) + deep_dim,
                    hand_dim, d_hand_out.data() + static_cast<int64_t>(i) * hand_dim);
    }

    if (cfg.has_hand()) backward_hand(trace, d_hand_out, g);
    if (cfg.has_conv()) backward_deep(trace, d_context, g);
    return g;
  }

  int64_t trainable_parameter_count() const { return params_.count_trainable(); }

private:
  static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  void he_normal(Tensor<S>& t, int fan_in, Rng& rng) {
    double sd = std::sqrt(2.0 / fan_in);
    for (auto& v : t.v) v = static_cast<S>(sd * rng.gaussian());
  }
  void xavier_uniform(Tensor<S>& t, int fan_in, int fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.v) v = static_cast<S>(rng.uniform(-limit, limit));
  }

  void build_params() {
    const ModelConfig& c = config_;
    if (c.has_conv()) {
      int cin = 1;
      for (size_t i = 0; i < c.conv_blocks.size(); ++i) {
        const auto& b = c.conv_blocks[i];
        std::string p = "conv" + std::to_string(i);
        params_.add(p + ".kernel", {b.kernel, b.kernel, cin, b.filters}, true, true);
        params_.add(p + ".bias", {b.filters}, true, false);
        params_.add(p + ".bn.gamma", {b.filters}, true, false);
        params_.add(p + ".bn.beta", {b.filters}, true, false);
        params_.add(p + ".bn.run_mean", {b.filters}, false, false);
        params_.add(p + ".bn.run_var", {b.filters}, false, false);
        cin = b.filters;
      }
    }
    if (c.has_lstm()) {
      int d = c.lstm_input_dim(), u = c.lstm_units;
      for (const char* dir : {"fw", "bw"}) {
        std::string p = std::string("lstm.") + dir;
        params_.add(p + ".wx", {d, 4 * u}, true, true);
        params_.add(p + ".wh", {u, 4 * u}, true, true);
        params_.add(p + ".b", {4 * u}, true, false);
      }
    }
    if (c.has_attention()) {
      params_.add("attn.w", {2 * c.lstm_units, c.attention_dim}, true, true);
      params_.add("attn.b", {c.attention_dim}, true, false);
      params_.add("attn.v", {c.attention_dim}, true, true);
    }
    if (c.has_hand()) {
      int in = c.hand_dim;
      for (int s = 0; s < 2; ++s) {
        int out = c.hand_hidden[static_cast<size_t>(s)];
        std::string fc = "hand.fc" + std::to_string(s + 1);
        std::string bn = "hand.bn" + std::to_string(s + 1);
        params_.add(fc + ".w", {in, out}, true, true);
        params_.add(fc + ".b", {out}, true, false);
        params_.add(bn + ".gamma", {out}, true, false);
        params_.add(bn + ".beta", {out}, true, false);
        params_.add(bn + ".run_mean", {out}, false, false);
        params_.add(bn + ".run_var", {out}, false, false);
        in = out;
      }
    }
    params_.add("fusion.w", {c.fused_dim(), c.fusion_hidden}, true, true);
    params_.add("fusion.b", {c.fusion_hidden}, true, false);
    params_.add("head.w", {c.fusion_hidden, c.n_classes}, true, true);
    params_.add("head.b", {c.n_classes}, true, false);
  }

  static Trace<S> forward_impl(const Tensor<S>& mel, const Tensor<S>& hand, Mode mode,
                               Rng dropout_rng, Model* self) {
    const ModelConfig& cfg = self->config_;
    ParamSet<S>& P = self->params_;
    const bool train = mode == Mode::train;

    Trace<S> tr;
    tr.mode = mode;

    if (cfg.has_conv()) {
      if (mel.shape.size() != 3) throw data_error("forward: mel input must be (batch, bins, frames)");
      check_shape(mel, {mel.dim(0), cfg.mel_bins, cfg.mel_frames}, "forward mel input");
      tr.batch = mel.dim(0);
    }
    if (cfg.has_hand()) {
      if (hand.shape.size() != 2) throw data_error("forward: hand input must be (batch, dim)");
      check_shape(hand, {hand.dim(0), cfg.hand_dim}, "forward hand input");
      if (tr.batch == 0) tr.batch = hand.dim(0);
      if (hand.dim(0) != tr.batch) throw data_error("forward: mel/hand batch mismatch");
    }
    const int n = tr.batch;
    for (auto& v : mel.v)
      if (!std::isfinite(static_cast<double>(v))) throw numeric_error("forward: non-finite mel input");
    for (auto& v : hand.v)
      if (!std::isfinite(static_cast<double>(v))) throw numeric_error("forward: non-finite hand input");

    tr.mel = mel;
    tr.hand = hand;

    // --- conv encoder ---
    if (cfg.has_conv()) {
      Tensor<S> x({n, cfg.mel_bins, cfg.mel_frames, 1});
      std::copy(mel.v.begin(), mel.v.end(), x.v.begin());
      tr.conv_in.push_back(std::move(x));
      for (size_t bi = 0; bi < cfg.conv_blocks.size(); ++bi) {
        const auto& bcfg = cfg.conv_blocks[bi];
        std::string p = "conv" + std::to_string(bi);
        Tensor<S> conv_out;
        conv2d_forward(tr.conv_in[bi], P.at(p + ".kernel"), P.at(p + ".bias"), conv_out);
        Tensor<S> bn_out;
        BnCache<S> bn_cache;
        batchnorm_forward(conv_out, bcfg.filters, P.at(p + ".bn.gamma"), P.at(p + ".bn.beta"),
                          P.at(p + ".bn.run_mean"), P.at(p + ".bn.run_var"), train, bn_out,
                          &bn_cache);
        relu_forward(bn_out);
        tr.conv_bn.push_back(std::move(bn_cache));
        Tensor<S> pooled;
        std::vector<int32_t> argmax;
        maxpool2_forward(bn_out, pooled, argmax);
        tr.conv_relu.push_back(std::move(bn_out));
        tr.conv_pool_arg.push_back(std::move(argmax));
        Tensor<S> mask;
        if (train) {
          dropout_forward(pooled, cfg.conv_dropout, dropout_rng, mask);
        }
        tr.conv_drop_mask.push_back(std::move(mask));
        tr.conv_in.push_back(std::move(pooled));
      }
    }

    // --- temporal aggregation ---
    if (cfg.has_conv()) {
      const Tensor<S>& A = tr.conv_feature();
      const int mh = A.dim(1), tw = A.dim(2), ch = A.dim(3);
      if (cfg.variant == Variant::CnnOnly) {
        // Global average pooling over both spatial axes.
        tr.context = Tensor<S>({n, ch});
        const S scale = S(1) / static_cast<S>(mh * tw);
        for (int i = 0; i < n; ++i)
          for (int m = 0; m < mh; ++m)
            for (int t = 0; t < tw; ++t) {
              const S* ap = A.data() + (((static_cast<int64_t>(i) * mh + m) * tw) + t) * ch;
              S* cp = tr.context.data() + static_cast<int64_t>(i) * ch;
              for (int c2 = 0; c2 < ch; ++c2) cp[c2] += ap[c2] * scale;
            }
      } else {
        // Flatten (M', C) channels-last per frame -> (N, T', D).
        const int d = mh * ch;
        tr.seq = Tensor<S>({n, tw, d});
        for (int i = 0; i < n; ++i)
          for (int t = 0; t < tw; ++t) {
            S* dst = tr.seq.data() + (static_cast<int64_t>(i) * tw + t) * d;
            for (int m = 0; m < mh; ++m) {
              const S* src = A.data() + (((static_cast<int64_t>(i) * mh + m) * tw) + t) * ch;
              std::copy_n(src, ch, dst + static_cast<int64_t>(m) * ch);
            }
          }

        lstm_forward(tr.seq, P.at("lstm.fw.wx"), P.at("lstm.fw.wh"), P.at("lstm.fw.b"), false,
                     tr.lstm_fw);
        lstm_forward(tr.seq, P.at("lstm.bw.wx"), P.at("lstm.bw.wh"), P.at("lstm.bw.b"), true,
                     tr.lstm_bw);
        const int u = cfg.lstm_units;
        tr.bilstm_out = Tensor<S>({n, tw, 2 * u});
        for (int i = 0; i < n; ++i)
          for (int t = 0; t < tw; ++t) {
            S* dst = tr.bilstm_out.data() + (static_cast<int64_t>(i) * tw + t) * 2 * u;
            std::copy_n(tr.lstm_fw.h.data() + (static_cast<int64_t>(i) * tw + t) * u, u, dst);
            // backward direction stored in traversal order: step s covers time T-1-s
            std::copy_n(tr.lstm_bw.h.data() + (static_cast<int64_t>(i) * tw + (tw - 1 - t)) * u, u,
                        dst + u);
          }
        for (auto v : tr.bilstm_out.v)
          if (!std::isfinite(static_cast<double>(v)))
            throw numeric_error("forward: non-finite BiLSTM activation");

        if (cfg.has_attention()) {
          attention_forward(tr, P, n, tw, 2 * u);
        } else {
          // NoAttention: mean pool over time.
          tr.context = Tensor<S>({n, 2 * u});
          const S scale = S(1) / static_cast<S>(tw);
          for (int i = 0; i < n; ++i)
            for (int t = 0; t < tw; ++t) {
              const S* hp = tr.bilstm_out.data() + (static_cast<int64_t>(i) * tw + t) * 2 * u;
              S* cp = tr.context.data() + static_cast<int64_t>(i) * 2 * u;
              for (int j = 0; j < 2 * u; ++j) cp[j] += hp[j] * scale;
            }
        }
      }
    }

    // --- handcrafted encoder ---
    if (cfg.has_hand()) {
      Tensor<S> h1;
      dense_forward(hand, P.at("hand.fc1.w"), P.at("hand.fc1.b"), h1);
      Tensor<S> b1;
      batchnorm_forward(h1, cfg.hand_hidden[0], P.at("hand.bn1.gamma"), P.at("hand.bn1.beta"),
                        P.at("hand.bn1.run_mean"), P.at("hand.bn1.run_var"), train, b1,
                        &tr.hand_bn1);
      relu_forward(b1);
      tr.hand_relu1 = std::move(b1);

      Tensor<S> h2;
      dense_forward(tr.hand_relu1, P.at("hand.fc2.w"), P.at("hand.fc2.b"), h2);
      Tensor<S> b2;
      batchnorm_forward(h2, cfg.hand_hidden[1], P.at("hand.bn2.gamma"), P.at("hand.bn2.beta"),
                        P.at("hand.bn2.run_mean"), P.at("hand.bn2.run_var"), train, b2,
                        &tr.hand_bn2);
      relu_forward(b2);
      tr.hand_relu2 = b2;
      if (train) dropout_forward(b2, cfg.hand_dropout, dropout_rng, tr.hand_drop_mask);
      tr.hand_out = std::move(b2);
    }

    // --- fusion + classifier ---
    const int deep_dim = cfg.deep_embed_dim();
    const int hand_dim = cfg.hand_embed_dim();
    tr.fused = Tensor<S>({n, deep_dim + hand_dim});
    for (int i = 0; i < n; ++i) {
      S* dst = tr.fused.data() + static_cast<int64_t>(i) * (deep_dim + hand_dim);
      if (deep_dim > 0)
        std::copy_n(tr.context.data() + static_cast<int64_t>(i) * deep_dim, deep_dim, dst);
      if (hand_dim > 0)
        std::copy_n(tr.hand_out.data() + static_cast<int64_t>(i) * hand_dim, hand_dim,
                    dst + deep_dim);
    }

    Tensor<S> f;
    dense_forward(tr.fused, P.at("fusion.w"), P.at("fusion.b"), f);
    relu_forward(f);
    tr.fusion_relu = f;
    if (train) dropout_forward(f, cfg.fusion_dropout, dropout_rng, tr.fusion_mask);
    tr.fusion_out = std::move(f);

    dense_forward(tr.fusion_out, P.at("head.w"), P.at("head.b"), tr.logits);
    for (auto v : tr.logits.v)
      if (!std::isfinite(static_cast<double>(v))) throw numeric_error("forward: non-finite logits");
    softmax_rows(tr.logits, tr.probs);
    return tr;
  }

  static void attention_forward(Trace<S>& tr, ParamSet<S>& P, int n, int t, int h_dim) {
    const Tensor<S>& w = P.at("attn.w");
    const Tensor<S>& b = P.at("attn.b");
    const Tensor<S>& v = P.at("attn.v");
    const int da = w.dim(1);

    // u = tanh(H W + b) over rows (n*t, h_dim)
    tr.attn_u = Tensor<S>({n * t, da});
    gemm(tr.bilstm_out.data(), w.data(), tr.attn_u.data(), static_cast<int64_t>(n) * t, da, h_dim);
    for (int64_t r = 0; r < static_cast<int64_t>(n) * t; ++r)
      for (int j = 0; j < da; ++j) {
        S& x = tr.attn_u.v[static_cast<size_t>(r * da + j)];
        x = std::tanh(x + b.v[static_cast<size_t>(j)]);
      }

    // scores e = u . v, softmax over time
    Tensor<S> e({n, t});
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < t; ++s) {
        const S* up = tr.attn_u.data() + (static_cast<int64_t>(i) * t + s) * da;
        S acc = S(0);
        for (int j = 0; j < da; ++j) acc += up[j] * v.v[static_cast<size_t>(j)];
        e.v[static_cast<size_t>(i) * t + static_cast<size_t>(s)] = acc;
      }
    softmax_rows(e, tr.attn_alpha);

    tr.context = Tensor<S>({n, h_dim});
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < t; ++s) {
        S a = tr.attn_alpha.v[static_cast<size_t>(i) * t + static_cast<size_t>(s)];
        const S* hp = tr.bilstm_out.data() + (static_cast<int64_t>(i) * t + s) * h_dim;
        S* cp = tr.context.data() + static_cast<int64_t>(i) * h_dim;
        for (int j = 0; j < h_dim; ++j) cp[j] += a * hp[j];
      }
  }

  void backward_hand(const Trace<S>& tr, Tensor<S>& d_hand_out, Gradients<S>& g) const {
    const ModelConfig& cfg = config_;
    Tensor<S> d = std::move(d_hand_out);
    if (tr.mode == Mode::train && tr.hand_drop_mask.numel() > 0)
      dropout_backward(tr.hand_drop_mask, d);
    relu_backward(tr.hand_relu2, d);
    Tensor<S> dx, dgamma, dbeta;
    if (tr.mode == Mode::train)
      batchnorm_backward(tr.hand_bn2, cfg.hand_hidden[1], params_.at("hand.bn2.gamma"), d, dx,
                         dgamma, dbeta);
    else
      batchnorm_backward_eval(cfg.hand_hidden[1], params_.at("hand.bn2.gamma"),
                              params_.at("hand.bn2.run_var"), tr.hand_bn2, d, dx, dgamma, dbeta);
    g.at("hand.bn2.gamma") = std::move(dgamma);
    g.at("hand.bn2.beta") = std::move(dbeta);
    Tensor<S> dw, db, d1;
    dense_backward(tr.hand_relu1, params_.at("hand.fc2.w"), dx, d1, dw, db);
    g.at("hand.fc2.w") = std::move(dw);
    g.at("hand.fc2.b") = std::move(db);

    relu_backward(tr.hand_relu1, d1);
    if (tr.mode == Mode::train)
      batchnorm_backward(tr.hand_bn1, cfg.hand_hidden[0], params_.at("hand.bn1.gamma"), d1, dx,
                         dgamma, dbeta);
    else
      batchnorm_backward_eval(cfg.hand_hidden[0], params_.at("hand.bn1.gamma"),
                              params_.at("hand.bn1.run_var"), tr.hand_bn1, d1, dx, dgamma, dbeta);
    g.at("hand.bn1.gamma") = std::move(dgamma);
    g.at("hand.bn1.beta") = std::move(dbeta);
    Tensor<S> d_hand_in;
    dense_backward(tr.hand, params_.at("hand.fc1.w"), dx, d_hand_in, dw, db);
    g.at("hand.fc1.w") = std::move(dw);
    g.at("hand.fc1.b") = std::move(db);
    g.d_hand = std::move(d_hand_in);
  }

  void backward_deep(const Trace<S>& tr, Tensor<S>& d_context, Gradients<S>& g) const {
    const ModelConfig& cfg = config_;
    const Tensor<S>& A = tr.conv_feature();
    const int n = tr.batch, mh = A.dim(1), tw = A.dim(2), ch = A.dim(3);

    Tensor<S> dA({n, mh, tw, ch});
    if (cfg.variant == Variant::CnnOnly) {
      const S scale = S(1) / static_cast<S>(mh * tw);
      for (int i = 0; i < n; ++i)
        for (int m = 0; m < mh; ++m)
          for (int t = 0; t < tw; ++t) {
            S* ap = dA.data() + (((static_cast<int64_t>(i) * mh + m) * tw) + t) * ch;
            const S* cp = d_context.data() + static_cast<int64_t>(i) * ch;
            for (int c2 = 0; c2 < ch; ++c2) ap[c2] = cp[c2] * scale;
          }
    } else {
      const int u = cfg.lstm_units;
      Tensor<S> dH({n, tw, 2 * u});
      if (cfg.has_attention()) {
        attention_backward(tr, d_context, dH, g);
      } else {
        const S scale = S(1) / static_cast<S>(tw);
        for (int i = 0; i < n; ++i)
          for (int t = 0; t < tw; ++t) {
            S* hp = dH.data() + (static_cast<int64_t>(i) * tw + t) * 2 * u;
            const S* cp = d_context.data() + static_cast<int64_t>(i) * 2 * u;
            for (int j = 0; j < 2 * u; ++j) hp[j] = cp[j] * scale;
          }
      }

      // split into per-direction gradients (traversal order)
      Tensor<S> dh_fw({n, tw, u}), dh_bw({n, tw, u});
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < tw; ++t) {
          const S* src = dH.data() + (static_cast<int64_t>(i) * tw + t) * 2 * u;
          std::copy_n(src, u, dh_fw.data() + (static_cast<int64_t>(i) * tw + t) * u);
          std::copy_n(src + u, u,
                      dh_bw.data() + (static_cast<int64_t>(i) * tw + (tw - 1 - t)) * u);
        }

      Tensor<S> dseq({n, tw, cfg.lstm_input_dim()});
      Tensor<S> dwx, dwh, db;
      lstm_backward(tr.seq, params_.at("lstm.fw.wx"), params_.at("lstm.fw.wh"), tr.lstm_fw, dh_fw,
                    false, dseq, dwx, dwh, db);
      g.at("lstm.fw.wx") = std::move(dwx);
      g.at("lstm.fw.wh") = std::move(dwh);
      g.at("lstm.fw.b") = std::move(db);
      Tensor<S> dwx2, dwh2, db2;
      lstm_backward(tr.seq, params_.at("lstm.bw.wx"), params_.at("lstm.bw.wh"), tr.lstm_bw, dh_bw,
                    true, dseq, dwx2, dwh2, db2);
      g.at("lstm.bw.wx") = std::move(dwx2);
      g.at("lstm.bw.wh") = std::move(dwh2);
      g.at("lstm.bw.b") = std::move(db2);

      // scatter dseq back onto the conv feature layout
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < tw; ++t) {
          const S* src = dseq.data() + (static_cast<int64_t>(i) * tw + t) * cfg.lstm_input_dim();
          for (int m = 0; m < mh; ++m) {
            S* dst = dA.data() + (((static_cast<int64_t>(i) * mh + m) * tw) + t) * ch;
            std::copy_n(src + static_cast<int64_t>(m) * ch, ch, dst);
          }
        }
    }
    g.d_conv_feature = dA;

    // conv blocks in reverse
    Tensor<S> d = std::move(dA);
    for (int bi = static_cast<int>(cfg.conv_blocks.size()) - 1; bi >= 0; --bi) {
      std::string p = "conv" + std::to_string(bi);
      if (tr.mode == Mode::train && tr.conv_drop_mask[static_cast<size_t>(bi)].numel() > 0)
        dropout_backward(tr.conv_drop_mask[static_cast<size_t>(bi)], d);
      Tensor<S> d_relu;
      maxpool2_backward(tr.conv_pool_arg[static_cast<size_t>(bi)], d,
                        tr.conv_relu[static_cast<size_t>(bi)].shape, d_relu);
      relu_backward(tr.conv_relu[static_cast<size_t>(bi)], d_relu);
      Tensor<S> d_conv, dgamma, dbeta;
      if (tr.mode == Mode::train)
        batchnorm_backward(tr.conv_bn[static_cast<size_t>(bi)], cfg.conv_blocks[static_cast<size_t>(bi)].filters,
                           params_.at(p + ".bn.gamma"), d_relu, d_conv, dgamma, dbeta);
      else
        batchnorm_backward_eval(cfg.conv_blocks[static_cast<size_t>(bi)].filters,
                                params_.at(p + ".bn.gamma"), params_.at(p + ".bn.run_var"),
                                tr.conv_bn[static_cast<size_t>(bi)], d_relu, d_conv, dgamma, dbeta);
      g.at(p + ".bn.gamma") = std::move(dgamma);
      g.at(p + ".bn.beta") = std::move(dbeta);
      Tensor<S> dx, dk, dbias;
      conv2d_backward(tr.conv_in[static_cast<size_t>(bi)], params_.at(p + ".kernel"), d_conv, dx,
                      dk, dbias);
      g.at(p + ".kernel") = std::move(dk);
      g.at(p + ".bias") = std::move(dbias);
      d = std::move(dx);
    }

    // d now sits at the (N, bins, frames, 1) input
    g.d_mel = Tensor<S>({n, cfg.mel_bins, cfg.mel_frames});
    std::copy(d.v.begin(), d.v.end(), g.d_mel.v.begin());
  }

  void attention_backward(const Trace<S>& tr, const Tensor<S>& d_context, Tensor<S>& dH,
                          Gradients<S>& g) const {
    const ModelConfig& cfg = config_;
    const int n = tr.batch;
    const int t = tr.bilstm_out.dim(1);
    const int h_dim = 2 * cfg.lstm_units;
    const int da = cfg.attention_dim;
    const Tensor<S>& v = params_.at("attn.v");
    const Tensor<S>& w = params_.at("attn.w");

    // dalpha and dH from the weighted sum
    Tensor<S> dalpha({n, t});
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < t; ++s) {
        const S* hp = tr.bilstm_out.data() + (static_cast<int64_t>(i) * t + s) * h_dim;
        const S* cp = d_context.data() + static_cast<int64_t>(i) * h_dim;
        S acc = S(0);
        S a = tr.attn_alpha.v[static_cast<size_t>(i) * t + static_cast<size_t>(s)];
        S* dhp = dH.data() + (static_cast<int64_t>(i) * t + s) * h_dim;
        for (int j = 0; j < h_dim; ++j) {
          acc += cp[j] * hp[j];
          dhp[j] = a * cp[j];
        }
        dalpha.v[static_cast<size_t>(i) * t + static_cast<size_t>(s)] = acc;
      }

    // softmax backward: de = alpha * (dalpha - sum(alpha*dalpha))
    Tensor<S> de({n, t});
    for (int i = 0; i < n; ++i) {
      S dot = S(0);
      for (int s = 0; s < t; ++s)
        dot += tr.attn_alpha.v[static_cast<size_t>(i) * t + static_cast<size_t>(s)] *
               dalpha.v[static_cast<size_t>(i) * t + static_cast<size_t>(s)];
      for (int s = 0; s < t; ++s) {
        size_t idx = static_cast<size_t>(i) * t + static_cast<size_t>(s);
        de.v[idx] = tr.attn_alpha.v[idx] * (dalpha.v[idx] - dot);
      }
    }

    // de -> du (outer with v), dv, then through tanh to dW, db, dH
    Tensor<S> dpre({n * t, da});
    Tensor<S> dv({da});
    for (int64_t r = 0; r < static_cast<int64_t>(n) * t; ++r) {
      S dev = de.v[static_cast<size_t>(r)];
      const S* up = tr.attn_u.data() + r * da;
      S* dp = dpre.data() + r * da;
      for (int j = 0; j < da; ++j) {
        dv.v[static_cast<size_t>(j)] += dev * up[j];
        S du = dev * v.v[static_cast<size_t>(j)];
        dp[j] = du * (S(1) - up[j] * up[j]);
      }
    }
    g.at("attn.v") = std::move(dv);

    Tensor<S> dw({h_dim, da});
    gemm_at_b(tr.bilstm_out.data(), dpre.data(), dw.data(), h_dim, da, static_cast<int64_t>(n) * t);
    g.at("attn.w") = std::move(dw);
    Tensor<S> db({da});
    for (int64_t r = 0; r < static_cast<int64_t>(n) * t; ++r)
      for (int j = 0; j < da; ++j) db.v[static_cast<size_t>(j)] += dpre.v[static_cast<size_t>(r * da + j)];
    g.at("attn.b") = std::move(db);

    // dH += dpre . W^T
    Tensor<S> dh2({n * t, h_dim});
    gemm_a_bt(dpre.data(), w.data(), dh2.data(), static_cast<int64_t>(n) * t, h_dim, da);
    for (size_t i = 0; i < dH.v.size(); ++i) dH.v[i] += dh2.v[i];
  }

  ModelConfig config_;
  ParamSet<S> params_;
};

}  // namespace respira::nn
