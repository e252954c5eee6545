// Copyright 2026 The fragmix authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fragmix/ops.hpp"
#include "fragmix/rng.hpp"
#include "fragmix/tensor.hpp"

namespace fragmix {

enum class Aggregation { projection, avgpool };

inline std::string aggregation_name(Aggregation a) {
  return a == Aggregation::projection ? "projection" : "avgpool";
}

inline Aggregation aggregation_from(const std::string& s) {
  if (s == "projection") return Aggregation::projection;
  if (s == "avgpool") return Aggregation::avgpool;
  throw ConfigError("unknown aggregation '" + s + "' (projection|avgpool)");
}

/// Architecture hyperparameters. The descriptor network is
/// backbone -> feature mixer (L blocks) -> aggregation -> l2 norm,
/// with an optional dropout+linear classification head.
struct ModelConfig {
  std::size_t input_height = 512;
  std::size_t input_width = 128;
  std::size_t input_channels = 3;
  std::vector<std::size_t> backbone_stage_channels{16, 32, 64, 512};
  std::vector<std::size_t> backbone_blocks_per_stage{2, 2, 2, 2};
  std::size_t mixer_depth = 4;            // L; 0 disables the mixer
  std::size_t mixer_kernel_size = 3;      // depthwise kernel, odd
  std::size_t mixer_expansion_ratio = 2;  // r
  bool mixer_mlp = true;                  // second residual sub-block
  std::size_t projection_channels = 512;  // k
  std::size_t projection_map_dim = 4;     // n
  Aggregation aggregation = Aggregation::projection;
  std::optional<std::size_t> num_classes;
  double dropout_p = 0.5;

  /// Stem halves the resolution once, each stage halves it again.
  std::size_t downsample_factor() const {
    return std::size_t(1) << (1 + backbone_stage_channels.size());
  }

  std::size_t backbone_channels() const {
    return backbone_stage_channels.back();
  }

  std::size_t descriptor_dim() const {
    return aggregation == Aggregation::projection
               ? projection_channels * projection_map_dim
               : backbone_channels();
  }

  void validate() const {
    if (backbone_stage_channels.empty())
      throw ConfigError("model: backbone needs at least one stage");
    if (backbone_blocks_per_stage.size() != backbone_stage_channels.size())
      throw ConfigError("model: blocks_per_stage has " +
                        std::to_string(backbone_blocks_per_stage.size()) +
                        " entries for " +
                        std::to_string(backbone_stage_channels.size()) +
                        " stages");
    for (std::size_t b : backbone_blocks_per_stage)
      if (b == 0) throw ConfigError("model: stage with zero blocks");
    const std::size_t f = downsample_factor();
    if (input_height % f != 0 || input_width % f != 0)
      throw ConfigError("model: input " + std::to_string(input_height) + "x" +
                        std::to_string(input_width) +
                        " not divisible by downsample factor " +
                        std::to_string(f));
    if (mixer_kernel_size % 2 == 0 || mixer_kernel_size < 1)
      throw ConfigError("model: mixer kernel size must be odd");
    if (mixer_expansion_ratio < 1)
      throw ConfigError("model: mixer expansion ratio must be >= 1");
    if (aggregation == Aggregation::projection &&
        (projection_channels == 0 || projection_map_dim == 0))
      throw ConfigError("model: projection dims must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw ConfigError("model: dropout_p must be in [0, 1)");
    if (input_channels == 0) throw ConfigError("model: zero input channels");
  }
};

/// Predicted (C, H, W) after the stem and after each backbone stage, plus
/// the final feature map and descriptor width. Pure function of the config;
/// tests hold the network to it.
struct ShapeReport {
  std::vector<std::array<std::size_t, 3>> stages;  // stem first
  std::size_t feature_c = 0, feature_h = 0, feature_w = 0;
  std::size_t descriptor_dim = 0;
};

inline ShapeReport infer_shapes(const ModelConfig& cfg) {
  cfg.validate();
  ShapeReport r;
  std::size_t h = cfg.input_height / 2, w = cfg.input_width / 2;
  std::size_t c = cfg.backbone_stage_channels.front();
  r.stages.push_back({c, h, w});  // stem keeps first-stage width
  for (std::size_t s = 0; s < cfg.backbone_stage_channels.size(); ++s) {
    h /= 2;
    w /= 2;
    c = cfg.backbone_stage_channels[s];
    r.stages.push_back({c, h, w});
  }
  r.feature_c = c;
  r.feature_h = h;
  r.feature_w = w;
  r.descriptor_dim = cfg.descriptor_dim();
  return r;
}

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

template <typename T>
struct NormParams {
  Tensor<T> gamma, beta;
};

template <typename T>
struct StarReluParams {
  Tensor<T> a, b;
};

/// Channel-wise fully-connected layer, applied as a 1x1 convolution.
template <typename T>
struct FcLayer {
  Tensor<T> w;  // [out, in]
  Tensor<T> b;  // [out]
};

template <typename T>
struct ResidualBlock {
  Tensor<T> conv1_w, conv2_w;  // 3x3
  NormParams<T> norm1, norm2;
  bool has_shortcut = false;
  Tensor<T> shortcut_w;  // 1x1, when shape changes
  NormParams<T> shortcut_norm;
  std::size_t stride = 1;
};

template <typename T>
struct FeatureMixerBlock {
  NormParams<T> norm1, norm2;
  FcLayer<T> expand, reduce;   // C -> rC -> C
  StarReluParams<T> act1;
  Tensor<T> dw_w;              // [rC, 1, k, k]
  Tensor<T> scale1;            // [C]
  FcLayer<T> mlp1, mlp2;       // C -> rC -> C
  StarReluParams<T> act2;
  Tensor<T> scale2;            // [C]
};

template <typename T>
struct ProjectionLayer {
  Tensor<T> wc;  // [k, C]
  Tensor<T> bc;  // [k]
  Tensor<T> wr;  // [n, HW]
  Tensor<T> br;  // [n]
};

template <typename T>
struct ClassifierHead {
  Tensor<T> w;  // [K, D]
  Tensor<T> b;  // [K]
};

// ---------------------------------------------------------------------------
// Functional pieces
// ---------------------------------------------------------------------------

/// a * ReLU(x)^2 + b with learnable scalars.
template <typename T>
Tensor<T> star_relu(Tape<T>& tape, const Tensor<T>& x,
                    const StarReluParams<T>& p) {
  return add(tape, mul(tape, square(tape, relu(tape, x)), p.a), p.b);
}

/// Layer norm over the channel axis of an NCHW map (per spatial position).
template <typename T>
Tensor<T> norm_channels(Tape<T>& tape, const Tensor<T>& x,
                        const NormParams<T>& n) {
  return layer_norm(tape, x, 1, n.gamma, n.beta, T(1e-5));
}

/// 1x1 convolution + bias realizing a channel-wise fully-connected layer.
template <typename T>
Tensor<T> fc_over_channels(Tape<T>& tape, const Tensor<T>& x,
                           const FcLayer<T>& fc) {
  const std::size_t out = fc.w.dim(0), in = fc.w.dim(1);
  auto w4 = reshape(tape, fc.w, {out, in, 1, 1});
  return channel_bias(tape, conv2d(tape, x, w4, 1, 0, 1), fc.b);
}

template <typename T>
Tensor<T> residual_block_forward(Tape<T>& tape, const Tensor<T>& x,
                                 const ResidualBlock<T>& blk) {
  auto m = conv2d(tape, x, blk.conv1_w, blk.stride, 1, 1);
  m = relu(tape, norm_channels(tape, m, blk.norm1));
  m = conv2d(tape, m, blk.conv2_w, 1, 1, 1);
  m = norm_channels(tape, m, blk.norm2);
  Tensor<T> s = x;
  if (blk.has_shortcut) {
    s = conv2d(tape, x, blk.shortcut_w, blk.stride, 0, 1);
    s = norm_channels(tape, s, blk.shortcut_norm);
  }
  return relu(tape, add(tape, m, s));
}

/// y = x + scale1 . SepConv(norm1(x));  out = y + scale2 . MLP(norm2(y)).
/// SepConv = reduce_fc(depthwise(star_relu(expand_fc(.)))); the MLP branch
/// is optional (mixer_mlp switch).
template <typename T>
Tensor<T> mixer_block_forward(Tape<T>& tape, const Tensor<T>& x,
                              const FeatureMixerBlock<T>& blk, bool with_mlp) {
  const std::size_t k = blk.dw_w.dim(2);
  auto t = norm_channels(tape, x, blk.norm1);
  t = fc_over_channels(tape, t, blk.expand);
  t = star_relu(tape, t, blk.act1);
  t = conv2d(tape, t, blk.dw_w, 1, (k - 1) / 2, blk.dw_w.dim(0));
  t = fc_over_channels(tape, t, blk.reduce);
  auto y = add(tape, x, channel_scale(tape, t, blk.scale1));
  if (!with_mlp) return y;
  auto u = norm_channels(tape, y, blk.norm2);
  u = fc_over_channels(tape, u, blk.mlp1);
  u = star_relu(tape, u, blk.act2);
  u = fc_over_channels(tape, u, blk.mlp2);
  return add(tape, y, channel_scale(tape, u, blk.scale2));
}

/// Two-stage affine aggregation: channel reduction C -> k followed by a
/// spatial-map reduction HW -> n, flattened per sample to k*n.
/// The spatial weight ties the layer to one input resolution.
template <typename T>
Tensor<T> projection_forward(Tape<T>& tape, const Tensor<T>& x,
                             const ProjectionLayer<T>& p) {
  const std::size_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const std::size_t hw = p.wr.dim(1);
  if (H * W != hw)
    throw DimensionError(
        "projection: built for feature maps with HW=" + std::to_string(hw) +
        ", got " + std::to_string(H) + "x" + std::to_string(W) +
        " (resolution mismatch)");
  const std::size_t k = p.wc.dim(0), n = p.wr.dim(0);
  FcLayer<T> fc{p.wc, p.bc};
  auto xc = fc_over_channels(tape, x, fc);          // N x k x H x W
  auto flat = reshape(tape, xc, {N * k, hw});       // rows are per-sample maps
  auto red = matmul(tape, flat, transpose(tape, p.wr));  // N*k x n
  red = add(tape, red, p.br);
  return reshape(tape, red, {N, k * n});
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct ModelOutput {
  Tensor<T> descriptor;          // N x D, l2-normalized rows
  Tensor<T> logits;              // N x K, only when requested
  bool has_logits = false;
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(mix_seed({seed, 0x6d6f64656cULL}));
    build(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<NamedParam<T>>& named_parameters() { return params_; }

  std::vector<Tensor<T>> parameters() {
    std::vector<Tensor<T>> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.tensor);
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  /// Full forward pass. The descriptor is always produced; logits only when
  /// requested (requires num_classes). Dropout runs only when training.
  ModelOutput<T> forward(Tape<T>& tape, const Tensor<T>& batch, bool training,
                         bool want_logits, Rng* dropout_rng = nullptr) {
    check_input(batch);
    auto f = backbone_forward(tape, batch);
    f = mixer_forward(tape, f);
    Tensor<T> raw;
    if (cfg_.aggregation == Aggregation::projection)
      raw = projection_forward(tape, f, proj_);
    else
      raw = global_avg_pool(tape, f);
    ModelOutput<T> out;
    out.descriptor = l2_normalize(tape, raw, 1, T(1e-12));
    if (want_logits) {
      if (!cfg_.num_classes)
        throw ConfigError("model: classifier requested but num_classes unset");
      auto d = out.descriptor;
      if (training && cfg_.dropout_p > 0.0) {
        if (!dropout_rng)
          throw ConfigError("model: training forward needs a dropout rng");
        d = dropout(tape, d, static_cast<T>(cfg_.dropout_p), *dropout_rng);
      }
      out.logits = add(tape, matmul(tape, d, transpose(tape, head_.w)), head_.b);
      out.has_logits = true;
    }
    return out;
  }

  /// Inference-only descriptor pass (no recording, no dropout).
  Tensor<T> descriptors(const Tensor<T>& batch) {
    Tape<T> tape;
    tape.set_recording(false);
    return forward(tape, batch, false, false).descriptor;
  }

  Tensor<T> backbone_forward(Tape<T>& tape, const Tensor<T>& x) {
    auto h = conv2d(tape, x, stem_w_, 2, 1, 1);
    h = relu(tape, norm_channels(tape, h, stem_norm_));
    for (const auto& blk : blocks_) h = residual_block_forward(tape, h, blk);
    return h;
  }

  Tensor<T> mixer_forward(Tape<T>& tape, const Tensor<T>& x) {
    auto h = x;
    for (const auto& blk : mixer_)
      h = mixer_block_forward(tape, h, blk, cfg_.mixer_mlp);
    return h;
  }

  std::vector<FeatureMixerBlock<T>>& mixer_blocks() { return mixer_; }
  ProjectionLayer<T>& projection() { return proj_; }
  ClassifierHead<T>& head() { return head_; }

 private:
  void check_input(const Tensor<T>& batch) const {
    if (batch.rank() != 4)
      throw DimensionError("model: want NCHW batch, got " +
                           shape_str(batch.shape()));
    if (batch.dim(1) != cfg_.input_channels || batch.dim(2) != cfg_.input_height ||
        batch.dim(3) != cfg_.input_width)
      throw DimensionError(
          "model: batch " + shape_str(batch.shape()) + " does not match the " +
          std::to_string(cfg_.input_channels) + "x" +
          std::to_string(cfg_.input_height) + "x" +
          std::to_string(cfg_.input_width) + " input this model was built for");
  }

  Tensor<T> make_conv(Rng& rng, const std::string& name, std::size_t o,
                      std::size_t i, std::size_t kh, std::size_t kw) {
    const double std = std::sqrt(2.0 / static_cast<double>(i * kh * kw));
    auto t = Tensor<T>::zeros({o, i, kh, kw});
    for (auto& v : t.data()) v = static_cast<T>(rng.normal(0.0, std));
    reg(name, t);
    return t;
  }

  FcLayer<T> make_fc(Rng& rng, const std::string& name, std::size_t out,
                     std::size_t in) {
    const double std = std::sqrt(2.0 / static_cast<double>(in));
    auto w = Tensor<T>::zeros({out, in});
    for (auto& v : w.data()) v = static_cast<T>(rng.normal(0.0, std));
    auto b = Tensor<T>::zeros({out});
    reg(name + ".w", w);
    reg(name + ".b", b);
    return {w, b};
  }

  NormParams<T> make_norm(const std::string& name, std::size_t c) {
    NormParams<T> n{Tensor<T>::ones({c}), Tensor<T>::zeros({c})};
    reg(name + ".gamma", n.gamma);
    reg(name + ".beta", n.beta);
    return n;
  }

  StarReluParams<T> make_star(const std::string& name) {
    StarReluParams<T> s{Tensor<T>::scalar(T(0.8944)),
                        Tensor<T>::scalar(T(-0.4472))};
    reg(name + ".a", s.a);
    reg(name + ".b", s.b);
    return s;
  }

  void reg(const std::string& name, Tensor<T> t) {
    t.set_requires_grad(true);
    params_.push_back({name, t});
  }

  void build(Rng& rng) {
    const auto shapes = infer_shapes(cfg_);
    const std::size_t stem_c = cfg_.backbone_stage_channels.front();
    stem_w_ = make_conv(rng, "stem.conv.w", stem_c, cfg_.input_channels, 3, 3);
    stem_norm_ = make_norm("stem.norm", stem_c);
    std::size_t in_c = stem_c;
    for (std::size_t s = 0; s < cfg_.backbone_stage_channels.size(); ++s) {
      const std::size_t out_c = cfg_.backbone_stage_channels[s];
      for (std::size_t b = 0; b < cfg_.backbone_blocks_per_stage[s]; ++b) {
        const std::string pre =
            "backbone.s" + std::to_string(s) + ".b" + std::to_string(b);
        ResidualBlock<T> blk;
        blk.stride = (b == 0) ? 2 : 1;
        const std::size_t bin = (b == 0) ? in_c : out_c;
        blk.conv1_w = make_conv(rng, pre + ".conv1.w", out_c, bin, 3, 3);
        blk.norm1 = make_norm(pre + ".norm1", out_c);
        blk.conv2_w = make_conv(rng, pre + ".conv2.w", out_c, out_c, 3, 3);
        blk.norm2 = make_norm(pre + ".norm2", out_c);
        blk.has_shortcut = (blk.stride != 1 || bin != out_c);
        if (blk.has_shortcut) {
          blk.shortcut_w = make_conv(rng, pre + ".short.w", out_c, bin, 1, 1);
          blk.shortcut_norm = make_norm(pre + ".short.norm", out_c);
        }
        blocks_.push_back(std::move(blk));
      }
      in_c = out_c;
    }
    const std::size_t C = cfg_.backbone_channels();
    const std::size_t rC = C * cfg_.mixer_expansion_ratio;
    for (std::size_t l = 0; l < cfg_.mixer_depth; ++l) {
      const std::string pre = "mixer." + std::to_string(l);
      FeatureMixerBlock<T> blk;
      blk.norm1 = make_norm(pre + ".norm1", C);
      blk.expand = make_fc(rng, pre + ".expand", rC, C);
      blk.act1 = make_star(pre + ".act1");
      blk.dw_w = make_conv(rng, pre + ".dw.w", rC, 1, cfg_.mixer_kernel_size,
                           cfg_.mixer_kernel_size);
      blk.reduce = make_fc(rng, pre + ".reduce", C, rC);
      blk.scale1 = Tensor<T>::ones({C});
      reg(pre + ".scale1", blk.scale1);
      blk.norm2 = make_norm(pre + ".norm2", C);
      blk.mlp1 = make_fc(rng, pre + ".mlp1", rC, C);
      blk.act2 = make_star(pre + ".act2");
      blk.mlp2 = make_fc(rng, pre + ".mlp2", C, rC);
      blk.scale2 = Tensor<T>::ones({C});
      reg(pre + ".scale2", blk.scale2);
      mixer_.push_back(std::move(blk));
    }
    if (cfg_.aggregation == Aggregation::projection) {
      const std::size_t hw = shapes.feature_h * shapes.feature_w;
      const std::size_t k = cfg_.projection_channels;
      const std::size_t n = cfg_.projection_map_dim;
      auto wc = Tensor<T>::zeros({k, C});
      const double cstd = std::sqrt(2.0 / static_cast<double>(C));
      for (auto& v : wc.data()) v = static_cast<T>(rng.normal(0.0, cstd));
      auto wr = Tensor<T>::zeros({n, hw});
      const double rstd = std::sqrt(1.0 / static_cast<double>(hw));
      for (auto& v : wr.data()) v = static_cast<T>(rng.normal(0.0, rstd));
      proj_ = {wc, Tensor<T>::zeros({k}), wr, Tensor<T>::zeros({n})};
      reg("proj.wc", proj_.wc);
      reg("proj.bc", proj_.bc);
      reg("proj.wr", proj_.wr);
      reg("proj.br", proj_.br);
    }
    if (cfg_.num_classes) {
      const std::size_t K = *cfg_.num_classes;
      const std::size_t D = cfg_.descriptor_dim();
      auto w = Tensor<T>::zeros({K, D});
      const double hstd = std::sqrt(1.0 / static_cast<double>(D));
      for (auto& v : w.data()) v = static_cast<T>(rng.normal(0.0, hstd));
      head_ = {w, Tensor<T>::zeros({K})};
      reg("head.w", head_.w);
      reg("head.b", head_.b);
    }
  }

  ModelConfig cfg_;
  std::vector<NamedParam<T>> params_;
  Tensor<T> stem_w_;
  NormParams<T> stem_norm_;
  std::vector<ResidualBlock<T>> blocks_;
  std::vector<FeatureMixerBlock<T>> mixer_;
  ProjectionLayer<T> proj_;
  ClassifierHead<T> head_;
};

}  // namespace fragmix
