#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "racer/nn/tape.hpp"
#include "racer/rng.hpp"

namespace racer::nn {

/// Named trainable tensor with persistent gradient and Adam state.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;   // accumulated across backward passes until zeroed
  Tensor<T> m, v;   // Adam moments
};

/// Binding of a parameter to its tape node for the current forward pass.
template <typename T>
using Binds = std::vector<std::pair<Param<T>*, int>>;

template <typename T>
void he_init(Tensor<T>& t, int fan_in, Rng& rng) {
  T s = std::sqrt(T(2) / static_cast<T>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.gaussian()) * s;
}

template <typename T>
struct Dense {
  Param<T> w, b;

  void init(const std::string& name, int in, int out, Rng& rng) {
    w.name = name + ".w";
    b.name = name + ".b";
    w.value = Tensor<T>({in, out});
    b.value = Tensor<T>({out});
    he_init(w.value, in, rng);
    w.grad = Tensor<T>(w.value.shape);
    b.grad = Tensor<T>(b.value.shape);
  }

  int forward(Tape<T>& tape, int x, Binds<T>* binds) {
    int wi = tape.input(w.value, binds != nullptr);
    int bi = tape.input(b.value, binds != nullptr);
    if (binds) {
      binds->push_back({&w, wi});
      binds->push_back({&b, bi});
    }
    return tape.dense(x, wi, bi);
  }

  size_t count() const { return w.value.numel() + b.value.numel(); }
};

template <typename T>
struct Conv {
  Param<T> w, b;
  int stride = 2, pad = 1;

  void init(const std::string& name, int in_c, int out_c, int k, Rng& rng) {
    w.name = name + ".w";
    b.name = name + ".b";
    w.value = Tensor<T>({out_c, in_c, k, k});
    b.value = Tensor<T>({out_c});
    he_init(w.value, in_c * k * k, rng);
    w.grad = Tensor<T>(w.value.shape);
    b.grad = Tensor<T>(b.value.shape);
  }

  int forward(Tape<T>& tape, int x, Binds<T>* binds) {
    int wi = tape.input(w.value, binds != nullptr);
    int bi = tape.input(b.value, binds != nullptr);
    if (binds) {
      binds->push_back({&w, wi});
      binds->push_back({&b, bi});
    }
    return tape.conv2d(x, wi, bi, stride, pad);
  }

  size_t count() const { return w.value.numel() + b.value.numel(); }
};

struct ActorArch {
  int image_hw = 64;
  int image_c = 3;
  std::vector<int> conv_channels = {64, 128, 256, 512};
  int embed = 128;
  int proprio = 17;
  int trunk_width = 2048;
  int trunk_depth = 4;
  int head = 4;  // (mu1, mu2, sigma1~, sigma2~) after tanh
  bool use_image = true;

  int conv_out_hw() const {
    int hw = image_hw;
    for (size_t i = 0; i < conv_channels.size(); ++i) hw /= 2;
    return hw;
  }
  int trunk_input() const {
    return (use_image ? embed : 0) + proprio;
  }
};

/// Image branch (conv stack -> dense embedding) + MLP trunk + tanh head.
template <typename T>
struct ActorNet {
  ActorArch arch;
  std::vector<Conv<T>> convs;
  Dense<T> embed;
  std::vector<Dense<T>> trunk;
  Dense<T> head;

  void init(const ActorArch& a, uint64_t seed) {
    arch = a;
    Rng rng(seed);
    convs.clear();
    trunk.clear();
    if (arch.use_image) {
      int in_c = arch.image_c;
      for (size_t i = 0; i < arch.conv_channels.size(); ++i) {
        Conv<T> c;
        c.init("actor.conv" + std::to_string(i), in_c, arch.conv_channels[i],
               4, rng);
        convs.push_back(std::move(c));
        in_c = arch.conv_channels[i];
      }
      int flat = in_c * arch.conv_out_hw() * arch.conv_out_hw();
      embed.init("actor.embed", flat, arch.embed, rng);
    }
    int in = arch.trunk_input();
    for (int i = 0; i < arch.trunk_depth; ++i) {
      Dense<T> d;
      d.init("actor.trunk" + std::to_string(i), in, arch.trunk_width, rng);
      trunk.push_back(std::move(d));
      in = arch.trunk_width;
    }
    head.init("actor.head", in, arch.head, rng);
  }

  /// image: [N, C, H, W] tape node (or -1 with use_image off),
  /// proprio: [N, P]. Returns the [N, 4] tanh head node. conv_taps, when
  /// given, receives the post-ReLU node of every conv layer (for saliency).
  int forward(Tape<T>& tape, int image, int proprio, Binds<T>* binds,
              std::vector<int>* conv_taps = nullptr) {
    int feat;
    if (arch.use_image) {
      int x = image;
      for (auto& c : convs) {
        x = tape.relu(c.forward(tape, x, binds));
        if (conv_taps) conv_taps->push_back(x);
      }
      x = tape.relu(embed.forward(tape, tape.flatten(x), binds));
      feat = tape.concat(x, proprio);
    } else {
      feat = proprio;
    }
    for (auto& d : trunk) feat = tape.relu(d.forward(tape, feat, binds));
    return tape.tanh_(head.forward(tape, feat, binds));
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& c : convs) {
      out.push_back(&c.w);
      out.push_back(&c.b);
    }
    if (arch.use_image) {
      out.push_back(&embed.w);
      out.push_back(&embed.b);
    }
    for (auto& d : trunk) {
      out.push_back(&d.w);
      out.push_back(&d.b);
    }
    out.push_back(&head.w);
    out.push_back(&head.b);
    return out;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& c : convs) n += c.count();
    if (arch.use_image) n += embed.count();
    for (const auto& d : trunk) n += d.count();
    return n + head.count();
  }
};

struct CriticArch {
  int input_dim = 550;  // global 531 + proprio 17 + action 2
  int width = 2048;
  int depth = 4;
  int quantiles = 32;
  // symmetric-training variant: replace the global features with the critic's
  // own conv embedding of the image
  bool use_image = false;
  int image_hw = 64;
  int image_c = 3;
  std::vector<int> conv_channels = {64, 128, 256, 512};
  int embed = 128;

  int conv_out_hw() const {
    int hw = image_hw;
    for (size_t i = 0; i < conv_channels.size(); ++i) hw /= 2;
    return hw;
  }
};

/// Quantile critic: MLP over (global, proprio, action) in asymmetric mode, or
/// over (conv embedding, proprio, action) in symmetric mode.
template <typename T>
struct CriticNet {
  CriticArch arch;
  std::vector<Conv<T>> convs;
  Dense<T> embed;
  std::vector<Dense<T>> mlp;
  Dense<T> head;

  void init(const CriticArch& a, uint64_t seed) {
    arch = a;
    Rng rng(seed);
    convs.clear();
    mlp.clear();
    if (arch.use_image) {
      int in_c = arch.image_c;
      for (size_t i = 0; i < arch.conv_channels.size(); ++i) {
        Conv<T> c;
        c.init("critic.conv" + std::to_string(i), in_c, arch.conv_channels[i],
               4, rng);
        convs.push_back(std::move(c));
        in_c = arch.conv_channels[i];
      }
      int flat = in_c * arch.conv_out_hw() * arch.conv_out_hw();
      embed.init("critic.embed", flat, arch.embed, rng);
    }
    int in = arch.input_dim;
    for (int i = 0; i < arch.depth; ++i) {
      Dense<T> d;
      d.init("critic.mlp" + std::to_string(i), in, arch.width, rng);
      mlp.push_back(std::move(d));
      in = arch.width;
    }
    head.init("critic.head", in, arch.quantiles, rng);
  }

  /// Asymmetric: state = [N, global + proprio] node, image = -1.
  /// Symmetric: image = [N,C,H,W] node, state = [N, proprio] node.
  /// action: [N, 2]. Returns [N, K] linear quantile node.
  int forward(Tape<T>& tape, int state, int image, int action,
              Binds<T>* binds) {
    int feat;
    if (arch.use_image) {
      int x = image;
      for (auto& c : convs) x = tape.relu(c.forward(tape, x, binds));
      x = tape.relu(embed.forward(tape, tape.flatten(x), binds));
      feat = tape.concat(tape.concat(x, state), action);
    } else {
      feat = tape.concat(state, action);
    }
    for (auto& d : mlp) feat = tape.relu(d.forward(tape, feat, binds));
    return head.forward(tape, feat, binds);
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& c : convs) {
      out.push_back(&c.w);
      out.push_back(&c.b);
    }
    if (arch.use_image) {
      out.push_back(&embed.w);
      out.push_back(&embed.b);
    }
    for (auto& d : mlp) {
      out.push_back(&d.w);
      out.push_back(&d.b);
    }
    out.push_back(&head.w);
    out.push_back(&head.b);
    return out;
  }

  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& c : convs) n += c.count();
    if (arch.use_image) n += embed.count();
    for (const auto& d : mlp) n += d.count();
    return n + head.count();
  }
};

/// Pulls tape gradients back into the bound parameters (accumulating).
template <typename T>
void accumulate_grads(const Tape<T>& tape, const Binds<T>& binds) {
  for (const auto& [param, id] : binds) {
    const Tensor<T>& g = tape.grad(id);
    for (size_t i = 0; i < g.numel(); ++i) param->grad[i] += g[i];
  }
}

}  // namespace racer::nn
