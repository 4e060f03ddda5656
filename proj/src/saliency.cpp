#include "racer/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "racer/nn/tape.hpp"

namespace racer {

namespace {

using nn::Tape;
using nn::Tensor;

/// Bilinear upsample of a single-channel h x w map to H x W.
std::vector<float> upsample_bilinear(const std::vector<float>& src, int h,
                                     int w, int H, int W) {
  std::vector<float> out(static_cast<size_t>(H) * W);
  double sy = static_cast<double>(h) / H, sx = static_cast<double>(w) / W;
  for (int r = 0; r < H; ++r) {
    double fy = (r + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
    for (int c = 0; c < W; ++c) {
      double fx = (c + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
      double v = (1 - wy) * ((1 - wx) * src[y0c * w + x0c] +
                             wx * src[y0c * w + x1c]) +
                 wy * ((1 - wx) * src[y1c * w + x0c] +
                       wx * src[y1c * w + x1c]);
      out[static_cast<size_t>(r) * W + c] = static_cast<float>(v);
    }
  }
  return out;
}

struct ForwardCtx {
  Tape<float> tape;
  int input_id = -1;
  int last_tap = -1;  // post-ReLU activation of the last conv layer
  int target = -1;    // scalar head output for the chosen action dim
};

void forward_actor(nn::ActorNet<float>& actor, const ImageObs& image,
                   const std::vector<float>& proprio, int action_dim,
                   ForwardCtx& ctx) {
  if (!actor.arch.use_image || actor.convs.empty())
    throw std::invalid_argument(
        "saliency undefined: actor has no conv stack (no-image ablation)");
  if (action_dim < 0 || action_dim >= 2)
    throw std::invalid_argument("saliency: action_dim must be 0 or 1");
  int C = actor.arch.image_c, HW = actor.arch.image_hw;
  if (image.channels != C || image.height != HW || image.width != HW)
    throw std::invalid_argument("saliency: image shape mismatch");

  Tensor<float> img({1, C, HW, HW});
  // ImageObs is H x W x C; the network wants C x H x W
  for (int r = 0; r < HW; ++r)
    for (int c = 0; c < HW; ++c)
      for (int ch = 0; ch < C; ++ch)
        img[(static_cast<size_t>(ch) * HW + r) * HW + c] = image.at(r, c, ch);
  Tensor<float> prop({1, static_cast<int>(proprio.size())},
                     std::vector<float>(proprio.begin(), proprio.end()));

  ctx.input_id = ctx.tape.input(std::move(img), true);
  std::vector<int> taps;
  int head = actor.forward(ctx.tape, ctx.input_id,
                           ctx.tape.input(std::move(prop), false), nullptr,
                           &taps);
  ctx.last_tap = taps.back();
  ctx.target = ctx.tape.slice_cols(head, action_dim, action_dim + 1);
}

std::vector<int> top_k_pixels(const std::vector<float>& values, int k) {
  std::vector<int> idx;
  for (size_t i = 0; i < values.size(); ++i)
    if (values[i] > 0.f) idx.push_back(static_cast<int>(i));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;  // ties broken by scan order
  });
  if (static_cast<int>(idx.size()) > k) idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Grad-CAM at the last conv activation; requires backward() already run
/// with vanilla gradients.
std::vector<float> cam_from_ctx(const ForwardCtx& ctx, int* out_h,
                                int* out_w) {
  const Tensor<float>& act = ctx.tape.value(ctx.last_tap);   // [1, F, h, w]
  const Tensor<float>& gact = ctx.tape.grad(ctx.last_tap);
  int F = act.dim(1), h = act.dim(2), w = act.dim(3);
  std::vector<float> cam(static_cast<size_t>(h) * w, 0.f);
  for (int f = 0; f < F; ++f) {
    // neuron importance: gradient averaged over the spatial extent (Z = h*w)
    double wk = 0.0;
    const float* g = &gact.data[static_cast<size_t>(f) * h * w];
    const float* a = &act.data[static_cast<size_t>(f) * h * w];
    for (int i = 0; i < h * w; ++i) wk += g[i];
    wk /= h * w;
    for (int i = 0; i < h * w; ++i) cam[i] += static_cast<float>(wk) * a[i];
  }
  for (auto& v : cam) v = std::max(v, 0.f);
  *out_h = h;
  *out_w = w;
  return cam;
}

}  // namespace

std::vector<int> SaliencyMap::mask_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<int>(i));
  return out;
}

SaliencyMap guided_grad_cam(nn::ActorNet<float>& actor, const ImageObs& image,
                            const std::vector<float>& proprio, int action_dim,
                            double top_q) {
  if (top_q < 0.0 || top_q > 1.0)
    throw std::invalid_argument("saliency: top_q outside [0, 1]");
  ForwardCtx ctx;
  forward_actor(actor, image, proprio, action_dim, ctx);
  int HW = actor.arch.image_hw, C = actor.arch.image_c;

  // Grad-CAM: vanilla gradients at the last conv activation
  ctx.tape.guided_backprop = false;
  ctx.tape.backward(ctx.target);
  int h = 0, w = 0;
  std::vector<float> cam = cam_from_ctx(ctx, &h, &w);
  std::vector<float> cam_up = upsample_bilinear(cam, h, w, HW, HW);

  // guided backprop: rerun the same tape with negative-gradient filtering
  ctx.tape.guided_backprop = true;
  ctx.tape.backward(ctx.target);
  const Tensor<float>& gin = ctx.tape.grad(ctx.input_id);  // [1, C, H, W]

  SaliencyMap map;
  map.height = HW;
  map.width = HW;
  map.action_dim = action_dim;
  map.values.assign(static_cast<size_t>(HW) * HW, 0.f);
  for (int r = 0; r < HW; ++r)
    for (int c = 0; c < HW; ++c) {
      float best = 0.f;
      for (int ch = 0; ch < C; ++ch) {
        // negative values filtered at the input as well
        float g = std::max(gin[(static_cast<size_t>(ch) * HW + r) * HW + c],
                           0.f);
        best = std::max(best, g);
      }
      map.values[static_cast<size_t>(r) * HW + c] =
          best * cam_up[static_cast<size_t>(r) * HW + c];
    }

  map.raw_max = *std::max_element(map.values.begin(), map.values.end());
  if (map.raw_max > 0.f)
    for (auto& v : map.values) v /= map.raw_max;

  int want = static_cast<int>(std::ceil(top_q * HW * HW));
  map.mask.assign(map.values.size(), 0);
  for (int i : top_k_pixels(map.values, want)) map.mask[i] = 1;
  map.mask_count =
      static_cast<int>(std::count(map.mask.begin(), map.mask.end(), 1));
  return map;
}

std::vector<float> grad_cam_map(nn::ActorNet<float>& actor,
                                const ImageObs& image,
                                const std::vector<float>& proprio,
                                int action_dim, int* out_h, int* out_w) {
  ForwardCtx ctx;
  forward_actor(actor, image, proprio, action_dim, ctx);
  ctx.tape.guided_backprop = false;
  ctx.tape.backward(ctx.target);
  return cam_from_ctx(ctx, out_h, out_w);
}

std::vector<float> actor_input_gradient(nn::ActorNet<float>& actor,
                                        const ImageObs& image,
                                        const std::vector<float>& proprio,
                                        int action_dim) {
  ForwardCtx ctx;
  forward_actor(actor, image, proprio, action_dim, ctx);
  ctx.tape.guided_backprop = false;
  ctx.tape.backward(ctx.target);
  const Tensor<float>& gin = ctx.tape.grad(ctx.input_id);
  int HW = actor.arch.image_hw, C = actor.arch.image_c;
  std::vector<float> out(static_cast<size_t>(HW) * HW, 0.f);
  for (int r = 0; r < HW; ++r)
    for (int c = 0; c < HW; ++c) {
      float best = 0.f;
      for (int ch = 0; ch < C; ++ch)
        best = std::max(
            best, std::abs(gin[(static_cast<size_t>(ch) * HW + r) * HW + c]));
      out[static_cast<size_t>(r) * HW + c] = best;
    }
  return out;
}

std::vector<std::vector<int>> ggc_noise_mask(
    nn::ActorNet<float>& actor, const std::vector<ImageObs>& frames,
    const std::vector<std::vector<float>>& proprios, double top_q,
    double* mean_fraction) {
  if (frames.size() != proprios.size())
    throw std::invalid_argument("ggc_noise_mask: frame/proprio count mismatch");
  std::vector<std::vector<int>> masks;
  double frac_sum = 0.0;
  for (size_t i = 0; i < frames.size(); ++i) {
    SaliencyMap m = guided_grad_cam(actor, frames[i], proprios[i],
                                    /*action_dim=*/0, top_q);
    frac_sum += static_cast<double>(m.mask_count) / m.values.size();
    masks.push_back(m.mask_indices());
  }
  if (mean_fraction)
    *mean_fraction = frames.empty() ? 0.0 : frac_sum / frames.size();
  return masks;
}

std::vector<int> threshold_pixels(const SaliencyMap& map, double q,
                                  ThresholdRule rule) {
  std::vector<int> nonzero;
  for (size_t i = 0; i < map.values.size(); ++i)
    if (map.values[i] > 0.f) nonzero.push_back(static_cast<int>(i));
  if (nonzero.empty()) return {};

  if (rule == ThresholdRule::value_percentile) {
    // keep values at or above the (1 - q) percentile of nonzero values
    std::vector<float> vals;
    for (int i : nonzero) vals.push_back(map.values[i]);
    std::sort(vals.begin(), vals.end());
    size_t cut = static_cast<size_t>((1.0 - q) * vals.size());
    cut = std::min(cut, vals.size() - 1);
    float thresh = vals[cut];
    std::vector<int> out;
    for (int i : nonzero)
      if (map.values[i] >= thresh) out.push_back(i);
    return out;
  }

  // mass rule: smallest pixel set holding fraction q of the total saliency
  std::stable_sort(nonzero.begin(), nonzero.end(), [&](int a, int b) {
    if (map.values[a] != map.values[b]) return map.values[a] > map.values[b];
    return a < b;
  });
  double total = 0.0;
  for (int i : nonzero) total += map.values[i];
  std::vector<int> out;
  double acc = 0.0;
  for (int i : nonzero) {
    out.push_back(i);
    acc += map.values[i];
    if (acc >= q * total) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

void saliency_overlay_png(const std::string& path, const ImageObs& image,
                          const SaliencyMap& map) {
  if (image.channels != 3)
    throw std::invalid_argument("saliency_overlay_png: need an RGB frame");
  ImageObs out = image;
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      if (map.mask[static_cast<size_t>(r) * image.width + c]) {
        out.at(r, c, 0) = 1.0f;  // pink tint
        out.at(r, c, 1) = 0.3f;
        out.at(r, c, 2) = 0.7f;
      }
  write_png(path, out);
}

}  // namespace racer
