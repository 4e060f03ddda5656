#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "racer/camera.hpp"
#include "racer/nn/net.hpp"

namespace racer {

/// Interpretation of the visualization threshold: keep values above the
/// (1 - q) percentile of nonzero values, or keep the smallest set of pixels
/// holding fraction q of the total saliency mass.
enum class ThresholdRule { value_percentile, mass };

struct SaliencyMap {
  int height = 0;
  int width = 0;
  int action_dim = 0;
  float raw_max = 0.f;          // pre-normalization max; 0 => dead map
  std::vector<float> values;    // H*W, normalized to [0, 1]
  std::vector<uint8_t> mask;    // H*W, 1 = selected
  int mask_count = 0;

  std::vector<int> mask_indices() const;  // row * W + col of selected pixels
};

/// Guided Grad-CAM for one policy output dimension: Grad-CAM at the last
/// conv layer (GAP weights, ReLU combination, bilinear upsample) times the
/// guided-backprop input gradient, reduced over channels by max. The mask
/// keeps the ceil(top_q * H * W) largest values (capped at the number of
/// nonzero values, ties by scan order).
SaliencyMap guided_grad_cam(nn::ActorNet<float>& actor, const ImageObs& image,
                            const std::vector<float>& proprio, int action_dim,
                            double top_q);

/// Raw Grad-CAM map at the last conv layer's resolution (before upsampling
/// and guided weighting); width is returned via out_w.
std::vector<float> grad_cam_map(nn::ActorNet<float>& actor,
                                const ImageObs& image,
                                const std::vector<float>& proprio,
                                int action_dim, int* out_h, int* out_w);

/// Vanilla (unguided) input gradient of the chosen head output, reduced over
/// channels by max of absolute values. Diagnostic hook used by tests.
std::vector<float> actor_input_gradient(nn::ActorNet<float>& actor,
                                        const ImageObs& image,
                                        const std::vector<float>& proprio,
                                        int action_dim);

/// Per-frame steering-saliency masks for a trajectory of observations;
/// mean_fraction (optional) receives the average highlighted pixel fraction.
std::vector<std::vector<int>> ggc_noise_mask(
    nn::ActorNet<float>& actor, const std::vector<ImageObs>& frames,
    const std::vector<std::vector<float>>& proprios, double top_q,
    double* mean_fraction = nullptr);

/// Pixels above the visualization threshold under the chosen rule.
std::vector<int> threshold_pixels(const SaliencyMap& map, double q,
                                  ThresholdRule rule);

/// Original frame with the selected saliency pixels tinted pink.
void saliency_overlay_png(const std::string& path, const ImageObs& image,
                          const SaliencyMap& map);

}  // namespace racer
