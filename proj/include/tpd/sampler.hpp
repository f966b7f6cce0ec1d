#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tpd/rng.hpp"
#include "tpd/schedule.hpp"
#include "tpd/stagewise.hpp"
#include "tpd/video.hpp"

namespace tpd {

/// Network prediction at (x_t, global time t): eps for DDIM, velocity for
/// flow matching.
using Denoiser = std::function<VideoTensor(const VideoTensor& x, double t)>;

/// Deterministic DDIM update from t to t_prev:
/// x_prev = g_prev (x_t - s_t eps) / g_t + s_prev eps.
VideoTensor ddim_step(const Schedule& schedule, const Denoiser& model, const VideoTensor& x_t,
                      double t, double t_prev);

/// Euler step x_prev = x_t - (t - t_prev) v(x_t, t). The caller chooses the
/// time variable; the sampler drives it in stage-local time.
VideoTensor fm_euler_step(const Denoiser& model, const VideoTensor& x_t, double t, double t_prev);

/// Coefficients of the jump from the end of stage k to the start of stage k-1.
struct RenoiseParams {
  double corr = -1.0;          // pair correlation of the injected noise
  double leave_gamma = 1.0;    // gamma at the leaving time of stage k
  double scale = 1.0;          // gamma_{s_{k-1}} / leave_gamma
  double noise_weight = 0.0;   // sigma_{s_{k-1}} / sqrt(1 - corr)
};

RenoiseParams renoise_params(const Schedule& schedule, const StagePlan& plan, int k);

/// u = Up(x_end, 2); returns scale * u + noise_weight * n' where each
/// duplicated frame pair of n' is (g, corr * g + sqrt(1 - corr^2) * g2); at
/// corr = -1 this is exactly (g, -g). Throws Domain for k <= 1.
VideoTensor renoise_transition(const Schedule& schedule, const StagePlan& plan, int k,
                               const VideoTensor& x_end, Rng& rng);
VideoTensor renoise_transition(const RenoiseParams& params, const VideoTensor& x_end, Rng& rng);

/// Plain nearest upsampling, the no-renoise ablation.
inline RenoiseParams no_renoise() { return {0.0, 1.0, 1.0, 0.0}; }

struct SamplerConfig {
  int steps_per_stage = 10;
  std::uint64_t seed = 0;
  bool renoise = true;
  /// Multiplies the renoise scale; fault injection for the verify suite.
  double renoise_scale_factor = 1.0;
  /// Invoked after every solver step and every transition when set.
  std::function<void(int stage, int step, double t, const VideoTensor& x)> snapshot;
};

/// Stage-by-stage reverse ODE from pure noise at the coarsest frame rate to a
/// full-rate clip of shape `full_shape`.
VideoTensor sample_video(const Schedule& schedule, const StagePlan& plan, const Denoiser& model,
                         const SamplerConfig& config, const VideoShape& full_shape);

struct AttentionCost {
  /// sum_k (F / d_k)^2 / (K F^2): attention cost per step relative to running
  /// every step at full frame rate.
  double ratio = 1.0;
  std::vector<std::size_t> tokens_per_stage;      // frames processed per step, k = 1..K
  std::size_t total_token_pairs = 0;              // over all steps
  std::size_t full_rate_token_pairs = 0;
};

AttentionCost attention_cost_accounting(const StagePlan& plan, std::size_t full_frames,
                                        int steps_per_stage);
AttentionCost attention_cost_accounting(int stages, std::size_t full_frames, int steps_per_stage);

}  // namespace tpd
