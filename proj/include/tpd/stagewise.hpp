#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tpd/rng.hpp"
#include "tpd/schedule.hpp"
#include "tpd/video.hpp"

namespace tpd {

/// One stage of the temporal pyramid. Stage k is denoised from `start`
/// (high-noise side, s_k) down to `end` (low-noise side, e_k) on every
/// `down_factor`-th frame, down_factor = 2^(k-1).
struct Stage {
  int index = 1;
  double start = 1.0;
  double end = 0.0;
  std::size_t down_factor = 1;

  double width() const { return start - end; }
  bool contains(double t) const { return t >= end && t < start; }
};

/// K-stage partition of [0, 1]. Nominal boundaries t_0 = 0 < ... < t_K = 1
/// are uniform and s_k = t_k. Stage 1 ends at 0; every coarser stage ends at
/// the bridge time of the stage it hands over to (see bridge_end_time), which
/// sits just below the nominal boundary t_{k-1}.
class StagePlan {
 public:
  static StagePlan uniform(const Schedule& schedule, int stages, double renoise_corr = -1.0);

  /// Explicit stages listed for k = 1..K. Validates ordering and factors.
  static StagePlan from_stages(std::vector<Stage> stages, double renoise_corr = -1.0);

  int count() const { return static_cast<int>(stages_.size()); }
  const Stage& stage(int k) const;
  const std::vector<Stage>& stages() const { return stages_; }

  /// Nominal boundaries t_0..t_K.
  const std::vector<double>& boundaries() const { return boundaries_; }
  double renoise_corr() const { return renoise_corr_; }

  /// Frames of stage k for a full-rate clip of `full_frames` frames.
  std::size_t stage_frames(int k, std::size_t full_frames) const;

 private:
  std::vector<Stage> stages_;
  std::vector<double> boundaries_;
  double renoise_corr_ = -1.0;
};

/// Time at which a stage must end so that nearest upsampling plus noise with
/// pair correlation `corr` lands exactly on the schedule at `entering_start`:
/// lambda_end = lambda(entering_start) + 0.5 * ln((1 - corr) / -corr).
/// corr must lie in [-1, 0]; corr = 0 maps to the clean end t = 0.
double bridge_end_time(const Schedule& schedule, double entering_start, double corr);

struct BoundaryLatents {
  VideoTensor start;  // x_hat_{s_k}
  VideoTensor end;    // x_hat_{e_k}
};

/// x_hat_e = g_e Down(x0, d) + s_e Down(eps, d)
/// x_hat_s = g_s Up(Down(x0, 2d), 2) + s_s Down(eps, d)
BoundaryLatents boundary_latents(const Schedule& schedule, const StagePlan& plan, int k,
                                 const VideoTensor& x0, const VideoTensor& eps);
BoundaryLatents boundary_latents(const Schedule& schedule, const Stage& stage,
                                 const VideoTensor& x0, const VideoTensor& eps);

/// Constant noise of the stage recovered from its two boundary latents.
VideoTensor stage_epsilon(const Schedule& schedule, const Stage& stage, const VideoTensor& x_start,
                          const VideoTensor& x_end);

/// Constant-noise closed form of the probability-flow ODE inside a stage:
/// x_t = (g_t / g_s) x_s + g_t eps_k (s_t / g_t - s_s / g_s).
VideoTensor intermediate_latent(const Schedule& schedule, const Stage& stage,
                                const VideoTensor& x_start, const VideoTensor& eps_k, double t);

struct FlowSample {
  VideoTensor x_t;
  VideoTensor velocity;  // x_hat_s - x_hat_e, the derivative in stage-local time
};

/// Straight path between the stage endpoints in local time
/// t' = (t - e) / (s - e).
FlowSample fm_stage_sample(const Stage& stage, const VideoTensor& x_start, const VideoTensor& x_end,
                           double t);

struct StageSample {
  int k = 1;
  double t = 0.0;
  VideoTensor x_hat_s;
  VideoTensor x_hat_e;
  VideoTensor x_t;
  VideoTensor target;  // eps_k (DDIM) or v_k (flow matching)
};

struct TrainingBatchOptions {
  bool align = true;
};

/// Stage-wise sample assembly for one batch: full-rate noise is drawn and
/// (optionally) aligned with the batch once. Stages cycle through the batch
/// from a uniformly drawn offset, so each item's stage is uniform and every
/// stage appears floor(B / K) or ceil(B / K) times; the time is uniform inside
/// the stage.
std::vector<StageSample> make_training_batch(const Schedule& schedule, const StagePlan& plan,
                                             std::span<const VideoTensor> x0_batch, Rng& rng,
                                             const TrainingBatchOptions& options = {});

/// Affine link between the stage target and the stage-end latent:
/// target = skip * x_t + out * x_hat_e. Flow matching gives
/// (x_t - x_hat_e) / t', DDIM gives (x_t - (g_t / g_e) x_hat_e) / b with
/// b = s_t - g_t s_e / g_e. The denominator is floored at `floor`, so the
/// identity is exact wherever it stays above the floor.
struct TargetParameterization {
  double skip = 1.0;
  double out = -1.0;
};

TargetParameterization target_parameterization(const Schedule& schedule, const Stage& stage,
                                               double t, double floor = 0.05);

/// Uniform time in [end, start); DDIM snaps to the nearest grid time that
/// stays inside the stage.
double sample_stage_time(const Schedule& schedule, const Stage& stage, Rng& rng);

/// Max-abs difference between the exponential-integrator form of the ODE
/// (integral over lambda evaluated by adaptive Gauss-Kronrod quadrature with
/// eps held at `eps_const`) and intermediate_latent. Throws Numerical when the
/// quadrature does not converge.
double verify_constant_eps_quadrature(const Schedule& schedule, const Stage& stage,
                                      const VideoTensor& x_start, const VideoTensor& eps_const,
                                      double t);

}  // namespace tpd
