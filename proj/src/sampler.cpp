#include "tpd/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "tpd/error.hpp"

namespace tpd {

VideoTensor ddim_step(const Schedule& schedule, const Denoiser& model, const VideoTensor& x_t,
                      double t, double t_prev) {
  if (t_prev == t) return x_t;
  if (!(t_prev < t)) fail(ErrorKind::Domain, "ddim_step must move towards lower noise");
  VideoTensor eps = model(x_t, t);
  require_same_shape(x_t, eps, "ddim_step model output");
  auto [gt, st] = schedule.coefficients(t);
  auto [gp, sp] = schedule.coefficients(t_prev);
  if (gt < kSigmaFloor) fail(ErrorKind::Endpoint, "ddim_step from a point with gamma = 0");
  // x0_hat = (x_t - s_t eps) / g_t ; x_prev = g_p x0_hat + s_p eps
  return lincomb(gp / gt, x_t, sp - gp * st / gt, eps);
}

VideoTensor fm_euler_step(const Denoiser& model, const VideoTensor& x_t, double t, double t_prev) {
  if (t_prev == t) return x_t;
  VideoTensor v = model(x_t, t);
  require_same_shape(x_t, v, "fm_euler_step model output");
  return lincomb(1.0, x_t, -(t - t_prev), v);
}

RenoiseParams renoise_params(const Schedule& schedule, const StagePlan& plan, int k) {
  if (k <= 1 || k > plan.count()) {
    fail(ErrorKind::Domain, "renoise transition needs a finer stage after stage " + std::to_string(k));
  }
  const double corr = plan.renoise_corr();
  if (!(corr >= -1.0 && corr <= 0.0)) fail(ErrorKind::Domain, "renoise correlation outside [-1, 0]");
  auto [gs, ss] = schedule.coefficients(plan.stage(k - 1).start);
  const double leave_gamma = schedule.coefficients(plan.stage(k).end).gamma;
  if (leave_gamma < kSigmaFloor) fail(ErrorKind::Endpoint, "stage ends at pure noise");
  RenoiseParams p;
  p.corr = corr;
  p.leave_gamma = leave_gamma;
  p.scale = gs / leave_gamma;
  p.noise_weight = ss / std::sqrt(1.0 - corr);
  return p;
}

VideoTensor renoise_transition(const RenoiseParams& params, const VideoTensor& x_end, Rng& rng) {
  VideoTensor out = up_temporal_nearest(x_end, 2);
  const std::size_t fs = out.frame_size();
  const double c = params.corr;
  const double c_perp = std::sqrt(std::max(0.0, 1.0 - c * c));
  for (std::size_t pair = 0; pair < x_end.frames(); ++pair) {
    auto a = out.frame(2 * pair);
    auto b = out.frame(2 * pair + 1);
    for (std::size_t i = 0; i < fs; ++i) {
      const double g = rng.normal();
      const double h = c == -1.0 ? -g : c * g + c_perp * rng.normal();
      a[i] = params.scale * a[i] + params.noise_weight * g;
      b[i] = params.scale * b[i] + params.noise_weight * h;
    }
  }
  return out;
}

VideoTensor renoise_transition(const Schedule& schedule, const StagePlan& plan, int k,
                               const VideoTensor& x_end, Rng& rng) {
  return renoise_transition(renoise_params(schedule, plan, k), x_end, rng);
}

VideoTensor sample_video(const Schedule& schedule, const StagePlan& plan, const Denoiser& model,
                         const SamplerConfig& config, const VideoShape& full_shape) {
  if (config.steps_per_stage < 1) fail(ErrorKind::Domain, "steps_per_stage must be >= 1");
  const int K = plan.count();
  Rng rng(config.seed);

  const Stage& coarsest = plan.stage(K);
  const std::size_t frames = plan.stage_frames(K, full_shape.frames);
  VideoTensor x(full_shape.with_frames(frames), log2_exact(coarsest.down_factor));
  const double sigma_start = schedule.coefficients(coarsest.start).sigma;
  for (double& v : x.data()) v = sigma_start * rng.normal();

  const int n = config.steps_per_stage;
  for (int k = K; k >= 1; --k) {
    const Stage& stage = plan.stage(k);
    if (schedule.kind() == ScheduleKind::DDIM) {
      const int grid = schedule.grid_steps();
      auto node = [&](int j) {
        if (j == 0) return stage.start;
        if (j == n) return stage.end;
        double t = schedule.snap(stage.start - stage.width() * j / n);
        return std::clamp(t, stage.end + 0.5 / grid, stage.start - 0.5 / grid);
      };
      for (int j = 0; j < n; ++j) {
        const double t = node(j), t_prev = node(j + 1);
        if (t_prev < t) x = ddim_step(schedule, model, x, t, t_prev);
        if (config.snapshot) config.snapshot(k, j + 1, t_prev, x);
      }
    } else {
      // Stage targets are derivatives in stage-local time, so integrate in
      // t' from 1 to 0 and hand the model the matching global time.
      Denoiser local = [&](const VideoTensor& xs, double tl) {
        return model(xs, stage.end + tl * stage.width());
      };
      for (int j = 0; j < n; ++j) {
        const double tl = 1.0 - static_cast<double>(j) / n;
        const double tl_prev = 1.0 - static_cast<double>(j + 1) / n;
        x = fm_euler_step(local, x, tl, tl_prev);
        if (config.snapshot) config.snapshot(k, j + 1, stage.end + tl_prev * stage.width(), x);
      }
    }

    if (k > 1) {
      RenoiseParams p = config.renoise ? renoise_params(schedule, plan, k) : no_renoise();
      p.scale *= config.renoise_scale_factor;
      x = renoise_transition(p, x, rng);
      if (config.snapshot) config.snapshot(k - 1, 0, plan.stage(k - 1).start, x);
    }
  }
  return x;
}

AttentionCost attention_cost_accounting(int stages, std::size_t full_frames, int steps_per_stage) {
  if (stages < 1) fail(ErrorKind::Domain, "stage count must be >= 1");
  if (steps_per_stage < 1) fail(ErrorKind::Domain, "steps_per_stage must be >= 1");
  const std::size_t coarsest = std::size_t{1} << (stages - 1);
  if (full_frames == 0 || full_frames % coarsest != 0) {
    fail(ErrorKind::Shape, "frame count not divisible by the coarsest stage factor");
  }
  AttentionCost cost;
  double sum = 0.0;
  const auto steps = static_cast<std::size_t>(steps_per_stage);
  for (int k = 1; k <= stages; ++k) {
    const std::size_t f = full_frames >> (k - 1);
    cost.tokens_per_stage.push_back(f);
    sum += static_cast<double>(f * f);
    cost.total_token_pairs += steps * f * f;
    cost.full_rate_token_pairs += steps * full_frames * full_frames;
  }
  cost.ratio = sum / (stages * static_cast<double>(full_frames * full_frames));
  return cost;
}

AttentionCost attention_cost_accounting(const StagePlan& plan, std::size_t full_frames,
                                        int steps_per_stage) {
  return attention_cost_accounting(plan.count(), full_frames, steps_per_stage);
}

}  // namespace tpd
