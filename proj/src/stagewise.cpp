#include "tpd/stagewise.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

#include "tpd/alignment.hpp"
#include "tpd/error.hpp"

namespace tpd {

namespace {

void check_stage(const Stage& stage) {
  if (!(stage.width() > 0.0)) {
    fail(ErrorKind::StageWidth, "stage " + std::to_string(stage.index) + " has zero width");
  }
}

}  // namespace

double bridge_end_time(const Schedule& schedule, double entering_start, double corr) {
  if (!(corr >= -1.0 && corr <= 0.0)) {
    fail(ErrorKind::Domain, "renoise correlation must lie in [-1, 0]");
  }
  if (!(entering_start > 0.0 && entering_start < 1.0)) {
    fail(ErrorKind::Domain, "bridge needs an interior entering time");
  }
  if (corr == 0.0) return 0.0;
  const double lambda = schedule.log_snr(entering_start) + 0.5 * std::log((1.0 - corr) / -corr);
  return schedule.time_at_log_snr(lambda);
}

StagePlan StagePlan::uniform(const Schedule& schedule, int stages, double renoise_corr) {
  if (stages < 1) fail(ErrorKind::Domain, "stage count must be >= 1");
  std::vector<Stage> list;
  for (int k = 1; k <= stages; ++k) {
    Stage s;
    s.index = k;
    s.start = static_cast<double>(k) / stages;
    s.end = k == 1 ? 0.0
                   : bridge_end_time(schedule, static_cast<double>(k - 1) / stages, renoise_corr);
    s.down_factor = std::size_t{1} << (k - 1);
    list.push_back(s);
  }
  return from_stages(std::move(list), renoise_corr);
}

StagePlan StagePlan::from_stages(std::vector<Stage> stages, double renoise_corr) {
  if (stages.empty()) fail(ErrorKind::Domain, "plan needs at least one stage");
  StagePlan plan;
  plan.renoise_corr_ = renoise_corr;
  plan.boundaries_.push_back(stages.front().end);
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const Stage& s = stages[i];
    if (s.index != static_cast<int>(i) + 1) fail(ErrorKind::Domain, "stages must be listed k = 1..K");
    if (!(s.start > s.end)) fail(ErrorKind::StageWidth, "stage start must exceed its end");
    if (s.end < 0.0 || s.start > 1.0) fail(ErrorKind::Domain, "stage outside [0, 1]");
    if (s.down_factor != (std::size_t{1} << i)) {
      fail(ErrorKind::Domain, "stage k must run at down factor 2^(k-1)");
    }
    if (i > 0 && !(s.start > stages[i - 1].start)) {
      fail(ErrorKind::Domain, "stage starts must increase with k");
    }
    plan.boundaries_.push_back(s.start);
  }
  plan.stages_ = std::move(stages);
  return plan;
}

const Stage& StagePlan::stage(int k) const {
  if (k < 1 || k > count()) fail(ErrorKind::Domain, "stage index out of range");
  return stages_[static_cast<std::size_t>(k) - 1];
}

std::size_t StagePlan::stage_frames(int k, std::size_t full_frames) const {
  const std::size_t d = stage(k).down_factor;
  if (full_frames % d != 0) fail(ErrorKind::Shape, "frame count not divisible by stage factor");
  return full_frames / d;
}

BoundaryLatents boundary_latents(const Schedule& schedule, const StagePlan& plan, int k,
                                 const VideoTensor& x0, const VideoTensor& eps) {
  const Stage& stage = plan.stage(k);
  require_same_shape(x0, eps, "boundary_latents");
  const std::size_t d = stage.down_factor;
  if (x0.frames() % d != 0) fail(ErrorKind::Shape, "frame count not divisible by stage factor");

  // The coarsest stage is entered from pure noise rather than from a coarser
  // stage, so its start content stays at its own frame rate.
  const bool bridged = k < plan.count();
  auto [ge, se] = schedule.coefficients(stage.end);
  auto [gs, ss] = schedule.coefficients(stage.start);
  VideoTensor eps_d = down_temporal(eps, d);
  VideoTensor x0_d = down_temporal(x0, d);
  VideoTensor start_content = bridged ? up_temporal_nearest(down_temporal(x0, 2 * d), 2) : x0_d;
  return {lincomb(gs, start_content, ss, eps_d), lincomb(ge, x0_d, se, eps_d)};
}

BoundaryLatents boundary_latents(const Schedule& schedule, const Stage& stage,
                                 const VideoTensor& x0, const VideoTensor& eps) {
  require_same_shape(x0, eps, "boundary_latents");
  const std::size_t d = stage.down_factor;
  if (x0.frames() % (2 * d) != 0) {
    fail(ErrorKind::Shape, "frame count not divisible by twice the stage factor");
  }
  auto [ge, se] = schedule.coefficients(stage.end);
  auto [gs, ss] = schedule.coefficients(stage.start);
  VideoTensor eps_d = down_temporal(eps, d);
  return {lincomb(gs, up_temporal_nearest(down_temporal(x0, 2 * d), 2), ss, eps_d),
          lincomb(ge, down_temporal(x0, d), se, eps_d)};
}

VideoTensor stage_epsilon(const Schedule& schedule, const Stage& stage, const VideoTensor& x_start,
                          const VideoTensor& x_end) {
  check_stage(stage);
  require_same_shape(x_start, x_end, "stage_epsilon");
  auto [gs, ss] = schedule.coefficients(stage.start);
  auto [ge, se] = schedule.coefficients(stage.end);
  if (gs < kSigmaFloor || ge < kSigmaFloor) {
    fail(ErrorKind::Endpoint, "stage_epsilon: gamma vanishes at a stage boundary");
  }
  const double denom = se / ge - ss / gs;
  if (denom == 0.0) fail(ErrorKind::StageWidth, "stage_epsilon: degenerate denominator");
  return lincomb(1.0 / (ge * denom), x_end, -1.0 / (gs * denom), x_start);
}

VideoTensor intermediate_latent(const Schedule& schedule, const Stage& stage,
                                const VideoTensor& x_start, const VideoTensor& eps_k, double t) {
  require_same_shape(x_start, eps_k, "intermediate_latent");
  if (!(t >= stage.end && t <= stage.start)) {
    std::ostringstream msg;
    msg << "time " << t << " outside stage " << stage.index << " [" << stage.end << ", "
        << stage.start << "]";
    fail(ErrorKind::Domain, msg.str());
  }
  if (t == stage.start) return x_start;
  auto [gs, ss] = schedule.coefficients(stage.start);
  if (gs < kSigmaFloor) fail(ErrorKind::Endpoint, "intermediate_latent: gamma_s vanishes");
  auto [gt, st] = schedule.coefficients(t);
  return lincomb(gt / gs, x_start, gt * (st / gt - ss / gs), eps_k);
}

FlowSample fm_stage_sample(const Stage& stage, const VideoTensor& x_start, const VideoTensor& x_end,
                           double t) {
  check_stage(stage);
  require_same_shape(x_start, x_end, "fm_stage_sample");
  if (!(t >= stage.end && t <= stage.start)) fail(ErrorKind::Domain, "time outside stage");
  const double tl = (t - stage.end) / stage.width();
  return {lincomb(1.0 - tl, x_end, tl, x_start), lincomb(1.0, x_start, -1.0, x_end)};
}

TargetParameterization target_parameterization(const Schedule& schedule, const Stage& stage,
                                               double t, double floor) {
  check_stage(stage);
  if (!(t >= stage.end && t <= stage.start)) fail(ErrorKind::Domain, "time outside stage");
  if (!(floor > 0.0)) fail(ErrorKind::Domain, "parameterization floor must be positive");
  if (schedule.kind() == ScheduleKind::FlowMatching) {
    const double b = std::max((t - stage.end) / stage.width(), floor);
    return {1.0 / b, -1.0 / b};
  }
  auto [ge, se] = schedule.coefficients(stage.end);
  auto [gt, st] = schedule.coefficients(t);
  const double b = std::max(st - gt * se / ge, floor);
  return {1.0 / b, -(gt / ge) / b};
}

double sample_stage_time(const Schedule& schedule, const Stage& stage, Rng& rng) {
  check_stage(stage);
  double t = stage.end + rng.uniform() * stage.width();
  if (t >= stage.start) t = stage.end;
  if (schedule.kind() != ScheduleKind::DDIM) return t;

  const int steps = schedule.grid_steps();
  const auto lo = static_cast<long>(std::ceil(stage.end * steps - 1e-9));
  const auto hi = static_cast<long>(std::ceil(stage.start * steps - 1e-9)) - 1;
  if (lo > hi) return t;
  const long i = std::clamp(std::lround(t * steps), lo, hi);
  return static_cast<double>(i) / steps;
}

std::vector<StageSample> make_training_batch(const Schedule& schedule, const StagePlan& plan,
                                             std::span<const VideoTensor> x0_batch, Rng& rng,
                                             const TrainingBatchOptions& options) {
  if (x0_batch.empty()) fail(ErrorKind::Input, "empty training batch");
  const VideoShape shape = x0_batch.front().shape();
  const std::size_t coarsest = plan.stage(plan.count()).down_factor;
  for (const auto& x : x0_batch) {
    if (x.shape() != shape) fail(ErrorKind::Shape, "batch clips differ in shape");
  }
  if (shape.frames % (plan.count() > 1 ? coarsest : 1) != 0) {
    fail(ErrorKind::Shape, "frame count not divisible by the coarsest stage factor");
  }

  std::vector<VideoTensor> eps;
  eps.reserve(x0_batch.size());
  for (std::size_t i = 0; i < x0_batch.size(); ++i) eps.push_back(sample_gaussian(shape, rng));
  if (options.align) eps = align_noise(x0_batch, eps);

  std::vector<StageSample> batch;
  batch.reserve(x0_batch.size());
  const int K = plan.count();
  const int offset = rng.uniform_int(0, K - 1);
  for (std::size_t i = 0; i < x0_batch.size(); ++i) {
    StageSample sample;
    sample.k = 1 + static_cast<int>((static_cast<std::size_t>(offset) + i) % static_cast<std::size_t>(K));
    const Stage& stage = plan.stage(sample.k);
    sample.t = sample_stage_time(schedule, stage, rng);
    auto latents = boundary_latents(schedule, plan, sample.k, x0_batch[i], eps[i]);
    sample.x_hat_s = std::move(latents.start);
    sample.x_hat_e = std::move(latents.end);
    if (schedule.kind() == ScheduleKind::FlowMatching) {
      auto fm = fm_stage_sample(stage, sample.x_hat_s, sample.x_hat_e, sample.t);
      sample.x_t = std::move(fm.x_t);
      sample.target = std::move(fm.velocity);
    } else {
      sample.target = stage_epsilon(schedule, stage, sample.x_hat_s, sample.x_hat_e);
      sample.x_t = intermediate_latent(schedule, stage, sample.x_hat_s, sample.target, sample.t);
    }
    batch.push_back(std::move(sample));
  }
  return batch;
}

double verify_constant_eps_quadrature(const Schedule& schedule, const Stage& stage,
                                      const VideoTensor& x_start, const VideoTensor& eps_const,
                                      double t) {
  require_same_shape(x_start, eps_const, "verify_constant_eps_quadrature");
  if (!(t > stage.end && t < stage.start)) fail(ErrorKind::Domain, "time must be interior to the stage");
  const double lambda_s = schedule.log_snr(stage.start);
  const double lambda_t = schedule.log_snr(t);

  double error = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double lambda) { return std::exp(-lambda); }, lambda_s, lambda_t, 15, 1e-12, &error);
  if (!std::isfinite(integral) || error > 1e-10 * std::max(1.0, std::abs(integral))) {
    std::ostringstream msg;
    msg << "quadrature did not converge on [" << lambda_s << ", " << lambda_t << "]: " << integral
        << " +- " << error;
    fail(ErrorKind::Numerical, msg.str());
  }

  const double gs = schedule.coefficients(stage.start).gamma;
  const double gt = schedule.coefficients(t).gamma;
  VideoTensor quad = lincomb(gt / gs, x_start, -gt * integral, eps_const);
  VideoTensor closed = intermediate_latent(schedule, stage, x_start, eps_const, t);
  double residual = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i) {
    residual = std::max(residual, std::abs(quad[i] - closed[i]));
  }
  return residual;
}

}  // namespace tpd
