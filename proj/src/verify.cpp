#include "tpd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tpd/alignment.hpp"
#include "tpd/error.hpp"
#include "tpd/rng.hpp"
#include "tpd/sampler.hpp"
#include "tpd/stagewise.hpp"
#include "tpd/toymodel.hpp"

namespace tpd {

namespace {

const Schedule& schedule_of(ScheduleKind kind) {
  static const Schedule fm = Schedule::flow_matching();
  static const Schedule ddim = Schedule::ddim_linear();
  return kind == ScheduleKind::FlowMatching ? fm : ddim;
}

constexpr ScheduleKind kKinds[] = {ScheduleKind::FlowMatching, ScheduleKind::DDIM};

// Random K-stage plan with interior nominal boundaries, so every stage start
// has gamma > 0 under both schedules.
StagePlan random_plan(const Schedule& schedule, int stages, Rng& rng) {
  std::vector<double> nominal(static_cast<std::size_t>(stages));
  for (auto& b : nominal) b = rng.uniform(0.02, 0.98);
  std::sort(nominal.begin(), nominal.end());
  for (std::size_t i = 1; i < nominal.size(); ++i) {
    nominal[i] = std::max(nominal[i], nominal[i - 1] + 1e-3);
  }
  std::vector<Stage> list;
  for (int k = 1; k <= stages; ++k) {
    Stage s;
    s.index = k;
    s.start = nominal[static_cast<std::size_t>(k) - 1];
    s.end = k == 1 ? 0.0 : bridge_end_time(schedule, nominal[static_cast<std::size_t>(k) - 2], -1.0);
    s.down_factor = std::size_t{1} << (k - 1);
    list.push_back(s);
  }
  return StagePlan::from_stages(std::move(list), -1.0);
}

VideoTensor random_tensor(VideoShape shape, Rng& rng) { return sample_gaussian(shape, rng); }

double max_abs_diff(const VideoTensor& a, const VideoTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

double brute_force_min(const CostMatrix& cost) {
  std::vector<std::size_t> perm(cost.n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < cost.n; ++i) c += cost(i, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

SuiteResult verify_boundary_identities(const VerifyOptions& opt) {
  SuiteResult r{"boundary-identity", true, ""};
  Rng rng = Rng(opt.seed).split(101);
  double worst_end = 0.0, worst_eps = 0.0;
  int start_mismatch = 0;
  for (ScheduleKind kind : kKinds) {
    const Schedule& schedule = schedule_of(kind);
    for (int trial = 0; trial < opt.boundary_trials; ++trial) {
      const int K = rng.uniform_int(1, 4);
      StagePlan plan = random_plan(schedule, K, rng);
      const int k = rng.uniform_int(1, K);
      const Stage& stage = plan.stage(k);
      const VideoShape shape{(std::size_t{1} << K) * static_cast<std::size_t>(rng.uniform_int(1, 2)),
                             1, 2, 2};
      VideoTensor x0 = random_tensor(shape, rng);
      VideoTensor eps = random_tensor(shape, rng);
      auto [xs, xe] = boundary_latents(schedule, plan, k, x0, eps);

      VideoTensor eps_k = stage_epsilon(schedule, stage, xs, xe);
      if (!(intermediate_latent(schedule, stage, xs, eps_k, stage.start) == xs)) ++start_mismatch;
      worst_end = std::max(worst_end,
                           max_abs_diff(intermediate_latent(schedule, stage, xs, eps_k, stage.end), xe));
      if (kind == ScheduleKind::FlowMatching) {
        auto at_start = fm_stage_sample(stage, xs, xe, stage.start);
        auto at_end = fm_stage_sample(stage, xs, xe, stage.end);
        if (!(at_start.x_t == xs)) ++start_mismatch;
        worst_end = std::max(worst_end, max_abs_diff(at_end.x_t, xe));
      }

      // Latents built from one shared noise draw must give that draw back.
      auto [gs, ss] = schedule.coefficients(stage.start);
      auto [ge, se] = schedule.coefficients(stage.end);
      VideoTensor content = down_temporal(x0, stage.down_factor);
      VideoTensor noise = down_temporal(eps, stage.down_factor);
      VideoTensor recovered =
          stage_epsilon(schedule, stage, lincomb(gs, content, ss, noise), lincomb(ge, content, se, noise));
      worst_eps = std::max(worst_eps, max_abs_diff(recovered, noise));
    }
  }
  r.passed = start_mismatch == 0 && worst_end <= 1e-10 && worst_eps <= 1e-10;
  r.detail = "start mismatches " + std::to_string(start_mismatch) + ", max end error " +
             fmt(worst_end) + ", max eps recovery error " + fmt(worst_eps);
  return r;
}

SuiteResult verify_quadrature(const VerifyOptions& opt) {
  SuiteResult r{"quadrature-oracle", true, ""};
  Rng rng = Rng(opt.seed).split(102);
  double worst = 0.0;
  for (ScheduleKind kind : kKinds) {
    const Schedule& schedule = schedule_of(kind);
    for (int trial = 0; trial < opt.quadrature_trials; ++trial) {
      const int K = rng.uniform_int(1, 4);
      StagePlan plan = random_plan(schedule, K, rng);
      const Stage& stage = plan.stage(rng.uniform_int(1, K));
      const double t = stage.end + rng.uniform(0.05, 0.95) * stage.width();
      const VideoShape shape{4, 1, 2, 2};
      VideoTensor xs = random_tensor(shape, rng);
      VideoTensor eps = random_tensor(shape, rng);
      worst = std::max(worst, verify_constant_eps_quadrature(schedule, stage, xs, eps, t));
    }
  }
  r.passed = worst <= 1e-8;
  r.detail = "max |quadrature - closed form| " + fmt(worst);
  return r;
}

SuiteResult verify_assignment(const VerifyOptions& opt) {
  SuiteResult r{"assignment-brute-force", true, ""};
  Rng rng = Rng(opt.seed).split(103);
  int mismatches = 0;
  for (int trial = 0; trial < opt.assignment_trials; ++trial) {
    CostMatrix cost;
    cost.n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    cost.values.resize(cost.n * cost.n);
    const int flavour = trial % 3;
    for (double& v : cost.values) {
      if (flavour == 0) v = rng.uniform();
      else if (flavour == 1) v = rng.uniform_int(0, 3);  // many ties
      else v = std::pow(rng.normal(), 2);
    }
    const AssignmentResult res = linear_sum_assignment(cost);
    std::vector<std::size_t> sorted = res.permutation;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sorted.size() == cost.n;
    for (std::size_t i = 0; ok && i < cost.n; ++i) ok = sorted[i] == i;
    double achieved = 0.0;
    for (std::size_t i = 0; ok && i < cost.n; ++i) achieved += cost(i, res.permutation[i]);
    const double best = brute_force_min(cost);
    ok = ok && std::abs(achieved - best) <= 1e-9 * std::max(1.0, best) &&
         std::abs(res.total_cost - best) <= 1e-9 * std::max(1.0, best);
    if (!ok) ++mismatches;
  }

  int worse_than_identity = 0;
  for (int b = 0; b < opt.alignment_batches; ++b) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 32));
    const VideoShape shape{4, 1, 2, 2};
    std::vector<VideoTensor> xs, es;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(random_tensor(shape, rng));
    for (std::size_t i = 0; i < n; ++i) es.push_back(random_tensor(shape, rng));
    auto aligned = align_noise(xs, es);
    double identity = 0.0, matched = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      identity += squared_distance(xs[i].data(), es[i].data());
      matched += squared_distance(xs[i].data(), aligned[i].data());
    }
    if (matched > identity + 1e-12 * identity) ++worse_than_identity;
  }
  r.passed = mismatches == 0 && worse_than_identity == 0;
  r.detail = std::to_string(mismatches) + "/" + std::to_string(opt.assignment_trials) +
             " matrices differ from brute force, " + std::to_string(worse_than_identity) + "/" +
             std::to_string(opt.alignment_batches) + " aligned batches costlier than identity";
  return r;
}

SuiteResult verify_gradients(const VerifyOptions& opt) {
  SuiteResult r{"gradient-check", true, ""};
  Rng rng = Rng(opt.seed).split(104);
  struct Case {
    ModelConfig config;
    std::size_t frames;
    VideoShape shape;
  };
  const Case cases[] = {
      {{64, 32, true}, 16, {16, 1, 8, 8}},
      {{6, 4, false}, 3, {3, 1, 2, 3}},
  };
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    ToyDenoiser model(c.config, rng.split(1).seed());
    for (double& p : model.params()) p = rng.uniform(-0.5, 0.5);
    VideoTensor x = random_tensor(c.shape, rng);
    VideoTensor target = random_tensor(c.shape, rng);
    const double t = rng.uniform(0.05, 0.95);
    const double scale = 1.0 / static_cast<double>(x.size());

    ToyDenoiser::Cache cache;
    VideoTensor grad_out;
    mse_loss(model.forward(x, t, cache), target, &grad_out, scale);
    std::vector<double> analytic(model.param_count(), 0.0);
    model.backward(cache, grad_out, analytic);

    auto loss_at = [&](std::size_t i, double value) {
      const double saved = model.params()[i];
      model.params()[i] = value;
      const double l = mse_loss(model.forward(x, t), target, nullptr, scale);
      model.params()[i] = saved;
      return l;
    };
    for (std::size_t i = 0; i < model.param_count(); ++i) {
      const double p = model.params()[i];
      const double h = 1e-4 * std::max(1.0, std::abs(p));
      auto central = [&](double step) { return (loss_at(i, p + step) - loss_at(i, p - step)) / (2 * step); };
      // Richardson extrapolation cancels the O(h^2) truncation term.
      const double numeric = (4.0 * central(h / 2) - central(h)) / 3.0;
      const double err = std::abs(numeric - analytic[i]);
      const double rel = err / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-300});
      ++checked;
      if (err > 1e-4 * std::max(std::abs(numeric), std::abs(analytic[i])) && err > 1e-11) {
        ++failed;
      }
      if (err > 1e-11) worst = std::max(worst, rel);
    }
  }
  r.passed = failed == 0;
  r.detail = std::to_string(checked - failed) + "/" + std::to_string(checked) +
             " parameters within relative 1e-4, worst relative error " + fmt(worst);
  return r;
}

SuiteResult verify_renoise_covariance(const VerifyOptions& opt) {
  SuiteResult r{"renoise-covariance", true, ""};
  Rng rng = Rng(opt.seed).split(105);
  std::ostringstream detail;
  bool all = true;
  double worst_var = 0.0, worst_pair = 0.0, worst_mean = 0.0;
  bool exact_pairs = true;
  for (ScheduleKind kind : kKinds) {
    const Schedule& schedule = schedule_of(kind);
    for (double corr : {-1.0, -0.5}) {
      const StagePlan plan = StagePlan::uniform(schedule, 3, corr);
      for (int k = 2; k <= plan.count(); ++k) {
        RenoiseParams params = renoise_params(schedule, plan, k);
        params.scale *= opt.renoise_scale_factor;
        const Stage& stage = plan.stage(k);
        const auto [ge, se] = schedule.coefficients(stage.end);
        const auto [gs, ss] = schedule.coefficients(plan.stage(k - 1).start);

        const VideoShape full{8, 1, 1, 3};
        VideoTensor x0 = random_tensor(full, rng);
        VideoTensor content = down_temporal(x0, stage.down_factor);
        VideoTensor mean = scaled(gs, up_temporal_nearest(content, 2));
        const std::size_t n = mean.size(), fs = mean.frame_size();

        std::vector<double> sum(n, 0.0);
        double sq = 0.0, pair = 0.0;
        for (int draw = 0; draw < opt.mc_draws; ++draw) {
          VideoTensor noise = random_tensor(content.shape(), rng);
          VideoTensor x_end = lincomb(ge, content, se, noise);
          VideoTensor out = renoise_transition(params, x_end, rng);
          for (std::size_t i = 0; i < n; ++i) {
            const double dv = out[i] - mean[i];
            sum[i] += dv;
            sq += dv * dv;
          }
          for (std::size_t f = 0; f + 1 < out.frames(); f += 2) {
            for (std::size_t i = 0; i < fs; ++i) {
              pair += (out[f * fs + i] - mean[f * fs + i]) * (out[(f + 1) * fs + i] - mean[(f + 1) * fs + i]);
            }
          }
        }
        const double draws = opt.mc_draws;
        const double var_ratio = sq / (draws * static_cast<double>(n)) / (ss * ss);
        const double pair_corr = pair / (draws * static_cast<double>(n / 2)) / (ss * ss);
        double mean_dev = 0.0;
        for (double s : sum) mean_dev = std::max(mean_dev, std::abs(s / draws) / ss);
        worst_var = std::max(worst_var, std::abs(var_ratio - 1.0));
        worst_pair = std::max(worst_pair, std::abs(pair_corr));
        worst_mean = std::max(worst_mean, mean_dev);
        const bool ok = std::abs(var_ratio - 1.0) <= 0.02 && std::abs(pair_corr) <= 0.02 &&
                        mean_dev <= 0.02;
        if (!ok) {
          all = false;
          detail << to_string(kind) << " corr " << corr << " k=" << k << " variance ratio "
                 << var_ratio << " pair correlation " << pair_corr << "; ";
        }

        if (corr == -1.0) {
          // Injected noise alone: every duplicated pair must be exactly (g, -g).
          VideoTensor zero(content.shape());
          for (int draw = 0; draw < 100; ++draw) {
            VideoTensor out = renoise_transition(params, zero, rng);
            for (std::size_t f = 0; f + 1 < out.frames(); f += 2) {
              for (std::size_t i = 0; i < fs; ++i) {
                if (out[(f + 1) * fs + i] != -out[f * fs + i]) exact_pairs = false;
              }
            }
          }
        }
      }
    }
  }
  r.passed = all && exact_pairs;
  std::ostringstream os;
  os << "max |variance ratio - 1| " << fmt(worst_var) << ", max |pair correlation| "
     << fmt(worst_pair) << ", max mean deviation / sigma " << fmt(worst_mean)
     << ", injected pairs exactly anti-correlated: " << (exact_pairs ? "yes" : "no");
  if (!all) os << "; failing: " << detail.str();
  r.detail = os.str();
  return r;
}

std::vector<SuiteResult> run_verify_suites(const VerifyOptions& options, std::ostream& log) {
  using Clock = std::chrono::steady_clock;
  std::vector<SuiteResult> results;
  using Suite = SuiteResult (*)(const VerifyOptions&);
  const std::pair<const char*, Suite> suites[] = {
      {"boundary-identity", verify_boundary_identities},
      {"quadrature-oracle", verify_quadrature},
      {"assignment-brute-force", verify_assignment},
      {"gradient-check", verify_gradients},
      {"renoise-covariance", verify_renoise_covariance},
  };
  for (const auto& [name, suite] : suites) {
    const auto t0 = Clock::now();
    SuiteResult r;
    try {
      r = suite(options);
    } catch (const Error& e) {
      r = {name, false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    log << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << secs << " s): " << r.detail << '\n';
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace tpd
