#include "tpd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tpd/error.hpp"

namespace tpd {

const char* to_string(ScheduleKind kind) {
  return kind == ScheduleKind::DDIM ? "ddim" : "fm";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "ddim" || name == "DDIM") return ScheduleKind::DDIM;
  if (name == "fm" || name == "flow_matching" || name == "FlowMatching") {
    return ScheduleKind::FlowMatching;
  }
  fail(ErrorKind::Config, "unknown schedule kind '" + name + "'");
}

Schedule Schedule::flow_matching() { return Schedule(ScheduleKind::FlowMatching, {}); }

Schedule Schedule::ddim_linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) fail(ErrorKind::Domain, "ddim schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    fail(ErrorKind::Domain, "ddim betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> log_ab(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int i = 1; i <= steps; ++i) {
    double frac = steps == 1 ? 0.0 : static_cast<double>(i - 1) / (steps - 1);
    double beta = beta_start + (beta_end - beta_start) * frac;
    log_ab[i] = log_ab[i - 1] + std::log1p(-beta);
  }
  if (std::exp(log_ab.back()) > 1e-4) {
    fail(ErrorKind::Domain, "ddim schedule does not reach alphabar_T <= 1e-4");
  }
  return Schedule(ScheduleKind::DDIM, std::move(log_ab));
}

Schedule Schedule::ddim_from_alphabar(std::vector<double> alphabar) {
  if (alphabar.size() < 2) fail(ErrorKind::Domain, "alphabar table needs at least two entries");
  if (alphabar.front() != 1.0) fail(ErrorKind::Domain, "alphabar[0] must be 1");
  for (std::size_t i = 1; i < alphabar.size(); ++i) {
    if (!(alphabar[i] > 0.0 && alphabar[i] < alphabar[i - 1])) {
      fail(ErrorKind::Domain, "alphabar must be strictly decreasing and positive");
    }
  }
  if (alphabar.back() > 1e-4) fail(ErrorKind::Domain, "alphabar_T must be <= 1e-4");
  std::vector<double> log_ab(alphabar.size());
  std::transform(alphabar.begin(), alphabar.end(), log_ab.begin(),
                 [](double a) { return std::log(a); });
  log_ab.front() = 0.0;
  return Schedule(ScheduleKind::DDIM, std::move(log_ab));
}

double Schedule::alphabar(int index) const {
  if (kind_ != ScheduleKind::DDIM) fail(ErrorKind::Domain, "alphabar is only defined for DDIM");
  if (index < 0 || index > grid_steps()) fail(ErrorKind::Domain, "alphabar index out of range");
  return alphabar_[static_cast<std::size_t>(index)];
}

Coefficients Schedule::coefficients(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "time " << t << " outside [0, 1]";
    fail(ErrorKind::Domain, msg.str());
  }
  if (kind_ == ScheduleKind::FlowMatching) return {1.0 - t, t};

  const int steps = grid_steps();
  const double pos = t * steps;
  const int lo = std::min(static_cast<int>(std::floor(pos)), steps);
  const double frac = pos - lo;
  const auto i = static_cast<std::size_t>(lo);
  const double log_ab = (lo == steps || frac == 0.0)
                            ? log_alphabar_[i]
                            : (1.0 - frac) * log_alphabar_[i] + frac * log_alphabar_[i + 1];
  return {std::exp(0.5 * log_ab), std::sqrt(-std::expm1(log_ab))};
}

double Schedule::log_snr(double t) const {
  if (!(t > 0.0 && t < 1.0)) fail(ErrorKind::Domain, "log-SNR needs strictly interior time");
  auto [g, s] = coefficients(t);
  if (s < kSigmaFloor || g < kSigmaFloor) {
    fail(ErrorKind::Endpoint, "log-SNR singular near schedule endpoint");
  }
  return std::log(g / s);
}

double Schedule::time_at_log_snr(double lambda) const {
  if (!std::isfinite(lambda)) fail(ErrorKind::Domain, "log-SNR must be finite");
  if (kind_ == ScheduleKind::FlowMatching) {
    // gamma / sigma = (1 - t) / t = e^lambda
    return 1.0 / (1.0 + std::exp(lambda));
  }
  // lambda is strictly decreasing in t; bisection on the interior.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= 0.0 || mid >= 1.0) break;
    auto [g, s] = coefficients(mid);
    double lm = std::log(g / s);
    if (lm > lambda) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double Schedule::snap(double t) const {
  if (kind_ == ScheduleKind::FlowMatching) return t;
  const int steps = grid_steps();
  return std::round(t * steps) / steps;
}

Coefficients gamma_sigma(const Schedule& schedule, double t) { return schedule.coefficients(t); }

double log_snr(const Schedule& schedule, double t) { return schedule.log_snr(t); }

VideoTensor forward_diffuse(const Schedule& schedule, const VideoTensor& x0,
                            const VideoTensor& eps, double t) {
  require_same_shape(x0, eps, "forward_diffuse");
  auto [g, s] = schedule.coefficients(t);
  return lincomb(g, x0, s, eps);
}

}  // namespace tpd
