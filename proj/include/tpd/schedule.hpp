#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tpd/video.hpp"

namespace tpd {

enum class ScheduleKind { DDIM, FlowMatching };

const char* to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

/// Coefficients of x_t = gamma * x0 + sigma * eps.
struct Coefficients {
  double gamma;
  double sigma;
};

/// Noise schedule on normalised time t in [0, 1]; t = 0 is clean data and
/// t = 1 is pure noise.
///
/// Flow matching uses gamma = 1 - t, sigma = t. DDIM holds a discrete
/// cumulative product alphabar_i on the grid t = i / T with alphabar_0 = 1;
/// between grid points log alphabar is interpolated linearly, which keeps the
/// coefficients exact on the grid and strictly monotone in between.
class Schedule {
 public:
  static Schedule flow_matching();

  /// Linear-beta DDIM schedule: beta_i evenly spaced in [beta_start, beta_end]
  /// for i = 1..steps.
  static Schedule ddim_linear(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);

  /// DDIM schedule from an explicit table alphabar[0..T]. Requires
  /// alphabar[0] == 1, strictly decreasing values in (0, 1] and
  /// alphabar[T] <= 1e-4.
  static Schedule ddim_from_alphabar(std::vector<double> alphabar);

  ScheduleKind kind() const { return kind_; }

  /// Number of DDIM grid intervals T; 0 for flow matching.
  int grid_steps() const { return static_cast<int>(alphabar_.size()) - 1; }

  double alphabar(int index) const;

  /// (gamma_t, sigma_t). Throws Domain for t outside [0, 1].
  Coefficients coefficients(double t) const;

  /// lambda_t = ln(gamma_t / sigma_t) for interior t.
  double log_snr(double t) const;

  /// Inverse of log_snr on (0, 1).
  double time_at_log_snr(double lambda) const;

  /// DDIM: nearest grid time i / T. Flow matching: t unchanged.
  double snap(double t) const;

 private:
  Schedule(ScheduleKind kind, std::vector<double> log_alphabar)
      : kind_(kind), log_alphabar_(std::move(log_alphabar)) {
    alphabar_.reserve(log_alphabar_.size());
    for (double la : log_alphabar_) alphabar_.push_back(std::exp(la));
  }

  ScheduleKind kind_;
  std::vector<double> log_alphabar_;
  std::vector<double> alphabar_;
};

/// Floor on sigma below which log_snr is treated as singular.
inline constexpr double kSigmaFloor = 1e-8;

Coefficients gamma_sigma(const Schedule& schedule, double t);
double log_snr(const Schedule& schedule, double t);

/// gamma_t * x0 + sigma_t * eps.
VideoTensor forward_diffuse(const Schedule& schedule, const VideoTensor& x0,
                            const VideoTensor& eps, double t);

}  // namespace tpd
