#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpd/sampler.hpp"
#include "tpd/schedule.hpp"
#include "tpd/stagewise.hpp"
#include "tpd/video.hpp"

namespace tpd {

class Dataset;

struct ModelConfig {
  std::size_t pixels = 64;  // C * H * W of one frame
  std::size_t width = 32;
  bool positional = true;   // sinusoidal frame-position encoding
};

/// Named slice of the flat parameter vector.
struct ParamView {
  std::string name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
  std::size_t size() const { return rows * cols; }
};

/// Minimal per-frame MLP with one single-head temporal self-attention block:
///
///   E   = X W_in + b_in + temb(t) W_t + pos
///   H   = tanh(E + softmax(E W_q (E W_k)^T / sqrt(d)) E W_v)
///   out = H W_out + b_out + (temb(t) . w_skip + b_skip) X
///
/// Frames are tokens, so the same parameters run any frame count and the only
/// cross-frame path costs O(F^2).
class ToyDenoiser {
 public:
  /// Activations kept for backward.
  struct Cache {
    std::vector<double> x, e, q, k, v, attn, h, temb;
    double skip_gain = 0.0;
    std::size_t frames = 0;
    double t = 0.0;
  };

  ToyDenoiser(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<ParamView>& views() const { return views_; }

  VideoTensor forward(const VideoTensor& x, double t) const;
  VideoTensor forward(const VideoTensor& x, double t, Cache& cache) const;

  /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
  void backward(const Cache& cache, const VideoTensor& grad_out, std::span<double> grads) const;

  std::vector<double> time_embedding(double t) const;

 private:
  const ParamView& view(std::string_view name) const;

  ModelConfig config_;
  std::vector<double> params_;
  std::vector<ParamView> views_;
};

/// Parameter gradients of <grad_out, forward(x, t)>.
std::vector<double> backward(const ToyDenoiser& model, const VideoTensor& x, double t,
                             const VideoTensor& grad_out);

/// Sampler-facing denoiser: the network output is read as the stage-end
/// latent and mapped to the stage target with target_parameterization. The
/// stage comes from the input's stride level. Holds references to all three
/// arguments.
Denoiser stage_denoiser(const ToyDenoiser& model, const Schedule& schedule, const StagePlan& plan);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  std::vector<double> loss_history;

  explicit TrainState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, TrainState& state, std::span<const double> grads,
               const AdamConfig& config);

struct TrainConfig {
  std::size_t batch_size = 32;
  long max_steps = 1000;
  /// Stop once training wall time reaches this many seconds; 0 disables.
  double budget_seconds = 0.0;
  AdamConfig adam{};
  /// Cosine decay of the learning rate to `lr_floor * lr` over the run, where
  /// progress is the larger of the step and wall-clock fractions.
  bool lr_decay = true;
  double lr_floor = 0.01;
  /// Weight each example's stage-target MSE by 1 / out^2 of its target
  /// parameterization, which equals MSE on the stage-end latent.
  bool endpoint_loss = true;
  bool align = true;
  std::uint64_t seed = 0;
  /// Hook cadence in steps; 0 disables the hook.
  long eval_every = 0;
  unsigned threads = 1;
};

struct TrainLog {
  std::vector<double> loss;
  std::vector<double> wall_seconds;
  std::vector<int> stage_counts;             // draws per stage, index k - 1
  std::uint64_t attention_pairs = 0;         // sum over examples of F_k^2
  std::uint64_t full_rate_attention_pairs = 0;  // same examples at full rate
  std::uint64_t tokens = 0;
  std::uint64_t full_rate_tokens = 0;
  long steps = 0;
  double train_seconds = 0.0;

  double attention_pair_ratio() const;
  double token_ratio() const;
};

/// Called every `eval_every` steps with (step, training seconds, loss). Time
/// spent inside the hook is excluded from the training clock.
using TrainHook = std::function<void(long step, double wall_seconds, double loss)>;

/// Stage-wise training loop: batch assembly, MSE against the stage target,
/// backward and Adam. Throws Numerical on a non-finite loss.
TrainLog train(ToyDenoiser& model, TrainState& state, const Dataset& dataset,
               const Schedule& schedule, const StagePlan& plan, const TrainConfig& config,
               const TrainHook& hook = {});

/// MSE loss and its gradient w.r.t. the prediction.
double mse_loss(const VideoTensor& prediction, const VideoTensor& target, VideoTensor* grad,
                double grad_scale);

}  // namespace tpd
