#include "tpd/toymodel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "tpd/error.hpp"
#include "tpd/synthdata.hpp"

namespace tpd {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const Mat>;
using MapM = Eigen::Map<Mat>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

MapC cmap(const double* p, std::size_t rows, std::size_t cols) {
  return MapC(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapM mmap(double* p, std::size_t rows, std::size_t cols) {
  return MapM(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

ToyDenoiser::ToyDenoiser(ModelConfig config, std::uint64_t seed) : config_(config) {
  if (config.pixels == 0 || config.width == 0 || config.width % 2 != 0) {
    fail(ErrorKind::Config, "model needs pixels > 0 and an even width");
  }
  const std::size_t P = config.pixels, d = config.width;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    views_.push_back({std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  add("W_in", P, d);
  add("b_in", 1, d);
  add("W_t", d, d);
  add("W_q", d, d);
  add("W_k", d, d);
  add("W_v", d, d);
  add("W_out", d, P);
  add("b_out", 1, P);
  add("w_skip", 1, d);
  add("b_skip", 1, 1);
  params_.assign(offset, 0.0);

  // Fan-in scaled uniform init; output head and skip gate start at zero.
  Rng rng(seed);
  for (const auto& v : views_) {
    const bool weight = v.name == "W_in" || v.name == "W_t" || v.name == "W_q" ||
                        v.name == "W_k" || v.name == "W_v";
    if (!weight) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(v.rows));
    for (std::size_t i = 0; i < v.size(); ++i) params_[v.offset + i] = rng.uniform(-bound, bound);
  }
}

const ParamView& ToyDenoiser::view(std::string_view name) const {
  for (const auto& v : views_) {
    if (v.name == name) return v;
  }
  fail(ErrorKind::Input, "unknown parameter " + std::string(name));
}

std::vector<double> ToyDenoiser::time_embedding(double t) const {
  const std::size_t half = config_.width / 2;
  std::vector<double> emb(config_.width);
  for (std::size_t j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(j) / half);
    emb[j] = std::sin(1000.0 * t * freq);
    emb[half + j] = std::cos(1000.0 * t * freq);
  }
  return emb;
}

VideoTensor ToyDenoiser::forward(const VideoTensor& x, double t) const {
  Cache cache;
  return forward(x, t, cache);
}

VideoTensor ToyDenoiser::forward(const VideoTensor& x, double t, Cache& c) const {
  const std::size_t P = config_.pixels, d = config_.width, F = x.frames();
  if (x.frame_size() != P) fail(ErrorKind::Shape, "model input frame size mismatch");
  const double* p = params_.data();
  auto W = [&](std::string_view n) {
    const auto& v = view(n);
    return cmap(p + v.offset, v.rows, v.cols);
  };

  c.frames = F;
  c.t = t;
  c.x.assign(x.data().begin(), x.data().end());
  c.temb = time_embedding(t);
  c.e.assign(F * d, 0.0);
  c.q.assign(F * d, 0.0);
  c.k.assign(F * d, 0.0);
  c.v.assign(F * d, 0.0);
  c.attn.assign(F * F, 0.0);
  c.h.assign(F * d, 0.0);

  auto X = cmap(c.x.data(), F, P);
  auto temb = cmap(c.temb.data(), 1, d);
  auto E = mmap(c.e.data(), F, d);
  RowVec frame_bias = W("b_in") + temb * W("W_t");
  E = X * W("W_in");
  E.rowwise() += frame_bias;
  if (config_.positional) {
    const std::size_t half = d / 2;
    for (std::size_t f = 0; f < F; ++f) {
      const double pos = static_cast<double>(f) / F;
      for (std::size_t j = 0; j < half; ++j) {
        const double w = std::numbers::pi * static_cast<double>(j + 1);
        E(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) += std::sin(w * pos);
        E(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(half + j)) += std::cos(w * pos);
      }
    }
  }

  auto Q = mmap(c.q.data(), F, d);
  auto K = mmap(c.k.data(), F, d);
  auto V = mmap(c.v.data(), F, d);
  Q = E * W("W_q");
  K = E * W("W_k");
  V = E * W("W_v");

  auto A = mmap(c.attn.data(), F, F);
  A = (Q * K.transpose()) / std::sqrt(static_cast<double>(d));
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double m = A.row(r).maxCoeff();
    A.row(r) = (A.row(r).array() - m).exp();
    A.row(r) /= A.row(r).sum();
  }

  auto H = mmap(c.h.data(), F, d);
  H = (E + A * V).array().tanh();

  c.skip_gain = (temb * W("w_skip").transpose())(0, 0) + W("b_skip")(0, 0);

  VideoTensor out(x.shape(), x.stride_level());
  auto Out = mmap(out.data().data(), F, P);
  Out = H * W("W_out");
  Out.rowwise() += RowVec(W("b_out"));
  Out += c.skip_gain * X;
  return out;
}

void ToyDenoiser::backward(const Cache& c, const VideoTensor& grad_out,
                           std::span<double> grads) const {
  const std::size_t P = config_.pixels, d = config_.width, F = c.frames;
  if (grad_out.frames() != F || grad_out.frame_size() != P) {
    fail(ErrorKind::Shape, "grad_out shape does not match the cached forward");
  }
  if (grads.size() != params_.size()) fail(ErrorKind::Shape, "gradient buffer size mismatch");
  const double* p = params_.data();
  auto W = [&](std::string_view n) {
    const auto& v = view(n);
    return cmap(p + v.offset, v.rows, v.cols);
  };
  auto dW = [&](std::string_view n) {
    const auto& v = view(n);
    return mmap(grads.data() + v.offset, v.rows, v.cols);
  };

  auto G = cmap(grad_out.data().data(), F, P);
  auto X = cmap(c.x.data(), F, P);
  auto temb = cmap(c.temb.data(), 1, d);
  auto E = cmap(c.e.data(), F, d);
  auto Q = cmap(c.q.data(), F, d);
  auto K = cmap(c.k.data(), F, d);
  auto V = cmap(c.v.data(), F, d);
  auto A = cmap(c.attn.data(), F, F);
  auto H = cmap(c.h.data(), F, d);

  dW("W_out") += H.transpose() * G;
  dW("b_out") += G.colwise().sum();
  const double d_gain = (G.array() * X.array()).sum();
  dW("w_skip") += d_gain * temb;
  dW("b_skip")(0, 0) += d_gain;

  Mat dZ = ((G * W("W_out").transpose()).array() * (1.0 - H.array().square())).matrix();
  Mat dA = dZ * V.transpose();
  Mat dV = A.transpose() * dZ;
  Mat dS = A.array() * (dA.array().colwise() - (dA.array() * A.array()).rowwise().sum());
  dS /= std::sqrt(static_cast<double>(d));
  Mat dQ = dS * K;
  Mat dK = dS.transpose() * Q;

  dW("W_q") += E.transpose() * dQ;
  dW("W_k") += E.transpose() * dK;
  dW("W_v") += E.transpose() * dV;

  Mat dE = dZ + dQ * W("W_q").transpose() + dK * W("W_k").transpose() + dV * W("W_v").transpose();
  dW("W_in") += X.transpose() * dE;
  RowVec dbias = dE.colwise().sum();
  dW("b_in") += dbias;
  dW("W_t") += temb.transpose() * dbias;
}

std::vector<double> backward(const ToyDenoiser& model, const VideoTensor& x, double t,
                             const VideoTensor& grad_out) {
  ToyDenoiser::Cache cache;
  model.forward(x, t, cache);
  std::vector<double> grads(model.param_count(), 0.0);
  model.backward(cache, grad_out, grads);
  return grads;
}

void adam_step(std::span<double> params, TrainState& state, std::span<const double> grads,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    fail(ErrorKind::Shape, "adam_step: parameter, gradient and moment sizes differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

double mse_loss(const VideoTensor& prediction, const VideoTensor& target, VideoTensor* grad,
                double grad_scale) {
  require_same_shape(prediction, target, "mse_loss");
  double acc = 0.0;
  if (grad != nullptr) *grad = VideoTensor(prediction.shape(), prediction.stride_level());
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double r = prediction[i] - target[i];
    acc += r * r;
    if (grad != nullptr) (*grad)[i] = 2.0 * r * grad_scale;
  }
  return acc / static_cast<double>(prediction.size());
}

double TrainLog::attention_pair_ratio() const {
  return full_rate_attention_pairs == 0
             ? 1.0
             : static_cast<double>(attention_pairs) / static_cast<double>(full_rate_attention_pairs);
}

double TrainLog::token_ratio() const {
  return full_rate_tokens == 0 ? 1.0
                               : static_cast<double>(tokens) / static_cast<double>(full_rate_tokens);
}

Denoiser stage_denoiser(const ToyDenoiser& model, const Schedule& schedule, const StagePlan& plan) {
  return [&model, &schedule, &plan](const VideoTensor& x, double t) {
    const int k = x.stride_level() + 1;
    const auto link = target_parameterization(schedule, plan.stage(k), t);
    return lincomb(link.skip, x, link.out, model.forward(x, t));
  };
}

TrainLog train(ToyDenoiser& model, TrainState& state, const Dataset& dataset,
               const Schedule& schedule, const StagePlan& plan, const TrainConfig& config,
               const TrainHook& hook) {
  using Clock = std::chrono::steady_clock;
  if (config.batch_size == 0) fail(ErrorKind::Config, "batch size must be positive");
  const auto& pool = dataset.train_indices();
  if (pool.empty()) fail(ErrorKind::Config, "training split is empty");
  if (state.m.size() != model.param_count()) state = TrainState(model.param_count());

  Rng root(config.seed);
  Rng data_rng = root.split(1);
  Rng noise_rng = root.split(2);

  TrainLog log;
  log.stage_counts.assign(static_cast<std::size_t>(plan.count()), 0);
  const std::size_t B = config.batch_size;
  const std::size_t n_params = model.param_count();
  std::vector<double> per_sample(B * n_params);
  std::vector<double> grads(n_params);
  std::vector<double> losses(B);
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(B)));

  double elapsed = 0.0;
  std::vector<VideoTensor> x0s;
  while (log.steps < config.max_steps &&
         (config.budget_seconds <= 0.0 || elapsed < config.budget_seconds)) {
    const auto t0 = Clock::now();
    x0s.clear();
    for (std::size_t b = 0; b < B; ++b) {
      const auto pick = static_cast<std::size_t>(
          data_rng.uniform_int(0, static_cast<int>(pool.size()) - 1));
      x0s.push_back(dataset.clip(pool[pick]));
    }
    auto batch = make_training_batch(schedule, plan, x0s, noise_rng, {config.align});

    std::fill(per_sample.begin(), per_sample.end(), 0.0);
    auto work = [&](std::size_t first, std::size_t stride) {
      ToyDenoiser::Cache cache;
      VideoTensor grad_out;
      for (std::size_t b = first; b < B; b += stride) {
        const auto& s = batch[b];
        const auto link = target_parameterization(schedule, plan.stage(s.k), s.t);
        VideoTensor pred = lincomb(link.skip, s.x_t, link.out, model.forward(s.x_t, s.t, cache));
        const double weight = config.endpoint_loss ? 1.0 / (link.out * link.out) : 1.0;
        losses[b] = weight * mse_loss(pred, s.target, &grad_out,
                                      weight * link.out /
                                          (static_cast<double>(pred.size()) * static_cast<double>(B)));
        model.backward(cache, grad_out,
                       std::span<double>(per_sample).subspan(b * n_params, n_params));
      }
    };
    if (threads == 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool_threads;
      for (unsigned w = 0; w < threads; ++w) pool_threads.emplace_back(work, w, threads);
    }

    // Fixed reduction order keeps results independent of the thread count.
    std::fill(grads.begin(), grads.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      loss += losses[b];
      const double* g = per_sample.data() + b * n_params;
      for (std::size_t i = 0; i < n_params; ++i) grads[i] += g[i];
    }
    loss /= static_cast<double>(B);
    if (!std::isfinite(loss)) {
      fail(ErrorKind::Numerical, "non-finite loss at step " + std::to_string(log.steps + 1));
    }
    AdamConfig adam = config.adam;
    if (config.lr_decay) {
      double progress = static_cast<double>(log.steps) / static_cast<double>(config.max_steps);
      if (config.budget_seconds > 0.0) progress = std::max(progress, elapsed / config.budget_seconds);
      progress = std::clamp(progress, 0.0, 1.0);
      const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      adam.lr *= config.lr_floor + (1.0 - config.lr_floor) * cosine;
    }
    adam_step(model.params(), state, grads, adam);

    for (const auto& s : batch) {
      const std::uint64_t f = s.x_t.frames();
      const std::uint64_t full = f * plan.stage(s.k).down_factor;
      log.tokens += f;
      log.full_rate_tokens += full;
      log.attention_pairs += f * f;
      log.full_rate_attention_pairs += full * full;
      ++log.stage_counts[static_cast<std::size_t>(s.k) - 1];
    }
    ++log.steps;
    elapsed += std::chrono::duration<double>(Clock::now() - t0).count();
    log.loss.push_back(loss);
    log.wall_seconds.push_back(elapsed);
    state.loss_history.push_back(loss);

    if (hook && config.eval_every > 0 && log.steps % config.eval_every == 0) {
      hook(log.steps, elapsed, loss);
    }
  }
  log.train_seconds = elapsed;
  return log;
}

}  // namespace tpd
