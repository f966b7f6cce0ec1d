#include "tpd/tpd.h"

#include <exception>
#include <optional>
#include <sstream>
#include <streambuf>
#include <string>

#include "tpd/alignment.hpp"
#include "tpd/config.hpp"
#include "tpd/error.hpp"
#include "tpd/harness.hpp"
#include "tpd/metrics.hpp"
#include "tpd/sampler.hpp"
#include "tpd/schedule.hpp"
#include "tpd/stagewise.hpp"

struct tpd_config {
  tpd::RunConfig value;
};
struct tpd_schedule {
  tpd::Schedule value;
};
struct tpd_plan {
  tpd::StagePlan value;
};

namespace {

thread_local std::string g_last_error;

tpd_status set_error(tpd_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
tpd_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TPD_OK;
  } catch (const tpd::Error& e) {
    return set_error(static_cast<tpd_status>(tpd::exit_code_for(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(TPD_ERR_FAILURE, "out of memory");
  } catch (const std::exception& e) {
    return set_error(TPD_ERR_FAILURE, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) tpd::fail(tpd::ErrorKind::Input, what);
}

// Forwards complete lines to the caller's log callback.
class LineBuf : public std::streambuf {
 public:
  LineBuf(tpd_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineBuf() override { flush_line(); }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return traits_type::not_eof(ch);
    if (ch == '\n') {
      flush_line();
    } else {
      line_.push_back(static_cast<char>(ch));
    }
    return ch;
  }

 private:
  void flush_line() {
    if (fn_ != nullptr && !line_.empty()) fn_(line_.c_str(), user_);
    line_.clear();
  }
  tpd_log_fn fn_;
  void* user_;
  std::string line_;
};

}  // namespace

extern "C" {

const char* tpd_version(void) { return tpd::version_string(); }

const char* tpd_last_error(void) { return g_last_error.c_str(); }

tpd_status tpd_config_default(tpd_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new tpd_config{};
  });
}

tpd_status tpd_config_load(const char* path, tpd_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new tpd_config{tpd::load_config(path)};
  });
}

tpd_status tpd_config_parse(const char* text, tpd_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "null argument");
    *out = new tpd_config{tpd::parse_config(text)};
  });
}

tpd_status tpd_config_set(tpd_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr, "null argument");
    tpd::apply_setting(config->value, key, value);
  });
}

void tpd_config_free(tpd_config* config) { delete config; }

tpd_status tpd_run(const char* command, const tpd_config* config, const char* out_dir,
                   const uint64_t* seed, tpd_log_fn log, void* user) {
  if (command == nullptr || config == nullptr || out_dir == nullptr) {
    return set_error(TPD_ERR_CONFIG, "null argument");
  }
  LineBuf buf(log, user);
  std::ostream stream(&buf);
  std::string error;
  std::optional<std::uint64_t> seed_override;
  if (seed != nullptr) seed_override = *seed;
  const int code = tpd::run_command(command, config->value, out_dir, seed_override, stream, &error);
  g_last_error = error;
  return static_cast<tpd_status>(code);
}

tpd_status tpd_schedule_create(tpd_schedule_kind kind, int ddim_steps, tpd_schedule** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    if (kind == TPD_SCHEDULE_FLOW_MATCHING) {
      *out = new tpd_schedule{tpd::Schedule::flow_matching()};
    } else if (kind == TPD_SCHEDULE_DDIM) {
      *out = new tpd_schedule{tpd::Schedule::ddim_linear(ddim_steps)};
    } else {
      tpd::fail(tpd::ErrorKind::Input, "unknown schedule kind");
    }
  });
}

void tpd_schedule_free(tpd_schedule* schedule) { delete schedule; }

tpd_status tpd_schedule_gamma_sigma(const tpd_schedule* schedule, double t, double* gamma,
                                    double* sigma) {
  return guarded([&] {
    require(schedule != nullptr && gamma != nullptr && sigma != nullptr, "null argument");
    const auto c = schedule->value.coefficients(t);
    *gamma = c.gamma;
    *sigma = c.sigma;
  });
}

tpd_status tpd_schedule_log_snr(const tpd_schedule* schedule, double t, double* lambda) {
  return guarded([&] {
    require(schedule != nullptr && lambda != nullptr, "null argument");
    *lambda = schedule->value.log_snr(t);
  });
}

tpd_status tpd_plan_create(const tpd_schedule* schedule, int stages, double renoise_corr,
                           tpd_plan** out) {
  return guarded([&] {
    require(schedule != nullptr && out != nullptr, "null argument");
    *out = new tpd_plan{tpd::StagePlan::uniform(schedule->value, stages, renoise_corr)};
  });
}

void tpd_plan_free(tpd_plan* plan) { delete plan; }

int tpd_plan_stage_count(const tpd_plan* plan) { return plan == nullptr ? 0 : plan->value.count(); }

tpd_status tpd_plan_stage(const tpd_plan* plan, int k, double* start, double* end,
                          size_t* down_factor) {
  return guarded([&] {
    require(plan != nullptr && start != nullptr && end != nullptr && down_factor != nullptr,
            "null argument");
    const auto& s = plan->value.stage(k);
    *start = s.start;
    *end = s.end;
    *down_factor = s.down_factor;
  });
}

tpd_status tpd_renoise_params(const tpd_schedule* schedule, const tpd_plan* plan, int k,
                              double* leave_gamma, double* scale, double* noise_weight) {
  return guarded([&] {
    require(schedule != nullptr && plan != nullptr && leave_gamma != nullptr && scale != nullptr &&
                noise_weight != nullptr,
            "null argument");
    const auto p = tpd::renoise_params(schedule->value, plan->value, k);
    *leave_gamma = p.leave_gamma;
    *scale = p.scale;
    *noise_weight = p.noise_weight;
  });
}

tpd_status tpd_attention_cost(int stages, size_t full_frames, int steps_per_stage, double* ratio) {
  return guarded([&] {
    require(ratio != nullptr, "null argument");
    *ratio = tpd::attention_cost_accounting(stages, full_frames, steps_per_stage).ratio;
  });
}

tpd_status tpd_linear_sum_assignment(const double* cost, size_t n, size_t* perm,
                                     double* total_cost) {
  return guarded([&] {
    require((cost != nullptr && perm != nullptr) || n == 0, "null argument");
    require(total_cost != nullptr, "null argument");
    tpd::CostMatrix m;
    m.n = n;
    m.values.assign(cost, cost + n * n);
    const auto r = tpd::linear_sum_assignment(m);
    for (size_t i = 0; i < n; ++i) perm[i] = r.permutation[i];
    *total_cost = r.total_cost;
  });
}

tpd_status tpd_energy_distance(const double* a, size_t count_a, const double* b, size_t count_b,
                               size_t dim, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "null argument");
    require(dim > 0, "dimension must be positive");
    auto pack = [dim](const double* p, size_t n) {
      std::vector<tpd::VideoTensor> set;
      for (size_t i = 0; i < n; ++i) {
        set.emplace_back(tpd::VideoShape{1, 1, 1, dim}, std::vector<double>(p + i * dim, p + (i + 1) * dim));
      }
      return set;
    };
    *out = tpd::energy_distance(pack(a, count_a), pack(b, count_b));
  });
}

}  // extern "C"
