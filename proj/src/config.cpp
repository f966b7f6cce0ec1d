#include "tpd/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tpd/error.hpp"

namespace tpd {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::Config, "bad numeric value '" + value + "' for " + key);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "bad numeric value '" + value + "' for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "off" || value == "no" || value == "0") return false;
  fail(ErrorKind::Config, "bad boolean '" + value + "' for " + key);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

int RunConfig::steps_per_stage() const {
  if (stages < 1 || sample_steps < stages || sample_steps % stages != 0) {
    fail(ErrorKind::Config, "sample.steps must be a positive multiple of plan.stages");
  }
  return sample_steps / stages;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  auto sz = [&] { return static_cast<std::size_t>(parse_number<std::uint64_t>(key, value)); };
  auto i32 = [&] { return parse_number<int>(key, value); };
  auto i64 = [&] { return parse_number<long>(key, value); };
  auto dbl = [&] { return parse_double(key, value); };
  auto flag = [&] { return parse_bool(key, value); };

  if (key == "run.seed") c.seed = u64();
  else if (key == "schedule.kind") c.schedule = parse_schedule_kind(value);
  else if (key == "schedule.ddim_steps") c.ddim_steps = i32();
  else if (key == "plan.stages") c.stages = i32();
  else if (key == "plan.renoise_corr") c.renoise_corr = dbl();
  else if (key == "data.clips") c.clips = sz();
  else if (key == "data.seed") c.data_seed = u64();
  else if (key == "data.frames") c.clip.frames = sz();
  else if (key == "data.height") c.clip.height = sz();
  else if (key == "data.width") c.clip.width = sz();
  else if (key == "data.channels") c.clip.channels = sz();
  else if (key == "data.motion") c.clip.motion = parse_motion(value);
  else if (key == "data.speed_min") c.clip.speed_min = dbl();
  else if (key == "data.speed_max") c.clip.speed_max = dbl();
  else if (key == "data.intensity_min") c.clip.intensity_min = dbl();
  else if (key == "data.intensity_max") c.clip.intensity_max = dbl();
  else if (key == "data.dump") c.dump_data = flag();
  else if (key == "model.width") c.model.width = sz();
  else if (key == "model.positional") c.model.positional = flag();
  else if (key == "train.batch") c.train.batch_size = sz();
  else if (key == "train.steps") c.train.max_steps = i64();
  else if (key == "train.budget_seconds") c.train.budget_seconds = dbl();
  else if (key == "train.lr") c.train.adam.lr = dbl();
  else if (key == "train.beta1") c.train.adam.beta1 = dbl();
  else if (key == "train.beta2") c.train.adam.beta2 = dbl();
  else if (key == "train.eps") c.train.adam.eps = dbl();
  else if (key == "train.lr_decay") c.train.lr_decay = flag();
  else if (key == "train.lr_floor") c.train.lr_floor = dbl();
  else if (key == "train.endpoint_loss") c.train.endpoint_loss = flag();
  else if (key == "train.align") c.train.align = flag();
  else if (key == "train.eval_every") c.train.eval_every = i64();
  else if (key == "train.threads") c.train.threads = static_cast<unsigned>(u64());
  else if (key == "eval.samples") c.eval_samples = sz();
  else if (key == "sample.steps") c.sample_steps = i32();
  else if (key == "sample.renoise") c.renoise = flag();
  else if (key == "sample.count") c.sample_count = sz();
  else if (key == "sample.checkpoint") c.checkpoint = value;
  else if (key == "sample.snapshots") c.snapshots = flag();
  else if (key == "compare.budget_seconds") c.compare_budget_seconds = dbl();
  else if (key == "compare.budget_steps") c.compare_budget_steps = i64();
  else if (key.rfind("arm.a.", 0) == 0) c.arm_a.emplace_back(key.substr(6), value);
  else if (key.rfind("arm.b.", 0) == 0) c.arm_b.emplace_back(key.substr(6), value);
  else if (key == "verify.renoise_scale_factor") c.verify_renoise_scale_factor = dbl();
  else if (key == "verify.mc_draws") c.verify_mc_draws = i32();
  else fail(ErrorKind::Config, "unknown config key '" + key + "'");

  c.model.pixels = c.clip.channels * c.clip.height * c.clip.width;
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::Config, std::string("config parse error: ") + e.what());
  }
  RunConfig config;
  config.source_text = text;
  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      fail(ErrorKind::Config, "setting '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, leaf] : node) {
      apply_setting(config, section + "." + key, leaf.get_value<std::string>());
    }
  }
  config.model.pixels = config.clip.channels * config.clip.height * config.clip.width;
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const RunConfig& c) {
  if (c.stages < 1) fail(ErrorKind::Config, "plan.stages must be >= 1");
  if (c.stages > 1) {
    const std::size_t coarsest = std::size_t{1} << (c.stages - 1);
    if (c.clip.frames % coarsest != 0) {
      fail(ErrorKind::Config, "data.frames must be divisible by 2^(stages - 1)");
    }
  }
  if (!(c.renoise_corr >= -1.0 && c.renoise_corr <= 0.0)) {
    fail(ErrorKind::Config, "plan.renoise_corr must lie in [-1, 0]");
  }
  if (c.clips < 1) fail(ErrorKind::Config, "data.clips must be >= 1");
  if (c.train.batch_size < 1) fail(ErrorKind::Config, "train.batch must be >= 1");
  if (c.train.max_steps < 0) fail(ErrorKind::Config, "train.steps must be >= 0");
  if (!(c.train.adam.lr > 0.0)) fail(ErrorKind::Config, "train.lr must be positive");
  if (!(c.train.lr_floor >= 0.0 && c.train.lr_floor <= 1.0)) {
    fail(ErrorKind::Config, "train.lr_floor must lie in [0, 1]");
  }
  if (c.eval_samples < 1) fail(ErrorKind::Config, "eval.samples must be >= 1");
  if (c.ddim_steps < 1) fail(ErrorKind::Config, "schedule.ddim_steps must be >= 1");
  if (c.model.width < 2 || c.model.width % 2 != 0) {
    fail(ErrorKind::Config, "model.width must be even and >= 2");
  }
  (void)c.steps_per_stage();
  tpd::validate(c.clip);
}

std::string describe(const RunConfig& c) {
  std::ostringstream os;
  os << "run.seed=" << c.seed << '\n'
     << "schedule.kind=" << to_string(c.schedule) << '\n'
     << "schedule.ddim_steps=" << c.ddim_steps << '\n'
     << "plan.stages=" << c.stages << '\n'
     << "plan.renoise_corr=" << c.renoise_corr << '\n'
     << "data.clips=" << c.clips << '\n'
     << "data.seed=" << c.data_seed << '\n'
     << "data.frames=" << c.clip.frames << '\n'
     << "data.channels=" << c.clip.channels << '\n'
     << "data.height=" << c.clip.height << '\n'
     << "data.width=" << c.clip.width << '\n'
     << "data.motion=" << to_string(c.clip.motion) << '\n'
     << "model.width=" << c.model.width << '\n'
     << "model.positional=" << (c.model.positional ? "true" : "false") << '\n'
     << "train.batch=" << c.train.batch_size << '\n'
     << "train.steps=" << c.train.max_steps << '\n'
     << "train.budget_seconds=" << c.train.budget_seconds << '\n'
     << "train.lr=" << c.train.adam.lr << '\n'
     << "train.lr_decay=" << (c.train.lr_decay ? "true" : "false") << '\n'
     << "train.lr_floor=" << c.train.lr_floor << '\n'
     << "train.endpoint_loss=" << (c.train.endpoint_loss ? "true" : "false") << '\n'
     << "train.align=" << (c.train.align ? "true" : "false") << '\n'
     << "train.threads=" << c.train.threads << '\n'
     << "sample.steps=" << c.sample_steps << '\n'
     << "sample.renoise=" << (c.renoise ? "true" : "false") << '\n'
     << "eval.samples=" << c.eval_samples << '\n';
  return os.str();
}

}  // namespace tpd
