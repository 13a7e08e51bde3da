#include "cil/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "cil/data.hpp"
#include "cil/errors.hpp"
#include "cil/rng.hpp"

namespace cil {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: value for '" + key + "' is not a number: '" +
                      v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config: value for '" + key +
                      "' is not a non-negative integer: '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config: value for '" + key + "' must be on/off, got '" +
                    v + "'");
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value,
               std::size_t line_no) {
  if (key == "dataset") {
    if (value != "blobs" && value != "delimited") {
      throw ConfigError("config: dataset must be blobs|delimited, got '" +
                        value + "'");
    }
    c.dataset = value;
  } else if (key == "blobs.classes") {
    c.blobs_classes = to_uint(key, value);
  } else if (key == "blobs.per_class") {
    c.blobs_per_class = to_uint(key, value);
  } else if (key == "blobs.dim") {
    c.blobs_dim = to_uint(key, value);
  } else if (key == "blobs.separation") {
    c.blobs_separation = to_double(key, value);
  } else if (key == "blobs.noise") {
    c.blobs_noise = to_double(key, value);
  } else if (key == "data.path") {
    c.data_path = value;
  } else if (key == "split.base") {
    c.split_base = to_uint(key, value);
  } else if (key == "split.inc") {
    c.split_inc = to_uint(key, value);
  } else if (key == "schedule.epochs_base") {
    c.schedule.epochs_base = to_uint(key, value);
  } else if (key == "schedule.epochs_inc") {
    c.schedule.epochs_inc = to_uint(key, value);
  } else if (key == "schedule.batch") {
    c.schedule.batch = to_uint(key, value);
    if (c.schedule.batch == 0) throw ConfigError("config: schedule.batch must be positive");
  } else if (key == "schedule.lr0") {
    c.schedule.lr0 = to_double(key, value);
    if (c.schedule.lr0 <= 0) throw ConfigError("config: schedule.lr0 must be positive");
  } else if (key == "schedule.lr0_inc") {
    c.schedule.lr0_inc = to_double(key, value);
    if (c.schedule.lr0_inc < 0) throw ConfigError("config: schedule.lr0_inc must be >= 0");
  } else if (key == "schedule.adapt_lr_scale") {
    c.schedule.adapt_lr_scale = to_double(key, value);
    if (c.schedule.adapt_lr_scale <= 0) throw ConfigError("config: schedule.adapt_lr_scale must be positive");
  } else if (key == "schedule.momentum") {
    c.schedule.momentum = to_double(key, value);
  } else if (key == "schedule.decay_mode") {
    c.schedule.decay_mode = decay_from_string(value);
  } else if (key == "schedule.decay_at") {
    c.schedule.decay_at = to_uint(key, value);
  } else if (key == "schedule.decay_factor") {
    c.schedule.decay_factor = to_double(key, value);
  } else if (key == "schedule.max_grad_norm") {
    c.schedule.max_grad_norm = to_double(key, value);
    if (c.schedule.max_grad_norm < 0) {
      throw ConfigError("config: schedule.max_grad_norm must be >= 0");
    }
  } else if (key == "loss.lambda") {
    c.loss.lambda = to_double(key, value);
    if (c.loss.lambda < 0) throw ConfigError("config: loss.lambda must be >= 0");
  } else if (key == "loss.E_W") {
    c.E_W = to_double(key, value);
    if (c.E_W <= 0) throw ConfigError("config: loss.E_W must be positive");
  } else if (key == "loss.E_Z") {
    c.loss.E_Z = to_double(key, value);
    if (c.loss.E_Z <= 0) throw ConfigError("config: loss.E_Z must be positive");
  } else if (key == "loss.constraint") {
    if (value == "rescale") {
      c.loss.constraint = ConstraintMode::rescale;
    } else if (value == "penalty") {
      c.loss.constraint = ConstraintMode::penalty;
    } else {
      throw ConfigError("config: loss.constraint must be rescale|penalty");
    }
  } else if (key == "wiring") {
    wiring_from_string(value);  // validates
    c.wiring = value;
  } else if (key == "head") {
    head_from_string(value);
    c.head = value;
  } else if (key == "adapt") {
    c.adapt = to_bool(key, value);
  } else if (key == "network.width") {
    c.width = to_uint(key, value);
  } else if (key == "network.etf_dim") {
    c.etf_dim = to_uint(key, value);
  } else if (key == "seed") {
    c.seed = to_uint(key, value);
    c.schedule.seed = c.seed;
  } else {
    throw ConfigError("config: unknown key '" + key + "' (line " +
                      std::to_string(line_no) + ")");
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not 'key = value': '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: empty key on line " + std::to_string(line_no));
    }
    apply_key(cfg, key, value, line_no);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config_text(os.str());
}

std::string normalize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "dataset = " << c.dataset << "\n";
  if (c.dataset == "blobs") {
    os << "blobs.classes = " << c.blobs_classes << "\n";
    os << "blobs.per_class = " << c.blobs_per_class << "\n";
    os << "blobs.dim = " << c.blobs_dim << "\n";
    os << "blobs.separation = " << format_double(c.blobs_separation) << "\n";
    os << "blobs.noise = " << format_double(c.blobs_noise) << "\n";
  } else {
    os << "data.path = " << c.data_path << "\n";
  }
  os << "split.base = " << c.split_base << "\n";
  os << "split.inc = " << c.split_inc << "\n";
  os << "schedule.epochs_base = " << c.schedule.epochs_base << "\n";
  os << "schedule.epochs_inc = " << c.schedule.epochs_inc << "\n";
  os << "schedule.batch = " << c.schedule.batch << "\n";
  os << "schedule.lr0 = " << format_double(c.schedule.lr0) << "\n";
  os << "schedule.lr0_inc = " << format_double(c.schedule.lr0_inc) << "\n";
  os << "schedule.adapt_lr_scale = " << format_double(c.schedule.adapt_lr_scale)
     << "\n";
  os << "schedule.momentum = " << format_double(c.schedule.momentum) << "\n";
  os << "schedule.decay_mode = " << to_string(c.schedule.decay_mode) << "\n";
  os << "schedule.decay_at = " << c.schedule.decay_at << "\n";
  os << "schedule.decay_factor = " << format_double(c.schedule.decay_factor)
     << "\n";
  os << "schedule.max_grad_norm = " << format_double(c.schedule.max_grad_norm)
     << "\n";
  os << "loss.lambda = " << format_double(c.loss.lambda) << "\n";
  os << "loss.E_W = " << format_double(c.E_W) << "\n";
  os << "loss.E_Z = " << format_double(c.loss.E_Z) << "\n";
  os << "loss.constraint = "
     << (c.loss.constraint == ConstraintMode::rescale ? "rescale" : "penalty")
     << "\n";
  os << "wiring = " << c.wiring << "\n";
  os << "head = " << c.head << "\n";
  os << "adapt = " << (c.adapt ? "on" : "off") << "\n";
  os << "network.width = " << c.width << "\n";
  os << "network.etf_dim = " << c.etf_dim << "\n";
  os << "seed = " << c.seed << "\n";
  return os.str();
}

RunReport run_config(const RunConfig& cfg, const RunHooks& hooks) {
  Dataset ds;
  if (cfg.dataset == "blobs") {
    ds = make_blobs(cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_dim,
                    cfg.blobs_separation, cfg.blobs_noise,
                    derive_seed(cfg.seed, 0xDA7A));
  } else {
    if (cfg.data_path.empty()) {
      throw ConfigError("config: data.path required for dataset = delimited");
    }
    ds = load_delimited(cfg.data_path, {}, derive_seed(cfg.seed, 0x5B117));
  }

  TaskStream stream = TaskStream::split_stream(std::move(ds), cfg.split_base,
                                               cfg.split_inc,
                                               derive_seed(cfg.seed, 0x0DDE));

  NetworkConfig net;
  net.input_dim = stream.dataset().dim();
  net.width = cfg.width ? cfg.width : net.input_dim;
  net.wiring = wiring_from_string(cfg.wiring);
  net.head = head_from_string(cfg.head);
  net.use_adapt = cfg.adapt;
  const std::size_t total = stream.total_classes();
  std::size_t d = cfg.etf_dim ? cfg.etf_dim : std::max(2 * net.width, total);
  if (!net.use_adapt && net.head == HeadKind::etf) d = net.width;
  net.head_dim = d;

  ModelState m(net, derive_seed(cfg.seed, 0x30DE1));

  EtfClassifier etf;
  if (net.head == HeadKind::etf) {
    // pre-sized to the final class count: d cannot grow mid-run
    if (d < total) {
      throw CapacityError("config: capacity exceeded, classifier dim " + std::to_string(d) +
                          " cannot hold " + std::to_string(total) + " classes");
    }
    etf = build_etf(stream.task(0).labels.size(), d, cfg.E_W,
                    derive_seed(cfg.seed, 0xE7F0));
  }

  TrainSchedule sched = cfg.schedule;
  sched.seed = cfg.seed;

  RunReport report =
      run_incremental(m, stream, sched, std::move(etf), cfg.loss, hooks);
  report.config_echo = normalize_config(cfg);
  return report;
}

}  // namespace cil
