#include "cxhg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "cxhg/error.hpp"

namespace cxhg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw Error(ErrorCode::config, fmt::format("config key '{}': {} (got '{}')", key, what, value));
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected a non-negative integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    bad(key, v, "expected a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, v, "expected true or false");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F item) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(item(key, trim(part)));
  if (out.empty()) bad(key, v, "expected a comma-separated list");
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

struct Key {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CXHG_UINT(name, field)                                                              \
  {                                                                                         \
    name, {                                                                                 \
      [](RunConfig& c, const std::string& k, const std::string& v) {                        \
        c.field = static_cast<decltype(c.field)>(parse_uint(k, v));                         \
      },                                                                                    \
          [](const RunConfig& c) { return std::to_string(c.field); }                        \
    }                                                                                       \
  }
#define CXHG_REAL(name, field)                                                                 \
  {                                                                                            \
    name, {                                                                                    \
      [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_real(k, v); }, \
          [](const RunConfig& c) { return fmt::format("{}", c.field); }                        \
    }                                                                                          \
  }

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table{
      // architecture
      CXHG_UINT("num_modules", arch.num_modules),
      CXHG_UINT("depth", arch.depth),
      {"widths",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.arch.widths = parse_list<std::size_t>(k, v, [](const std::string& kk, const std::string& x) {
            return static_cast<std::size_t>(parse_uint(kk, x));
          });
        },
        [](const RunConfig& c) { return join(c.arch.widths); }}},
      CXHG_UINT("stem_width", arch.stem_width),
      CXHG_UINT("K", arch.num_codewords),
      CXHG_UINT("encoding_divisor", arch.encoding_divisor),
      CXHG_UINT("num_classes", arch.num_classes),
      CXHG_UINT("channels", arch.input_channels),
      CXHG_UINT("patch", arch.patch_size),
      // training
      CXHG_REAL("base_lr", train.base_lr),
      CXHG_REAL("power", train.power),
      CXHG_UINT("epochs_phase1", train.epochs_phase1),
      CXHG_UINT("epochs_phase2", train.epochs_phase2),
      CXHG_UINT("batch", train.batch),
      CXHG_UINT("micro_batch", train.micro_batch),
      CXHG_REAL("se_weight", train.weights.se_weight),
      CXHG_UINT("seed", train.seed),
      {"augment",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.augment = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.train.augment ? "true" : "false"); }}},
      {"absent_classes",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "exclude") {
            c.train.absent = AbsentClassPolicy::exclude;
          } else if (v == "zero") {
            c.train.absent = AbsentClassPolicy::count_as_zero;
          } else {
            bad(k, v, "expected exclude or zero");
          }
        },
        [](const RunConfig& c) {
          return std::string(c.train.absent == AbsentClassPolicy::exclude ? "exclude" : "zero");
        }}},
      // data
      {"dataset_dir",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v.empty()) bad(k, v, "expected a path");
          c.dataset_dir = v;
        },
        [](const RunConfig& c) { return c.dataset_dir; }}},
      CXHG_UINT("tile_width", scene.width),
      CXHG_UINT("tile_height", scene.height),
      CXHG_REAL("noise_sigma", scene.noise_sigma),
      CXHG_REAL("rare_class_rate", scene.rare_class_rate),
      {"densities",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.scene.densities = parse_list<double>(k, v, parse_real);
        },
        [](const RunConfig& c) { return join(c.scene.densities); }}},
  };
  return table;
}

#undef CXHG_UINT
#undef CXHG_REAL

}  // namespace

void RunConfig::validate() const {
  arch.validate();
  scene.validate();
  if (scene.num_classes != arch.num_classes || scene.channels != arch.input_channels) {
    throw Error(ErrorCode::config, "config: scene and architecture disagree on classes/channels");
  }
  if (train.batch == 0) throw Error(ErrorCode::config, "config key 'batch': must be >= 1");
  if (!(train.base_lr > 0.0)) throw Error(ErrorCode::config, "config key 'base_lr': must be > 0");
  if (!(train.weights.se_weight >= 0.0)) {
    throw Error(ErrorCode::config, "config key 'se_weight': must be >= 0");
  }
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::config, fmt::format("config line {}: expected key = value", line_no));
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    auto it = keys().find(key);
    if (it == keys().end()) {
      throw Error(ErrorCode::config, fmt::format("config key '{}': unknown key (line {})", key, line_no));
    }
    it->second.set(c, key, value);
  }
  c.scene.num_classes = c.arch.num_classes;
  c.scene.channels = c.arch.input_channels;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + " = " + key.get(config) + "\n";
  return out;
}

}  // namespace cxhg
