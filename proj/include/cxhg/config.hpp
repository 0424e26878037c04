#pragma once

#include <string>

#include "cxhg/hourglass.hpp"
#include "cxhg/synth.hpp"
#include "cxhg/trainer.hpp"

namespace cxhg {

/// Everything a run needs. Parsed from `key = value` lines; `#` starts a
/// comment. Unknown keys and malformed values are rejected with an
/// Error(config) that names the key.
struct RunConfig {
  HourglassConfig arch;
  TrainConfig train;
  SceneSpec scene;
  std::string dataset_dir = "data";

  void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Every key with its value in `config`, one per line; feeding the result back
/// to parse_run_config reproduces `config`.
std::string format_run_config(const RunConfig& config);

}  // namespace cxhg
