#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "drm/cli/config.hpp"

namespace drm::cli {

// Each command returns a process exit status: 0 success, 1 usage, 2 I/O,
// 3 schema, 4 judge, 5 validation. `stdin_`/`stdout_` stand in for the "-"
// paths; diagnostics and summaries go to `log`.
struct Streams {
  std::istream& stdin_;
  std::ostream& stdout_;
  std::ostream& log;
};

int cmd_score(const RunConfig& cfg, Streams io);
int cmd_build_pairs(const RunConfig& cfg, Streams io);
int cmd_advantages(const RunConfig& cfg, Streams io);
int cmd_grid_search(const RunConfig& cfg, Streams io);
int cmd_eval_select(const RunConfig& cfg, Streams io);

/// Parses `args` (without the program name) and dispatches.
int run_cli(const std::vector<std::string>& args, Streams io);

}  // namespace drm::cli
