#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "spectgnn_cli/run_config.hpp"

namespace spectgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Full command line without the program name, e.g. {"train", "--seed", "3"}.
/// Diagnostics and the resolved configuration go to `log`. Returns the exit
/// status: 0 success, 1 runtime failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& log);

int cmd_synth(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& log);
int cmd_predict(const RunConfig& cfg, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& log);
int cmd_ksweep(const RunConfig& cfg, std::ostream& log);

}  // namespace spectgnn::cli
