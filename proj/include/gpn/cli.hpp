// Command-line entry point. Subcommands:
//   train           train a network, write checkpoint + metrics CSV
//   eval            evaluate a checkpoint on a split
//   grad-analysis   per-step gradient statistics across a list of T values
//   param-analysis  gate histograms, distribution fits, temporal traces
//   convert         text event dumps -> SPKE container
//   datagen         synthetic spike-audio corpus -> SPKE containers
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
// divergence.
#pragma once

#include <string>
#include <vector>

namespace gpn::cli {

int run(const std::vector<std::string>& args);  // args without the program name
int run(int argc, const char* const* argv);

}  // namespace gpn::cli
