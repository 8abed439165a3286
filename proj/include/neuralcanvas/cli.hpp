#pragma once

#include <iosfwd>

namespace neuralcanvas {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitDiverged = 4,
};

// Entry point of the neuralcanvas command line tool. Subcommands:
//   content  <image>          reconstruct an image from one layer's responses
//   style    <image>          synthesize a texture matching layer Gram matrices
//   transfer <content> <style> render content in the style of another image
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace neuralcanvas
