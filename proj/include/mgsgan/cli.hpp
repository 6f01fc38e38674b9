#pragma once

#include <string>
#include <vector>

namespace mgsgan::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericError = 3,
};

/// Runs one command line (without the program name) and returns its exit
/// code. Subcommands: synth, train, eval, export-spectra.
int run(const std::vector<std::string>& args);

int main(int argc, char** argv);

}  // namespace mgsgan::cli
