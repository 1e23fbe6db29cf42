#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fusad {

/// Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numerical failure.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitNumerical = 3 };

/**
 * Entry point behind the `fusad` executable. Subcommands:
 *   synth     write a synthetic corpus (CSV + manifest)
 *   pretrain  masked-reconstruction pretraining -> checkpoint + traces
 *   finetune  task training (optionally from a pretrained trunk) -> checkpoint + traces + report
 *   eval      metric report for a saved model (reads only)
 *   denoise   FFT band-threshold denoising of a CSV, with a spectrum dump
 *   params    parameter accounting for a configuration
 * Reports go to `out` as one JSON object per line; diagnostics go to `err`.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fusad
