#pragma once

// The fbcir command-line interface as a library, so tests can drive every subcommand in-process.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fbcir/error.hpp"

namespace fbcir::cli {

enum ExitCode : int {
    kSuccess = 0,
    kInputError = 2,
    kBackendError = 3,
    kInvariantViolation = 4,
};

/// Input errors map to 2, scorer/generator/transport failures to 3, DivergedLoss to 4.
int exit_code_for(ErrorCode code) noexcept;

/// Explicit seed, else FBCIR_SEED, else 0. Throws InvalidArgument on a malformed FBCIR_SEED.
std::uint64_t resolve_seed(std::optional<std::uint64_t> explicit_seed);

/// args excludes the program name, e.g. {"bound", "--ni", "15", "--nt", "10", "--w", "5"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fbcir::cli
