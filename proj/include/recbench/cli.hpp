#pragma once

namespace recbench::cli {

// Subcommands: run, stats, fuse, aggregate, report.
// Returns 0 on success, 2 on usage/validation/missing-file errors, 1 otherwise.
int main(int argc, const char* const* argv);

}  // namespace recbench::cli
