#pragma once

// Verb-first command line:
//   tryon gen-data --seed S --out DIR --count N [--height H --width W]
//   tryon train    --data DIR --out FILE [--config FILE] [--set k=v]... [--seed S] [--init FILE] [--trace FILE]
//   tryon infer    --data DIR --checkpoints DIR --out DIR [--pose-file FILE] [--id ID]
//   tryon eval     --pred DIR --ref DIR [--splits N] [--seed S] [--out FILE]
//   tryon retrieve --checkpoint FILE --data DIR --query ID [--k N]
//   tryon grid     --row a.png,b.png [--row ...] --out FILE
// Exit status: 0 success, 1 user error, 2 internal error.

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tryon {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Verb { GenData, Train, Infer, Eval, Retrieve, Grid };

struct CommandPlan {
    Verb verb = Verb::GenData;
    std::optional<uint64_t> seed;
    std::string out;
    std::string data;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    int64_t count = 1;
    int64_t height = 96;
    int64_t width = 64;
    std::string init;
    std::string trace;
    std::string checkpoints;
    std::string pose_file;
    std::string id;
    std::string pred;
    std::string ref;
    int splits = 10;
    std::string checkpoint;
    std::string query;
    int64_t k = 5;
    std::vector<std::vector<std::string>> rows;
};

/// Throws UsageError naming the offending token for unknown verbs, flags
/// or config keys.
CommandPlan parse_command(const std::vector<std::string>& args);

/// Runs a validated plan. Progress goes to `log`, results to `out`.
int execute(const CommandPlan& plan, std::ostream& out, std::ostream& log);

/// parse_command + execute with error reporting; returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace tryon
