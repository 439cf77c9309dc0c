#pragma once

#include <string>

#include "laplab/config.hpp"
#include "laplab/hypotheses.hpp"
#include "laplab/normspace.hpp"
#include "laplab/operators.hpp"

namespace laplab {

inline constexpr int kExitPass = 0;
inline constexpr int kExitScientificFail = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// LAPLAB_THREADS (positive integer) wins over cfg.threads.
int thread_count(const RunConfig& cfg);

struct Pipeline {
    Grid grid;
    PotentialSpec pot;
    HypothesisReport report;
    OperatorSet ops;
    NormContext ctx;
    bool ops_ready = false;  // false when condition (ii) fails with no override
    bool ctx_ready = false;
};

// grid -> potential -> hypothesis report -> operators (when c1 is valid);
// need_ctx additionally factors S into a norm context.
Pipeline build_pipeline(const RunConfig& cfg, bool need_ctx);

int cmd_check(const RunConfig& cfg, bool r_doubling);
int cmd_lap(const RunConfig& cfg, bool force, const std::string& replay_dir);
int cmd_proof_trace(const RunConfig& cfg, bool force);
int cmd_smooth(const RunConfig& cfg, const std::string& l_selector, bool force);

struct OracleCheck {
    int cells = 0;
    double max_rel_error = 0.0;      // eps = 0 cells vs the eigendecomposition
    double max_rel_error_eps = 0.0;  // eps > 0 cells vs a dense complex solve
    bool pass = false;
};

// Cross-validates shifted_solve against dense oracles on a 1D R = 10 grid
// with the inverse_power(1,1) well.
OracleCheck oracle_resolvent_check(int points, int cells, unsigned long long seed,
                                   double tol);

int cmd_oracle_test(const RunConfig& cfg);
int cmd_commutator_test(const RunConfig& cfg);

}  // namespace laplab
