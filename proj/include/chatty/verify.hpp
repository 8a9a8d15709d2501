#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace chatty {

struct VerifyResult {
    std::string name;
    bool pass = false;
    std::string detail;  // failure diagnostics; empty on pass
};

// Runs the self-contained verification suite: finite-difference gradient
// checks for every autodiff op and for the full model objective, the
// closed-form transport-loss gradient identity, the class-confusion
// scalar-loop equivalence, the adversarial fixed point, the minimax
// gradient-sign contract, and a determinism replay. Deterministic in `seed`.
std::vector<VerifyResult> run_verification(std::uint64_t seed);

}  // namespace chatty
