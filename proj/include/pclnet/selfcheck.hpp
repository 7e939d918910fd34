#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace pclnet {

using SelfcheckLog = std::function<void(const std::string&)>;

/// Finite-difference gradient checks of every layer and of one full
/// encoder + InfoNCE step, plus the distance and InfoNCE oracles. One log line
/// per check; returns true when all pass.
bool run_selfcheck(const SelfcheckLog& log, std::uint64_t seed = 7);

}  // namespace pclnet
