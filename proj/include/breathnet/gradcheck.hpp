#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "breathnet/tape.hpp"
#include "breathnet/tensor.hpp"

namespace breathnet {

// Builds a scalar loss from the given tape inputs. The same builder is used
// for the analytic pass (tape backward) and the finite-difference pass
// (forward re-evaluation), so it must be a pure function of the inputs.
using ScalarGraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradcheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string detail;  // kernel name + seed on failure
};

struct GradcheckOptions {
    double fd_step = 1e-5;
    double tolerance = 1e-4;
    // Relative error floor: components below this magnitude are compared
    // absolutely, which keeps near-zero gradients from blowing up the ratio.
    double rel_floor = 1e-2;
};

// Compares tape gradients against central finite differences for every
// element of every input. PASS iff max relative error < tolerance.
GradcheckReport gradcheck(const std::string& name, const ScalarGraphFn& fn, const std::vector<Tensor>& inputs,
                          const GradcheckOptions& opts = {});

// Draws inputs of the given shapes from `seed` (magnitudes kept away from
// activation kinks) and runs gradcheck on them.
GradcheckReport gradcheck_random(const std::string& name, const ScalarGraphFn& fn, const std::vector<std::vector<int>>& shapes,
                                 std::uint64_t seed, const GradcheckOptions& opts = {});

// Random values bounded away from zero: |v| in [0.1, 1.1).
Tensor random_kink_free(const std::vector<int>& shape, std::uint64_t seed);

}  // namespace breathnet
