#pragma once

#include <map>
#include <string>
#include <vector>

#include "breathnet/tensor.hpp"

namespace golden {

struct Expect {
    enum Kind { tensor, scalar, text } kind;
    std::string label;
    breathnet::Tensor tensor_value;
    double scalar_value = 0.0;
    std::string text_value;
};

struct GoldenCase {
    std::string name;
    double tolerance = 1e-9;
    std::map<std::string, breathnet::Tensor> tensors;
    std::map<std::string, double> scalars;
    std::map<std::string, std::string> texts;
    std::vector<Expect> expects;
};

std::vector<GoldenCase> load_cases(const std::string& path);

struct Report {
    int total = 0;
    int failures = 0;
    std::vector<std::string> lines;          // one line per case, file order
    std::vector<std::string> failed_cases;
};

// Evaluates every fixture case against the library. A case whose name has
// no dispatcher entry counts as a failure naming the case.
Report run_goldens(const std::string& fixture_path);

}  // namespace golden
