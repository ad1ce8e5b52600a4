#include <doctest.h>

#include <sstream>

#include "gradcheck_cases.hpp"

TEST_CASE("gradient suite: every kernel and composite block, 20 seeds each") {
    std::ostringstream log;
    const gradsuite::SuiteResult r = gradsuite::run_gradcheck_suite(20, &log);
    INFO(log.str());
    CHECK(r.all_pass);
    CHECK(r.worst_err < 1e-4);
}
