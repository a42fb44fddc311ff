// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bpcalc {

// Error taxonomy; every throwing path uses one of these so callers (and the
// CLI) can map failures to distinct exit codes.
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct integrability_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct window_error : std::runtime_error {
    double suggested_U;
    window_error(const std::string& msg, double suggest)
        : std::runtime_error(msg), suggested_U(suggest) {}
};

struct inversion_quality_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct concentration_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct resolution_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct precondition_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct density_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct commutation_error : std::runtime_error {
    int i, j;
    commutation_error(const std::string& msg, int i_, int j_)
        : std::runtime_error(msg), i(i_), j(j_) {}
};

} // namespace bpcalc
