#pragma once

#include <stdexcept>
#include <string>

namespace bsdelab {

// Closed-form constant evaluated outside its validity region (denominator <= 0).
struct constant_invalid_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Series bound failed to converge within the term cap.
struct series_cap_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Normal equations unusable; message carries the condition estimate.
struct regression_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inner Picard iteration exhausted: step size too large for the driver.
struct step_size_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite state during forward simulation; message carries the step index.
struct simulation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bsdelab
