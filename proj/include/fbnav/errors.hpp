#ifndef FBNAV_ERRORS_HPP
#define FBNAV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fbnav {

// Euler extraction undefined: |pitch| within 1e-6 rad of pi/2.
struct GimbalLock : std::runtime_error {
    explicit GimbalLock(const std::string& msg) : std::runtime_error(msg) {}
};

// Nearest-rotation projection is not unique (antipodal ambiguity).
struct DegenerateInput : std::runtime_error {
    explicit DegenerateInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value (non-positive variance, bad profile, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Covariance diagonal exceeded the divergence guard.
struct NumericalBlowup : std::runtime_error {
    explicit NumericalBlowup(const std::string& msg) : std::runtime_error(msg) {}
};

// Innovation covariance not invertible to working precision.
struct SingularInnovation : std::runtime_error {
    explicit SingularInnovation(const std::string& msg) : std::runtime_error(msg) {}
};

// Every branch weight underflowed before normalization.
struct AllBranchesDead : std::runtime_error {
    explicit AllBranchesDead(const std::string& msg) : std::runtime_error(msg) {}
};

// Detector window has no usable mean specific-force direction.
struct DegenerateWindow : std::runtime_error {
    explicit DegenerateWindow(const std::string& msg) : std::runtime_error(msg) {}
};

// A per-sample likelihood underflowed even in the log domain.
struct NonFinite : std::runtime_error {
    explicit NonFinite(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fbnav

#endif  // FBNAV_ERRORS_HPP
