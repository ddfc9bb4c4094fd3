#pragma once

#include <stdexcept>
#include <string>

namespace retinasim {

// Exit-code mapping used by the CLI: 2 validation, 3 numerical accuracy,
// 4 model-regime violation, 5 I/O.

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 2;
};

struct accuracy_error : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 3;
};

struct regime_error : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 4;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 5;
};

} // namespace retinasim
