#pragma once

#include <stdexcept>
#include <string>

namespace reposcope {

// Exit codes: 0 success, 1 usage, 2 corpus error, 3 network error.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace reposcope
