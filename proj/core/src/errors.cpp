#include "wrecon/errors.hpp"

namespace wrecon {

int exit_code_of(const Error& e) noexcept { return static_cast<int>(e.code()); }

}  // namespace wrecon
