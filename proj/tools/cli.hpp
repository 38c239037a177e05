#pragma once

#include <ostream>

namespace simdrift::cli {

/// Exit codes: 0 ok, 2 configuration error, 3 backend failure, 4 data error.
/// Failures print one JSON object {"error", "message"} to `err`.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace simdrift::cli
