#include "concord/error.hpp"

namespace concord {

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

ConflictError::ConflictError(std::uint64_t rev_id, const std::string& message)
    : ValidationError("revision " + std::to_string(rev_id) + ": " + message),
      rev_id_(rev_id) {}

}  // namespace concord
