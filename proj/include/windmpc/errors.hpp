#pragma once

#include <stdexcept>
#include <string>

namespace windmpc {

// Exit-code categories used by the CLI: 0 success, 2 config, 3 data,
// 4 transport, 5 internal.
enum class ErrorCategory { config = 2, data = 3, transport = 4, internal = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& what)
        : std::runtime_error(what), cat_(cat) {}
    ErrorCategory category() const { return cat_; }
    int exit_code() const { return static_cast<int>(cat_); }

private:
    ErrorCategory cat_;
};

#define WINDMPC_DEFINE_ERROR(Name, Cat)                          \
    class Name : public Error {                                  \
    public:                                                      \
        explicit Name(const std::string& what)                   \
            : Error(ErrorCategory::Cat, std::string(#Name ": ") + what) {} \
    }

WINDMPC_DEFINE_ERROR(ConfigError, config);

WINDMPC_DEFINE_ERROR(RangeError, data);
WINDMPC_DEFINE_ERROR(FormatError, data);
WINDMPC_DEFINE_ERROR(GridError, data);
WINDMPC_DEFINE_ERROR(LengthError, data);
WINDMPC_DEFINE_ERROR(EmptyIntersectionError, data);
WINDMPC_DEFINE_ERROR(EmptySetError, data);
WINDMPC_DEFINE_ERROR(EmptySampleSpaceError, data);
WINDMPC_DEFINE_ERROR(DegenerateError, data);

WINDMPC_DEFINE_ERROR(TransportError, transport);
WINDMPC_DEFINE_ERROR(ProtocolError, transport);

WINDMPC_DEFINE_ERROR(ShapeError, internal);
WINDMPC_DEFINE_ERROR(InconsistencyError, internal);
WINDMPC_DEFINE_ERROR(MissingBoundaryError, internal);

#undef WINDMPC_DEFINE_ERROR

}  // namespace windmpc
