#ifndef LPANET_ERRORS_HPP
#define LPANET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lpanet {

/// Coarse failure domain, used by the CLI to pick an exit code.
enum class ErrorKind { Config, Data, Numeric };

struct Error : std::runtime_error {
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

#define LPANET_DEFINE_ERROR(NAME, KIND)                                                 \
    struct NAME : Error {                                                               \
        explicit NAME(const std::string& msg) : Error(ErrorKind::KIND, #NAME ": " + msg) {} \
    }

LPANET_DEFINE_ERROR(ConfigError, Config);

LPANET_DEFINE_ERROR(UnreadableFile, Data);
LPANET_DEFINE_ERROR(HeaderMismatch, Data);
LPANET_DEFINE_ERROR(EmptyAfterDeletion, Data);
LPANET_DEFINE_ERROR(ParseError, Data);
LPANET_DEFINE_ERROR(SingleLevel, Data);
LPANET_DEFINE_ERROR(LengthMismatch, Data);
LPANET_DEFINE_ERROR(NodeMismatch, Data);
LPANET_DEFINE_ERROR(InvalidCounts, Data);

LPANET_DEFINE_ERROR(NotPositiveDefinite, Numeric);
LPANET_DEFINE_ERROR(ZeroVariance, Numeric);
LPANET_DEFINE_ERROR(TooFewRows, Numeric);
LPANET_DEFINE_ERROR(AllStartsFailed, Numeric);
LPANET_DEFINE_ERROR(NoConvergedModels, Numeric);
LPANET_DEFINE_ERROR(DegenerateGroup, Numeric);
LPANET_DEFINE_ERROR(RankDeficient, Numeric);
LPANET_DEFINE_ERROR(TooManyGroups, Numeric);

#undef LPANET_DEFINE_ERROR

} // namespace lpanet

#endif
