#ifndef JOP_ERRORS_HPP
#define JOP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace jop {

// Base of every error thrown by the library. The CLI maps subclasses to
// exit codes, so new error types should pick one of the three buckets
// below (input, training, usage).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- input / schema problems (CLI exit 2)
struct IoError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct EmptyVocabularyError : Error {
    using Error::Error;
};
struct EmptyDatasetError : Error {
    using Error::Error;
};

// -- training / evaluation problems (CLI exit 3)
struct InsufficientClassError : Error {
    using Error::Error;
};
struct SingleClassError : Error {
    using Error::Error;
};
struct BadKError : Error {
    using Error::Error;
};
struct DivergenceError : Error {
    using Error::Error;
};
struct LengthMismatchError : Error {
    using Error::Error;
};
struct EmptyClassError : Error {
    using Error::Error;
};

// -- programming / usage problems (CLI exit 4)
struct ShapeError : Error {
    using Error::Error;
};
struct AllMaskedError : Error {
    using Error::Error;
};
struct NonScalarLossError : Error {
    using Error::Error;
};
struct NotAttentionModelError : Error {
    using Error::Error;
};

} // namespace jop

#endif
