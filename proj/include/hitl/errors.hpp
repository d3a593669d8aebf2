#ifndef HITL_ERRORS_HPP
#define HITL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hitl {

/// Root of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A design coordinate lies outside its parameter's bounds.
class BoundsError : public Error {
public:
    BoundsError(std::string param_id, const std::string& what)
        : Error(what), param_id_(std::move(param_id)) {}
    const std::string& param_id() const noexcept { return param_id_; }

private:
    std::string param_id_;
};

/// A rating vector has the wrong shape or an out-of-range item.
class ValidationError : public Error {
public:
    ValidationError(std::string objective, int index, const std::string& what)
        : Error(what), objective_(std::move(objective)), index_(index) {}
    const std::string& objective() const noexcept { return objective_; }
    int index() const noexcept { return index_; }

private:
    std::string objective_;
    int index_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Operation not permitted in the session's current phase.
class StateError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

/// CSV field could not be parsed; `field()` is the zero-based column.
class ParseError : public Error {
public:
    ParseError(int field, const std::string& what) : Error(what), field_(field) {}
    int field() const noexcept { return field_; }

private:
    int field_;
};

} // namespace hitl

#endif // HITL_ERRORS_HPP
