#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ontosg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed document text. Line and column are 1-based; zero when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(line == 0 ? what
                          : what + " (line " + std::to_string(line) + ", column " +
                                std::to_string(column) + ")"),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Well-formed text whose content does not match the expected schema.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A name that does not resolve to a declared class, predicate or object.
class ReferenceError : public Error {
public:
    using Error::Error;
};

/// Structural ontology violation: duplicate names, cyclic hierarchy, inverse conflicts.
class OntologyError : public Error {
public:
    using Error::Error;
};

} // namespace ontosg
