#pragma once

#include <stdexcept>
#include <string>

namespace qgraph {

/// Base of every domain failure raised by the library. The CLI maps these
/// to exit status 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidGraph : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class SpectralError : public Error {
public:
    using Error::Error;
};

class NodalError : public Error {
public:
    using Error::Error;
};

class SearchError : public Error {
public:
    using Error::Error;
};

}  // namespace qgraph
