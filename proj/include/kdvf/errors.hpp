#pragma once
#include <stdexcept>
#include <string>

namespace kdvf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericalSetupError : public Error {
public:
    using Error::Error;
};

class BlowUpError : public Error {
public:
    BlowUpError(double t, const std::string& what)
        : Error(what), time(t) {}
    double time;
};

class KernelSolveError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class NonContractionError : public Error {
public:
    using Error::Error;
};

class CriticalLengthError : public Error {
public:
    CriticalLengthError(int k_, int l_, const std::string& what)
        : Error(what), k(k_), l(l_) {}
    int k, l;
};

} // namespace kdvf
