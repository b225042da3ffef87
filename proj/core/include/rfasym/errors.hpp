#pragma once

#include <stdexcept>
#include <string>

namespace rfasym {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Quadrature / moments
class QuadratureFailure : public Error { public: using Error::Error; };
class DivergentMoment : public Error { public: using Error::Error; };
class NonPositiveMu1 : public Error { public: using Error::Error; };

// Losses
class NonPositiveScale : public Error { public: using Error::Error; };
class NewtonDivergence : public Error { public: using Error::Error; };

// Spectral laws
class DegenerateLaw : public Error { public: using Error::Error; };
class OutOfDomain : public Error { public: using Error::Error; };

// Teacher / prediction
class UnsupportedTeacher : public Error { public: using Error::Error; };
class NoClosedForm : public Error { public: using Error::Error; };

// Solvers
class BracketFailure : public Error { public: using Error::Error; };
class MaxIterations : public Error { public: using Error::Error; };

// Experiment configuration and I/O
class ConfigError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

}  // namespace rfasym
