#pragma once

#include <stdexcept>
#include <string>

namespace lsi {

/// Refusal by a numerical gate (convergence, stability, certified range).
class GateFailure : public std::runtime_error {
 public:
  GateFailure(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class NoCertificate : public GateFailure {
 public:
  explicit NoCertificate(const std::string& what) : GateFailure("no_certificate", what) {}
};

class InstabilityError : public GateFailure {
 public:
  explicit InstabilityError(const std::string& what) : GateFailure("instability", what) {}
};

class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureFailure : public std::runtime_error {
 public:
  QuadratureFailure(const std::string& what, double last, double previous)
      : std::runtime_error(what), last_(last), previous_(previous) {}
  double last() const { return last_; }
  double previous() const { return previous_; }

 private:
  double last_;
  double previous_;
};

}  // namespace lsi
