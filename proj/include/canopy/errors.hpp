#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace canopy {

// Bad inputs: parameter domain violations, malformed files, ill-posed
// configurations. Carries the offending field/location in what().
class validation_error : public std::invalid_argument {
  public:
    validation_error(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

  private:
    std::string field_;
};

// Iterative procedure failed to converge within its budget.
class convergence_error : public std::runtime_error {
  public:
    convergence_error(const std::string& message, double residual)
        : std::runtime_error(message), residual_(residual) {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_ = 0.0;
};

// First stage of an instrumental-variables fit carries no signal.
class weak_instrument_error : public std::runtime_error {
  public:
    weak_instrument_error(const std::string& message, double f_stat)
        : std::runtime_error(message), f_stat_(f_stat) {}
    double first_stage_f() const noexcept { return f_stat_; }

  private:
    double f_stat_ = 0.0;
};

}  // namespace canopy
