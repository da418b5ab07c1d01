#pragma once

#include <stdexcept>
#include <string>

namespace abo {

// Raised by the recursive factor updates when a numerical guard trips. The
// filter catches it and rebuilds its factors from the buffered window.
class NumericalBreakdown : public std::runtime_error {
  public:
    enum class Kind { non_finite, denominator, range_condition };

    NumericalBreakdown(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

// Input data could not be parsed or does not have the required shape/length.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace abo
