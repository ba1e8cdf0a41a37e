#pragma once

#include <stdexcept>
#include <string>

namespace dtadpd {

// Invalid or inconsistent input data (bad CSV row, impossible counts, ...).
// The CLI maps this to exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during fitting (singular system, total downweighting,
// line-search collapse, ...). The CLI maps this to exit status 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtadpd
