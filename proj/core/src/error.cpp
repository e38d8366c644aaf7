#include "sphconv/error.hpp"

#include <sstream>

namespace sphconv {

namespace {

std::string ill_posed_message(std::size_t samples, std::size_t coeffs, double condition) {
  std::ostringstream os;
  os << "ill-posed fit: " << samples << " samples for " << coeffs
     << " coefficients, condition estimate " << condition;
  return os.str();
}

std::string located(const std::string& what, std::size_t line, std::size_t column) {
  if (line == 0) return what;
  std::ostringstream os;
  os << what << " (line " << line;
  if (column != 0) os << ", column " << column;
  os << ")";
  return os.str();
}

}  // namespace

IllPosedFit::IllPosedFit(std::size_t samples, std::size_t coeffs, double condition)
    : Error(ill_posed_message(samples, coeffs, condition)),
      samples_(samples),
      coeffs_(coeffs),
      condition_(condition) {}

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : Error(located(what, line, column)), line_(line), column_(column) {}

}  // namespace sphconv
