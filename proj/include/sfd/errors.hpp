#pragma once

#include <stdexcept>
#include <string>

namespace sfd {

/// Base of every error raised by the library. `name()` is the stable error
/// identifier the CLI prints on runtime failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* name() const noexcept { return "Error"; }
};

#define SFD_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                       \
   public:                                                          \
    using Error::Error;                                             \
    const char* name() const noexcept override { return #Name; }    \
  }

SFD_DEFINE_ERROR(SpaceError);
SFD_DEFINE_ERROR(BoundsError);
SFD_DEFINE_ERROR(ShapeError);
SFD_DEFINE_ERROR(DegenerateMetricError);
SFD_DEFINE_ERROR(EmptyDesignError);
SFD_DEFINE_ERROR(CriterionOverflow);
SFD_DEFINE_ERROR(InfeasibleRegionError);
SFD_DEFINE_ERROR(BinningError);
SFD_DEFINE_ERROR(DegeneracyError);
SFD_DEFINE_ERROR(NumericalError);
SFD_DEFINE_ERROR(FormatError);

#undef SFD_DEFINE_ERROR

}  // namespace sfd
