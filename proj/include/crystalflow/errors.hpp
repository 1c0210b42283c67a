#pragma once
#include <stdexcept>
#include <string>

namespace cf {

// Exit-code buckets used by the CLI: 2 config, 3 numeric, 4 verification.
struct Error : std::runtime_error {
  int exit_code;
  Error(std::string msg, int code) : std::runtime_error(std::move(msg)), exit_code(code) {}
};

#define CF_ERROR(NAME, CODE)                                        \
  struct NAME : Error {                                             \
    explicit NAME(const std::string& msg = #NAME)                   \
        : Error(std::string(#NAME) + ": " + msg, CODE) {}           \
  }

CF_ERROR(NonHomogeneous, 3);
CF_ERROR(ZeroDimensional, 3);
CF_ERROR(NotRelativeInterior, 3);
CF_ERROR(NotCoercive, 3);
CF_ERROR(NotNested, 3);
CF_ERROR(DegenerateInput, 3);
CF_ERROR(ResolutionTooCoarse, 3);
CF_ERROR(SearchExhausted, 3);
CF_ERROR(CriticalCurvatureZero, 3);
CF_ERROR(PatchOverlap, 3);
CF_ERROR(NoConvergence, 3);
CF_ERROR(NotSupport, 4);
CF_ERROR(FacetTooLarge, 3);
CF_ERROR(MismatchOnBand, 4);
CF_ERROR(CFLViolation, 3);
CF_ERROR(ConfigInvalid, 2);
CF_ERROR(NotInPosition, 4);

#undef CF_ERROR

}  // namespace cf
