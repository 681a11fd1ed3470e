#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmr {

/// Base of every error raised by the library. `category()` is the stable
/// name printed by the CLI next to the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept = 0;
};

#define MMR_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                       \
   public:                                                          \
    using Error::Error;                                             \
    const char* category() const noexcept override { return #Name; } \
  };

MMR_DEFINE_ERROR(BudgetError)
MMR_DEFINE_ERROR(DomainError)
MMR_DEFINE_ERROR(EmptyInputError)
MMR_DEFINE_ERROR(ShapeError)
MMR_DEFINE_ERROR(DegenerateShellError)
MMR_DEFINE_ERROR(SameClassError)
MMR_DEFINE_ERROR(GateError)
MMR_DEFINE_ERROR(ConstructionError)

#undef MMR_DEFINE_ERROR

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  const char* category() const noexcept override { return "FormatError"; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("field '" + field + "': " + what), field_(std::move(field)) {}
  const char* category() const noexcept override { return "ConfigError"; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mmr
