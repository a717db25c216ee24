// Copyright 2026 The vitslim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vitslim {

// Base of every error thrown by the library. kind() is a short stable tag
// ("dimension", "numeric", ...) that the CLI prints as a machine-parseable
// prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define VITSLIM_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(tag, message) {}    \
  }

VITSLIM_DEFINE_ERROR(DimensionError, "dimension");
VITSLIM_DEFINE_ERROR(NumericError, "numeric");
VITSLIM_DEFINE_ERROR(ContractError, "contract");
VITSLIM_DEFINE_ERROR(ConfigError, "config");
VITSLIM_DEFINE_ERROR(LoadError, "load");
VITSLIM_DEFINE_ERROR(IoError, "io");
VITSLIM_DEFINE_ERROR(ParseError, "parse");
VITSLIM_DEFINE_ERROR(MeasurementError, "measurement");

#undef VITSLIM_DEFINE_ERROR

}  // namespace vitslim
