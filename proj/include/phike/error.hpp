#pragma once

#include <stdexcept>
#include <string>

namespace phike {

// Base of every exception thrown by the library. Protocol aborts are not
// exceptions; they are terminal states of a party (see AbortReason).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParamError : public Error {
 public:
  using Error::Error;
};

class SearchExhausted : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class ChannelError : public Error {
 public:
  using Error::Error;
};

class CapacityExceeded : public ChannelError {
 public:
  using ChannelError::ChannelError;
};

class DirectionViolation : public ChannelError {
 public:
  using ChannelError::ChannelError;
};

class InjectionForbidden : public ChannelError {
 public:
  using ChannelError::ChannelError;
};

// Reveal/Test exclusion or a second Test query.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

class UnknownInstance : public Error {
 public:
  using Error::Error;
};

}  // namespace phike
