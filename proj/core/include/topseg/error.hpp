#pragma once

#include <stdexcept>
#include <string>

namespace topseg {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON lines, vector files, matrix dumps).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed fine but breaks a data-model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or similar numerical failure during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace topseg
