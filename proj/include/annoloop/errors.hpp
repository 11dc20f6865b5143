#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace annoloop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A box collapsed to zero (or negative) area.
class DegenerateBox : public Error {
 public:
  using Error::Error;
};

/// Malformed input document, row or line.
class ParseError : public Error {
 public:
  ParseError(std::string document, std::string reason)
      : Error(document + ": " + reason), document_(std::move(document)), reason_(std::move(reason)) {}

  const std::string& document() const noexcept { return document_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string document_;
  std::string reason_;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownClass : public Error {
 public:
  using Error::Error;
};

class UnknownImage : public Error {
 public:
  using Error::Error;
};

/// No proposal batch exists (the whole campaign fits into B0).
class EmptyCampaign : public Error {
 public:
  using Error::Error;
};

/// Reduction is undefined because the proposal batches hold no ground truth.
class UndefinedReduction : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Detector bridge failures. All of them abort a campaign.
class DetectorError : public Error {
 public:
  using Error::Error;
};

class HandshakeError : public DetectorError {
 public:
  using DetectorError::DetectorError;
};

class TransportError : public DetectorError {
 public:
  using DetectorError::DetectorError;
};

class ProtocolError : public DetectorError {
 public:
  using DetectorError::DetectorError;
};

}  // namespace annoloop
