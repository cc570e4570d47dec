#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selros {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file; `position` is a byte offset where parsing stopped
// making sense (0 when the offset is unknown).
struct ParseError : Error {
  explicit ParseError(const std::string& what, std::size_t position = 0)
      : Error(what), position(position) {}
  std::size_t position = 0;
};

struct UnsupportedFormat : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Annotation entry outside the map; `index` is the offending entry's
// position in the input array.
struct BoundsError : Error {
  BoundsError(const std::string& what, std::size_t index)
      : Error(what), index(index) {}
  std::size_t index = 0;
};

struct UnknownRoomError : Error {
  UnknownRoomError(const std::string& what, int room_id)
      : Error(what), room_id(room_id) {}
  int room_id = 0;
};

struct EmptyMapError : Error {
  using Error::Error;
};

struct NoRoomsFoundError : Error {
  using Error::Error;
};

// LLM reply that does not follow the requested answer format; carries an
// excerpt of the offending text for diagnostics.
struct FormatError : Error {
  explicit FormatError(const std::string& what, std::string excerpt = {})
      : Error(what), excerpt(std::move(excerpt)) {}
  std::string excerpt;
};

struct MissingResponseError : Error {
  MissingResponseError(const std::string& what, int room_id)
      : Error(what), room_id(room_id) {}
  int room_id = 0;
};

struct MissingAssignmentError : Error {
  MissingAssignmentError(const std::string& what, int room_id)
      : Error(what), room_id(room_id) {}
  int room_id = 0;
};

// Transport-level LLM failure (connection refused, bad status, unparsable
// response envelope). Retryable.
struct LlmUnavailable : Error {
  using Error::Error;
};

// The backend kept answering in the wrong format until retries ran out;
// carries the last raw reply.
struct PersistentFormatError : Error {
  PersistentFormatError(const std::string& what, std::string last_reply)
      : Error(what), last_reply(std::move(last_reply)) {}
  std::string last_reply;
};

struct UndefinedIoU : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace selros
