#pragma once

#include <stdexcept>
#include <string>

namespace fedphish {

struct MalformedMessage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseFailure : std::runtime_error {
  ParseFailure(const std::string& what, long line_number)
      : std::runtime_error(what + " (line " + std::to_string(line_number) + ")"),
        line(line_number) {}
  long line;
};

struct IndexOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TooManyClients : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientClassSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidSelection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyClient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyUpdateSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigInvalid : std::runtime_error {
  ConfigInvalid(const std::string& field_name, const std::string& why)
      : std::runtime_error("invalid config field '" + field_name + "': " + why),
        field(field_name) {}
  std::string field;
};

struct DataUnreadable : std::runtime_error {
  explicit DataUnreadable(const std::string& p)
      : std::runtime_error("cannot read: " + p), path(p) {}
  std::string path;
};

}  // namespace fedphish
