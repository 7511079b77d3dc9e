#pragma once

#include <stdexcept>
#include <string>

namespace fdadd {

// Failure categories. The CLI maps these onto process exit codes.
enum class error_kind {
  invalid_input,
  invalid_spec,
  numerical,
  config,
  data,
  io,
  no_viable_candidate,
};

class error : public std::runtime_error {
 public:
  error(error_kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  error_kind kind() const noexcept { return kind_; }

 private:
  error_kind kind_;
};

class invalid_input : public error {
 public:
  explicit invalid_input(const std::string& what) : error(error_kind::invalid_input, what) {}
};

class invalid_spec : public error {
 public:
  explicit invalid_spec(const std::string& what) : error(error_kind::invalid_spec, what) {}
};

class numerical_error : public error {
 public:
  explicit numerical_error(const std::string& what) : error(error_kind::numerical, what) {}
};

class config_error : public error {
 public:
  explicit config_error(const std::string& what) : error(error_kind::config, what) {}
};

// Malformed input data (CSV parse failures and the like).
class data_error : public error {
 public:
  explicit data_error(const std::string& what) : error(error_kind::data, what) {}
};

class io_error : public error {
 public:
  explicit io_error(const std::string& what) : error(error_kind::io, what) {}
};

class no_viable_candidate : public error {
 public:
  explicit no_viable_candidate(const std::string& what)
      : error(error_kind::no_viable_candidate, what) {}
};

// 0 success, 2 config, 3 data, 4 numerical.
inline int exit_code_for(error_kind kind) {
  switch (kind) {
    case error_kind::config:
    case error_kind::invalid_spec:
      return 2;
    case error_kind::data:
    case error_kind::io:
    case error_kind::invalid_input:
      return 3;
    case error_kind::numerical:
    case error_kind::no_viable_candidate:
      return 4;
  }
  return 1;
}

}  // namespace fdadd
