#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>

namespace cadmus {

// A child process started through `/bin/sh -c` with its stdin and stdout
// attached to pipes. The destructor closes both pipes, then terminates and
// reaps the child if it is still running.
class Subprocess {
 public:
  explicit Subprocess(const std::string& command);
  ~Subprocess();

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  // Throws IoError when the child has closed its stdin.
  void write(std::string_view bytes);
  void close_stdin();

  // Next line without its '\n'. nullopt on timeout or end of stream;
  // eof() distinguishes the two.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);
  bool eof() const { return eof_; }

  // Waits for exit and returns the exit status (-1 if killed by a signal).
  int wait();

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;   // child's stdin
  int out_fd_ = -1;  // child's stdout
  std::string buffer_;
  bool eof_ = false;
  std::optional<int> status_;
};

}  // namespace cadmus
