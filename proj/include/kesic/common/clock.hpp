#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

namespace kesic {

// POSIX epoch seconds. Every time read in the system goes through a Clock so
// tests and the simulator can script it.
using Timestamp = std::int64_t;
using Seconds = std::int64_t;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Timestamp start = 0) : now_(start) {}
  Timestamp now() const override { return now_; }
  void set(Timestamp t) { now_ = t; }
  void advance(Seconds dt) { now_ += dt; }

 private:
  Timestamp now_;
};

// A view of another clock shifted by a fixed offset (client skew, device
// timer drift).
class OffsetClock final : public Clock {
 public:
  OffsetClock(const Clock& base, Seconds offset) : base_(base), offset_(offset) {}
  Timestamp now() const override { return base_.now() + offset_; }
  void set_offset(Seconds offset) { offset_ = offset; }

 private:
  const Clock& base_;
  Seconds offset_;
};

// Reads the current time from a text file holding decimal epoch seconds.
// Lets several processes share one scripted clock in live test mode.
class FileClock final : public Clock {
 public:
  explicit FileClock(std::filesystem::path path) : path_(std::move(path)) {}
  Timestamp now() const override;
  static void write(const std::filesystem::path& path, Timestamp t);

 private:
  std::filesystem::path path_;
};

std::unique_ptr<Clock> make_clock(const std::filesystem::path& virtual_clock_file);

}  // namespace kesic
