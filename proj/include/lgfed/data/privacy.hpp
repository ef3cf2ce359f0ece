#pragma once

#include <cstddef>
#include <cstdint>

namespace lgfed::data {

// Access audit for device data. Code that runs "on" a device holds a DeviceContext;
// any shard read outside one is attributed to the server.
struct AccessCounts {
  std::uint64_t device_reads = 0;
  std::uint64_t server_reads = 0;
};

class DeviceContext {
 public:
  explicit DeviceContext(std::size_t device_id);
  ~DeviceContext();
  DeviceContext(const DeviceContext&) = delete;
  DeviceContext& operator=(const DeviceContext&) = delete;

 private:
  bool previous_active_;
  std::size_t previous_id_;
};

bool in_device_context() noexcept;
void record_shard_read() noexcept;
AccessCounts access_counts() noexcept;
void reset_access_counts() noexcept;

}  // namespace lgfed::data
