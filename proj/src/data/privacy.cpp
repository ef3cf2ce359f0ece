#include "lgfed/data/privacy.hpp"

#include <atomic>

namespace lgfed::data {

namespace {

thread_local bool t_active = false;
thread_local std::size_t t_device = 0;
std::atomic<std::uint64_t> g_device_reads{0};
std::atomic<std::uint64_t> g_server_reads{0};

}  // namespace

DeviceContext::DeviceContext(std::size_t device_id) : previous_active_(t_active), previous_id_(t_device) {
  t_active = true;
  t_device = device_id;
}

DeviceContext::~DeviceContext() {
  t_active = previous_active_;
  t_device = previous_id_;
}

bool in_device_context() noexcept { return t_active; }

void record_shard_read() noexcept {
  (t_active ? g_device_reads : g_server_reads).fetch_add(1, std::memory_order_relaxed);
}

AccessCounts access_counts() noexcept {
  return {g_device_reads.load(std::memory_order_relaxed), g_server_reads.load(std::memory_order_relaxed)};
}

void reset_access_counts() noexcept {
  g_device_reads.store(0);
  g_server_reads.store(0);
}

}  // namespace lgfed::data
