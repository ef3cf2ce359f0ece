#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace lgfed::fed {

struct PhaseCounters {
  std::uint64_t rounds = 0;
  std::uint64_t params_down = 0;  // server -> device
  std::uint64_t params_up = 0;    // device -> server

  std::uint64_t total() const noexcept { return params_down + params_up; }
};

/// Per round: the current global segment is broadcast to all M devices and uploaded by the
/// sampled ones. The one-time exchange of local weights for ensembling is kept apart.
class CommLedger {
 public:
  void record_round(int phase, std::uint64_t devices, std::uint64_t sampled, std::uint64_t params);
  void record_local_exchange(std::uint64_t params);

  const PhaseCounters& phase(int p) const { return phases_.at(static_cast<std::size_t>(p - 1)); }
  std::uint64_t one_time_local_exchange() const noexcept { return local_exchange_; }
  std::uint64_t total() const noexcept;
  std::uint64_t rounds() const noexcept;

 private:
  std::array<PhaseCounters, 2> phases_{};
  std::uint64_t local_exchange_ = 0;
};

/// max(floor(C * M), 1)
std::size_t sampled_count(double participation, std::size_t devices);

struct PhaseSpec {
  std::uint64_t rounds = 0;
  std::uint64_t devices = 0;
  double participation = 0.1;
  std::uint64_t params = 0;
};

/// Sum over phases of rounds * (M + max(floor(C*M),1)) * P.
std::uint64_t closed_form_communication(const std::vector<PhaseSpec>& phases);

}  // namespace lgfed::fed
