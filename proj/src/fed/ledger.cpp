#include "lgfed/fed/ledger.hpp"

#include <cmath>

#include "lgfed/common/error.hpp"

namespace lgfed::fed {

void CommLedger::record_round(int phase, std::uint64_t devices, std::uint64_t sampled, std::uint64_t params) {
  if (phase != 1 && phase != 2) throw ArgumentError("phase must be 1 or 2");
  auto& p = phases_[static_cast<std::size_t>(phase - 1)];
  ++p.rounds;
  p.params_down += devices * params;
  p.params_up += sampled * params;
}

void CommLedger::record_local_exchange(std::uint64_t params) { local_exchange_ += params; }

std::uint64_t CommLedger::total() const noexcept { return phases_[0].total() + phases_[1].total(); }

std::uint64_t CommLedger::rounds() const noexcept { return phases_[0].rounds + phases_[1].rounds; }

std::size_t sampled_count(double participation, std::size_t devices) {
  if (!(participation >= 0.0 && participation <= 1.0)) throw ArgumentError("participation must lie in [0, 1]");
  // tolerate representation error such as 0.1 * 30 = 3.0000000000000004
  const auto k = static_cast<std::size_t>(std::floor(participation * static_cast<double>(devices) + 1e-9));
  return std::max<std::size_t>(std::min(k, devices), 1);
}

std::uint64_t closed_form_communication(const std::vector<PhaseSpec>& phases) {
  std::uint64_t total = 0;
  for (const auto& p : phases) total += p.rounds * (p.devices + sampled_count(p.participation, p.devices)) * p.params;
  return total;
}

}  // namespace lgfed::fed
