#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlsnn/profiler.hpp"

namespace mlsnn {

// Per-access energy costs in nanojoules. Loaded from / saved to a flat JSON
// object with exactly these keys.
struct HardwareProfile {
  double e_read_weight = 0.0;  // weight fetch per synaptic event
  double e_write_pot = 0.0;    // membrane potential write
  double e_read_pot = 0.0;     // membrane potential read
  double e_read_io = 0.0;      // input buffer read per packet
  double e_write_io = 0.0;     // output buffer write per packet
  double e_read_bias = 0.0;    // bias fetch per neuron per timestep
  double e_acc = 0.0;          // accumulate operation
  double e_mac = 0.0;          // multiply-accumulate (ANN baseline)
  double e_addr = 0.0;         // address computation per routed packet

  void validate() const;
};

HardwareProfile load_hardware_profile(const std::string& path);
void save_hardware_profile(const std::string& path, const HardwareProfile& profile);

// Energies accumulate as exact integer femtojoules; components always sum to
// the total exactly, floating-point drift never enters.
struct EnergyBreakdown {
  int64_t weights_fj = 0;
  int64_t potentials_fj = 0;
  int64_t bias_fj = 0;
  int64_t io_fj = 0;
  int64_t synaptic_fj = 0;
  int64_t addressing_fj = 0;

  int64_t total_fj() const;
  double total_nj() const { return static_cast<double>(total_fj()) * 1e-6; }
};

inline double fj_to_nj(int64_t fj) { return static_cast<double>(fj) * 1e-6; }

// Event-driven estimate over a recorded trace. Only spike points that feed a
// synapse stage (fan_out > 0) contribute; per such point with E packets and
// fan-out f:
//   weights    += E * f * e_read_weight
//   potentials += E * f * (e_read_pot + e_write_pot)
//   synaptic   += E * f * levels * e_acc   (worst case; exact_synaptic uses
//                                           the recorded summed spike values
//                                           instead of E * levels)
//   io         += E * (e_read_io + e_write_io)
//   addressing += E * e_addr
//   bias       += neuron_count * T * (e_read_bias + e_acc), once per trace.
EnergyBreakdown estimate_snn_energy(const SpikeTrace& trace, const HardwareProfile& profile,
                                    bool exact_synaptic = false);

// Dense baseline over the same architecture, one inference:
// weights = MACs * e_read_weight, synaptic = MACs * e_mac, io = activations
// read/written, bias with T = 1, potentials = addressing = 0.
struct AnnStage {
  std::string name;
  uint64_t macs = 0;
  uint64_t in_activations = 0;
  uint64_t out_activations = 0;
  uint64_t units = 0;
};

EnergyBreakdown estimate_ann_energy(const std::vector<AnnStage>& stages,
                                    const HardwareProfile& profile);

// Breakdown rows: Potentials, Weights, Bias, In/Out, Synaptic Operations,
// Addressing, Total (in that order), energies in nJ. `images` > 1 adds a
// per-image column for the event-driven estimate (bias amortized).
void write_energy_csv(const std::string& path, const EnergyBreakdown& snn,
                      const EnergyBreakdown* ann, uint64_t images);
void write_energy_json(const std::string& path, const EnergyBreakdown& snn,
                       const EnergyBreakdown* ann, uint64_t images);

}  // namespace mlsnn
