#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlsnn/neuron.hpp"
#include "mlsnn/tensor.hpp"

namespace mlsnn {

// Number of nonzero entries: one valued-spike packet per active neuron per
// timestep, regardless of its level.
uint64_t count_events(const Tensor& values);
uint64_t count_events(const SpikeTensor& spikes);
// Sum of spike values (total unit charges carried by the packets).
uint64_t weighted_events(const Tensor& values);
uint64_t weighted_events(const SpikeTensor& spikes);

// Per spike-point activity over a run. Each point is a wire in the network:
// `events[t]` counts the packets flowing from it at timestep t (aggregated
// over the batch), `weighted[t]` their summed values. A point with a
// `consumer` (fan_out > 0) feeds a synapse stage: those points enter energy
// estimates and totals. Points with fan_out = 0 (direct-path and residual
// taps that terminate in a summation buffer) are recorded for analysis only.
// At SEW summation points events = events(A) + events(R) — the merged packet
// stream the next stage consumes; at barrier points events = nonzero(output).
struct LayerStats {
  std::string name;
  std::string consumer;
  uint64_t fan_out = 0;      // synapses touched per incoming packet at the consumer
  uint64_t neuron_count = 0; // consumer output units (per image, bias accounting)
  std::vector<uint64_t> events;
  std::vector<uint64_t> weighted;
  std::vector<uint64_t> histogram;  // value-frequency of the point's tensor entries

  uint64_t total_events() const;
  uint64_t total_weighted() const;
};

struct SpikeTrace {
  size_t timesteps = 0;
  int levels = 1;
  uint64_t images = 0;  // samples aggregated into this trace
  std::vector<LayerStats> layers;
};

struct TraceTotals {
  uint64_t events = 0;    // over points with a consumer
  uint64_t weighted = 0;
};

TraceTotals trace_totals(const SpikeTrace& trace);

// Element-wise sum of two traces with identical structure (associative).
SpikeTrace merge_traces(const SpikeTrace& a, const SpikeTrace& b);

// Expected summation-point event count after `depth` identity-shortcut SEW
// blocks seeded with gamma events: gamma * 2^depth. Errors on u64 overflow.
uint64_t avalanche_predict(uint64_t gamma, unsigned depth);

// Accumulates per-point counts across forward passes. Points are registered
// once (architecture order) and then recorded per timestep per batch.
class TraceCollector {
 public:
  TraceCollector(size_t timesteps, int levels);
  size_t add_point(std::string name, std::string consumer, uint64_t fan_out,
                   uint64_t neuron_count);
  void record(size_t point, size_t t, const Tensor& values);
  // SEW summation point: events/weighted from the operand streams, histogram
  // from the merged tensor.
  void record_sum_point(size_t point, size_t t, const Tensor& a, const Tensor& r,
                        const Tensor& merged);
  void add_images(uint64_t n);
  const SpikeTrace& trace() const { return trace_; }
  void reset_counts();

 private:
  LayerStats& stats_at(size_t point, size_t t);
  void bump_histogram(LayerStats& ls, const Tensor& values);
  SpikeTrace trace_;
};

// trace CSV: header "layer,timestep,events,weighted_events", one row per
// point per timestep. The summary JSON carries everything needed to rerun the
// energy estimate (per-point totals, consumers, fan-outs, neuron counts).
void write_trace_csv(const std::string& path, const SpikeTrace& trace);
void write_trace_summary_json(const std::string& path, const SpikeTrace& trace);
SpikeTrace load_trace_summary_json(const std::string& path);

}  // namespace mlsnn
