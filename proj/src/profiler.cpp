#include "mlsnn/profiler.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mlsnn/errors.hpp"

namespace mlsnn {

using nlohmann::json;

uint64_t count_events(const Tensor& values) {
  uint64_t n = 0;
  for (float v : values.data) n += (v != 0.0f) ? 1 : 0;
  return n;
}

uint64_t count_events(const SpikeTensor& spikes) { return count_events(spikes.values); }

uint64_t weighted_events(const Tensor& values) {
  uint64_t n = 0;
  for (float v : values.data) {
    check_internal(v >= 0.0f && v == std::floor(v), "weighted_events: non-integer spike value");
    n += static_cast<uint64_t>(v);
  }
  return n;
}

uint64_t weighted_events(const SpikeTensor& spikes) { return weighted_events(spikes.values); }

uint64_t LayerStats::total_events() const {
  uint64_t n = 0;
  for (uint64_t e : events) n += e;
  return n;
}

uint64_t LayerStats::total_weighted() const {
  uint64_t n = 0;
  for (uint64_t e : weighted) n += e;
  return n;
}

TraceTotals trace_totals(const SpikeTrace& trace) {
  TraceTotals t;
  for (const LayerStats& ls : trace.layers) {
    if (ls.fan_out == 0) continue;
    t.events += ls.total_events();
    t.weighted += ls.total_weighted();
  }
  return t;
}

SpikeTrace merge_traces(const SpikeTrace& a, const SpikeTrace& b) {
  check_internal(a.timesteps == b.timesteps && a.levels == b.levels,
                 "merge_traces: window/level mismatch");
  check_internal(a.layers.size() == b.layers.size(), "merge_traces: layer count mismatch");
  SpikeTrace out = a;
  out.images = a.images + b.images;
  for (size_t i = 0; i < out.layers.size(); ++i) {
    LayerStats& dst = out.layers[i];
    const LayerStats& src = b.layers[i];
    check_internal(dst.name == src.name, "merge_traces: layer name mismatch at index " +
                                             std::to_string(i));
    for (size_t t = 0; t < dst.events.size(); ++t) {
      dst.events[t] += src.events[t];
      dst.weighted[t] += src.weighted[t];
    }
    if (src.histogram.size() > dst.histogram.size()) dst.histogram.resize(src.histogram.size(), 0);
    for (size_t h = 0; h < src.histogram.size(); ++h) dst.histogram[h] += src.histogram[h];
  }
  return out;
}

uint64_t avalanche_predict(uint64_t gamma, unsigned depth) {
  if (depth >= 64 || (depth > 0 && gamma > (UINT64_MAX >> depth)))
    throw NumericalError("avalanche_predict: gamma * 2^depth overflows u64 (gamma=" +
                         std::to_string(gamma) + ", depth=" + std::to_string(depth) + ")");
  return gamma << depth;
}

TraceCollector::TraceCollector(size_t timesteps, int levels) {
  check_internal(timesteps >= 1, "trace needs at least one timestep");
  trace_.timesteps = timesteps;
  trace_.levels = levels;
}

size_t TraceCollector::add_point(std::string name, std::string consumer, uint64_t fan_out,
                                 uint64_t neuron_count) {
  LayerStats ls;
  ls.name = std::move(name);
  ls.consumer = std::move(consumer);
  ls.fan_out = fan_out;
  ls.neuron_count = neuron_count;
  ls.events.assign(trace_.timesteps, 0);
  ls.weighted.assign(trace_.timesteps, 0);
  trace_.layers.push_back(std::move(ls));
  return trace_.layers.size() - 1;
}

LayerStats& TraceCollector::stats_at(size_t point, size_t t) {
  check_internal(point < trace_.layers.size(), "trace point out of range");
  check_internal(t < trace_.timesteps, "trace timestep out of range");
  return trace_.layers[point];
}

void TraceCollector::bump_histogram(LayerStats& ls, const Tensor& values) {
  for (float v : values.data) {
    check_internal(v >= 0.0f && v == std::floor(v),
                   "trace: spike point carries non-integer value");
    const size_t k = static_cast<size_t>(v);
    if (k >= ls.histogram.size()) ls.histogram.resize(k + 1, 0);
    ls.histogram[k] += 1;
  }
}

void TraceCollector::record(size_t point, size_t t, const Tensor& values) {
  LayerStats& ls = stats_at(point, t);
  ls.events[t] += count_events(values);
  ls.weighted[t] += weighted_events(values);
  bump_histogram(ls, values);
}

void TraceCollector::record_sum_point(size_t point, size_t t, const Tensor& a, const Tensor& r,
                                      const Tensor& merged) {
  LayerStats& ls = stats_at(point, t);
  ls.events[t] += count_events(a) + count_events(r);
  ls.weighted[t] += weighted_events(a) + weighted_events(r);
  bump_histogram(ls, merged);
}

void TraceCollector::add_images(uint64_t n) { trace_.images += n; }

void TraceCollector::reset_counts() {
  trace_.images = 0;
  for (LayerStats& ls : trace_.layers) {
    ls.events.assign(trace_.timesteps, 0);
    ls.weighted.assign(trace_.timesteps, 0);
    ls.histogram.clear();
  }
}

void write_trace_csv(const std::string& path, const SpikeTrace& trace) {
  std::ostringstream out;
  out << "layer,timestep,events,weighted_events\n";
  for (const LayerStats& ls : trace.layers)
    for (size_t t = 0; t < ls.events.size(); ++t)
      out << ls.name << ',' << t << ',' << ls.events[t] << ',' << ls.weighted[t] << '\n';
  write_file_atomic(path, out.str());
}

void write_trace_summary_json(const std::string& path, const SpikeTrace& trace) {
  json j;
  j["timesteps"] = trace.timesteps;
  j["levels"] = trace.levels;
  j["images"] = trace.images;
  json layers = json::array();
  for (const LayerStats& ls : trace.layers) {
    json l;
    l["name"] = ls.name;
    l["consumer"] = ls.consumer;
    l["fan_out"] = ls.fan_out;
    l["neuron_count"] = ls.neuron_count;
    l["events"] = ls.events;
    l["weighted_events"] = ls.weighted;
    l["histogram"] = ls.histogram;
    l["total_events"] = ls.total_events();
    l["total_weighted_events"] = ls.total_weighted();
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  TraceTotals tt = trace_totals(trace);
  j["total_events"] = tt.events;
  j["total_weighted_events"] = tt.weighted;
  write_file_atomic(path, j.dump(2) + "\n");
}

SpikeTrace load_trace_summary_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace summary: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("invalid trace summary JSON in " + path + ": " + e.what());
  }
  try {
    SpikeTrace trace;
    trace.timesteps = j.at("timesteps").get<size_t>();
    trace.levels = j.at("levels").get<int>();
    trace.images = j.value("images", uint64_t{0});
    for (const json& l : j.at("layers")) {
      LayerStats ls;
      ls.name = l.at("name").get<std::string>();
      ls.consumer = l.value("consumer", std::string{});
      ls.fan_out = l.at("fan_out").get<uint64_t>();
      ls.neuron_count = l.at("neuron_count").get<uint64_t>();
      ls.events = l.at("events").get<std::vector<uint64_t>>();
      ls.weighted = l.at("weighted_events").get<std::vector<uint64_t>>();
      if (l.contains("histogram")) ls.histogram = l.at("histogram").get<std::vector<uint64_t>>();
      check_data(ls.events.size() == trace.timesteps && ls.weighted.size() == trace.timesteps,
                 "trace summary: per-timestep arrays do not match timesteps in " + path);
      trace.layers.push_back(std::move(ls));
    }
    return trace;
  } catch (const json::exception& e) {
    throw DataError("trace summary missing fields in " + path + ": " + e.what());
  }
}

}  // namespace mlsnn
