#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlsnn/neuron.hpp"
#include "mlsnn/tensor.hpp"

namespace mlsnn {

// Direct (constant-current) encoding: replicate each image as the input
// current for every timestep. Output [T, B, C, H, W]; each timestep slice is
// bit-identical to the input and independent of T.
Tensor direct_encode(const Tensor& images, size_t timesteps);

// Mean spike count per micro-timestep slot: sum_t z(t) / (levels * T).
// Inverse of the quantizer staircase on [0, v_th]; saturates at 1.
Tensor rate_decode(const SpikeTensor& spikes);

// ---- DVS event streams -----------------------------------------------------

struct Event {
  double t = 0.0;       // timestamp (any monotone unit)
  uint32_t x = 0;       // column
  uint32_t y = 0;       // row
  uint8_t polarity = 0; // 0 or 1
};

struct EventStream {
  std::vector<Event> events;  // sorted by t (loader sorts stably)
  size_t width = 0;
  size_t height = 0;
};

// CSV with exact header "t,x,y,p". Malformed rows, out-of-bounds coordinates,
// and polarities other than 0/1 are data errors naming the line number.
EventStream load_event_stream(const std::string& path, size_t width, size_t height);
void save_event_stream(const std::string& path, const EventStream& stream);

enum class SliceMethod { by_count, by_time };

// Accumulate events into T frames of shape [T, 2, H, W] (one channel per
// polarity). by_count: slice i covers events [floor(i*M/T), floor((i+1)*M/T));
// by_time: equal-duration bins over [t_first, t_last], last bin inclusive.
// Conservation: the frames sum exactly to the number of events.
Tensor events_to_frames(const EventStream& stream, size_t timesteps, SliceMethod method);

SliceMethod slice_method_from_string(const std::string& s);
std::string to_string(SliceMethod m);

}  // namespace mlsnn
