#include "mlsnn/coding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mlsnn/errors.hpp"

namespace mlsnn {

Tensor direct_encode(const Tensor& images, size_t timesteps) {
  check_config(timesteps >= 1, "direct_encode: timesteps must be >= 1");
  check_data(images.rank() >= 1, "direct_encode: empty image tensor");
  if (!images.all_finite()) throw NumericalError("direct_encode: input contains NaN/Inf");
  std::vector<size_t> shape;
  shape.push_back(timesteps);
  shape.insert(shape.end(), images.shape.begin(), images.shape.end());
  Tensor out(std::move(shape));
  const size_t n = images.numel();
  for (size_t t = 0; t < timesteps; ++t)
    std::copy(images.data.begin(), images.data.end(), out.data.begin() + t * n);
  return out;
}

Tensor rate_decode(const SpikeTensor& spikes) {
  check_internal(spikes.values.rank() >= 2, "rate_decode expects [T, ...]");
  const size_t T = spikes.values.dim(0);
  check_internal(T >= 1 && spikes.levels >= 1, "rate_decode: empty window");
  std::vector<size_t> step_shape(spikes.values.shape.begin() + 1, spikes.values.shape.end());
  const size_t step_numel = shape_numel(step_shape);
  Tensor out(step_shape);
  // Integer spike counts stay exact in f32; the one division below matches the
  // closed-form oracle's float expression bit for bit.
  const float denom = static_cast<float>(static_cast<long long>(spikes.levels) *
                                         static_cast<long long>(T));
  for (size_t i = 0; i < step_numel; ++i) {
    float acc = 0.0f;
    for (size_t t = 0; t < T; ++t) acc += spikes.values.data[t * step_numel + i];
    out.data[i] = acc / denom;
  }
  return out;
}

// ---- DVS event streams -----------------------------------------------------

namespace {

void trim_cr(std::string& s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
}

}  // namespace

EventStream load_event_stream(const std::string& path, size_t width, size_t height) {
  check_config(width > 0 && height > 0, "event stream sensor dimensions must be positive");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty event file: " + path);
  trim_cr(line);
  if (line != "t,x,y,p")
    throw DataError("bad event CSV header in " + path + ": expected \"t,x,y,p\", got \"" + line +
                    "\"");
  EventStream stream;
  stream.width = width;
  stream.height = height;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    trim_cr(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    Event e;
    double vals[4];
    for (int f = 0; f < 4; ++f) {
      if (!std::getline(ss, field, ',')) {
        throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 fields (t,x,y,p)");
      }
      try {
        size_t pos = 0;
        vals[f] = std::stod(field, &pos);
        while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
        if (pos != field.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": malformed field \"" + field +
                        "\"");
      }
    }
    if (std::getline(ss, field, ','))
      throw DataError(path + ":" + std::to_string(lineno) + ": expected exactly 4 fields");
    if (!std::isfinite(vals[0]))
      throw DataError(path + ":" + std::to_string(lineno) + ": non-finite timestamp");
    e.t = vals[0];
    if (vals[1] < 0 || vals[1] != std::floor(vals[1]) || vals[1] >= static_cast<double>(width))
      throw DataError(path + ":" + std::to_string(lineno) + ": x out of sensor bounds [0," +
                      std::to_string(width) + ")");
    if (vals[2] < 0 || vals[2] != std::floor(vals[2]) || vals[2] >= static_cast<double>(height))
      throw DataError(path + ":" + std::to_string(lineno) + ": y out of sensor bounds [0," +
                      std::to_string(height) + ")");
    if (vals[3] != 0.0 && vals[3] != 1.0)
      throw DataError(path + ":" + std::to_string(lineno) + ": polarity must be 0 or 1");
    e.x = static_cast<uint32_t>(vals[1]);
    e.y = static_cast<uint32_t>(vals[2]);
    e.polarity = static_cast<uint8_t>(vals[3]);
    stream.events.push_back(e);
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

void save_event_stream(const std::string& path, const EventStream& stream) {
  std::ostringstream out;
  out << "t,x,y,p\n";
  for (const Event& e : stream.events) {
    out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.polarity) << '\n';
  }
  write_file_atomic(path, out.str());
}

Tensor events_to_frames(const EventStream& stream, size_t timesteps, SliceMethod method) {
  check_config(timesteps >= 1, "events_to_frames: timesteps must be >= 1");
  check_config(stream.width > 0 && stream.height > 0,
               "events_to_frames: sensor dimensions must be positive");
  const size_t H = stream.height, W = stream.width;
  Tensor frames({timesteps, 2, H, W});
  const size_t M = stream.events.size();
  if (M == 0) return frames;

  auto bump = [&](size_t t, const Event& e) {
    frames.data[((t * 2 + e.polarity) * H + e.y) * W + e.x] += 1.0f;
  };

  if (method == SliceMethod::by_count) {
    // Slice i gets events [floor(i*M/T), floor((i+1)*M/T)): exhaustive and
    // disjoint, so conservation holds by construction.
    for (size_t t = 0; t < timesteps; ++t) {
      const size_t lo = t * M / timesteps;
      const size_t hi = (t + 1) * M / timesteps;
      for (size_t i = lo; i < hi; ++i) bump(t, stream.events[i]);
    }
  } else {
    const double t0 = stream.events.front().t;
    const double t1 = stream.events.back().t;
    const double span = t1 - t0;
    for (const Event& e : stream.events) {
      size_t bin;
      if (span <= 0.0) {
        bin = 0;
      } else {
        double f = (e.t - t0) / span * static_cast<double>(timesteps);
        if (f < 0.0) f = 0.0;
        bin = static_cast<size_t>(f);
        if (bin >= timesteps) bin = timesteps - 1;  // t == t_last joins the final bin
      }
      bump(bin, e);
    }
  }
  return frames;
}

SliceMethod slice_method_from_string(const std::string& s) {
  if (s == "by_count") return SliceMethod::by_count;
  if (s == "by_time") return SliceMethod::by_time;
  throw ConfigError("unknown slice method \"" + s + "\" (expected by_count or by_time)");
}

std::string to_string(SliceMethod m) {
  return m == SliceMethod::by_count ? "by_count" : "by_time";
}

}  // namespace mlsnn
