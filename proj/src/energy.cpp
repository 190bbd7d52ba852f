#include "mlsnn/energy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mlsnn/errors.hpp"

namespace mlsnn {

using nlohmann::json;

namespace {

constexpr const char* kProfileKeys[] = {"e_read_weight", "e_write_pot", "e_read_pot",
                                        "e_read_io",     "e_write_io",  "e_read_bias",
                                        "e_acc",         "e_mac",       "e_addr"};

// Convert a nanojoule cost to integer femtojoules.
int64_t to_fj(double nj) { return static_cast<int64_t>(std::llround(nj * 1e6)); }

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out))
    throw NumericalError("energy accumulation overflows int64 femtojoules");
  return out;
}

int64_t checked_add(int64_t a, int64_t b) {
  int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out))
    throw NumericalError("energy accumulation overflows int64 femtojoules");
  return out;
}

int64_t events_cost(uint64_t count, int64_t unit_fj) {
  check_internal(count <= static_cast<uint64_t>(INT64_MAX), "event count overflows int64");
  return checked_mul(static_cast<int64_t>(count), unit_fj);
}

}  // namespace

void HardwareProfile::validate() const {
  const double vals[] = {e_read_weight, e_write_pot, e_read_pot, e_read_io, e_write_io,
                         e_read_bias,   e_acc,       e_mac,      e_addr};
  for (size_t i = 0; i < std::size(vals); ++i) {
    if (!std::isfinite(vals[i]) || vals[i] < 0.0)
      throw ConfigError(std::string("hardware profile: ") + kProfileKeys[i] +
                        " must be a finite non-negative energy in nJ");
  }
}

HardwareProfile load_hardware_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open hardware profile: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("invalid hardware profile JSON in " + path + ": " + e.what());
  }
  HardwareProfile p;
  double* fields[] = {&p.e_read_weight, &p.e_write_pot, &p.e_read_pot,
                      &p.e_read_io,     &p.e_write_io,  &p.e_read_bias,
                      &p.e_acc,         &p.e_mac,       &p.e_addr};
  for (size_t i = 0; i < std::size(kProfileKeys); ++i) {
    if (!j.contains(kProfileKeys[i]))
      throw ConfigError("hardware profile " + path + " missing key \"" + kProfileKeys[i] + "\"");
    if (!j[kProfileKeys[i]].is_number())
      throw ConfigError("hardware profile " + path + ": \"" + kProfileKeys[i] +
                        "\" must be a number (nJ)");
    *fields[i] = j[kProfileKeys[i]].get<double>();
  }
  p.validate();
  return p;
}

void save_hardware_profile(const std::string& path, const HardwareProfile& p) {
  p.validate();
  json j;
  j["e_read_weight"] = p.e_read_weight;
  j["e_write_pot"] = p.e_write_pot;
  j["e_read_pot"] = p.e_read_pot;
  j["e_read_io"] = p.e_read_io;
  j["e_write_io"] = p.e_write_io;
  j["e_read_bias"] = p.e_read_bias;
  j["e_acc"] = p.e_acc;
  j["e_mac"] = p.e_mac;
  j["e_addr"] = p.e_addr;
  write_file_atomic(path, j.dump(2) + "\n");
}

int64_t EnergyBreakdown::total_fj() const {
  int64_t t = checked_add(weights_fj, potentials_fj);
  t = checked_add(t, bias_fj);
  t = checked_add(t, io_fj);
  t = checked_add(t, synaptic_fj);
  t = checked_add(t, addressing_fj);
  return t;
}

EnergyBreakdown estimate_snn_energy(const SpikeTrace& trace, const HardwareProfile& profile,
                                    bool exact_synaptic) {
  profile.validate();
  check_internal(trace.timesteps >= 1, "energy estimate needs a non-empty trace");
  check_internal(trace.levels >= 1, "energy estimate: invalid level count");
  const int64_t c_w = to_fj(profile.e_read_weight);
  const int64_t c_pot = checked_add(to_fj(profile.e_read_pot), to_fj(profile.e_write_pot));
  const int64_t c_io = checked_add(to_fj(profile.e_read_io), to_fj(profile.e_write_io));
  const int64_t c_bias = checked_add(to_fj(profile.e_read_bias), to_fj(profile.e_acc));
  const int64_t c_acc = to_fj(profile.e_acc);
  const int64_t c_addr = to_fj(profile.e_addr);

  EnergyBreakdown out;
  for (const LayerStats& ls : trace.layers) {
    if (ls.fan_out == 0) continue;
    const uint64_t events = ls.total_events();
    const int64_t fanned = checked_mul(events_cost(events, 1), static_cast<int64_t>(ls.fan_out));
    out.weights_fj = checked_add(out.weights_fj, checked_mul(fanned, c_w));
    out.potentials_fj = checked_add(out.potentials_fj, checked_mul(fanned, c_pot));
    if (exact_synaptic) {
      const int64_t w_fanned =
          checked_mul(events_cost(ls.total_weighted(), 1), static_cast<int64_t>(ls.fan_out));
      out.synaptic_fj = checked_add(out.synaptic_fj, checked_mul(w_fanned, c_acc));
    } else {
      out.synaptic_fj = checked_add(
          out.synaptic_fj, checked_mul(checked_mul(fanned, static_cast<int64_t>(trace.levels)),
                                       c_acc));
    }
    out.io_fj = checked_add(out.io_fj, events_cost(events, c_io));
    out.addressing_fj = checked_add(out.addressing_fj, events_cost(events, c_addr));
    const int64_t neurons_t =
        checked_mul(events_cost(ls.neuron_count, 1), static_cast<int64_t>(trace.timesteps));
    out.bias_fj = checked_add(out.bias_fj, checked_mul(neurons_t, c_bias));
  }
  return out;
}

EnergyBreakdown estimate_ann_energy(const std::vector<AnnStage>& stages,
                                    const HardwareProfile& profile) {
  profile.validate();
  const int64_t c_w = to_fj(profile.e_read_weight);
  const int64_t c_mac = to_fj(profile.e_mac);
  const int64_t c_bias = checked_add(to_fj(profile.e_read_bias), to_fj(profile.e_acc));
  const int64_t c_in = to_fj(profile.e_read_io);
  const int64_t c_out = to_fj(profile.e_write_io);

  EnergyBreakdown out;
  for (const AnnStage& s : stages) {
    out.weights_fj = checked_add(out.weights_fj, events_cost(s.macs, c_w));
    out.synaptic_fj = checked_add(out.synaptic_fj, events_cost(s.macs, c_mac));
    out.bias_fj = checked_add(out.bias_fj, events_cost(s.units, c_bias));
    out.io_fj = checked_add(out.io_fj, checked_add(events_cost(s.in_activations, c_in),
                                                   events_cost(s.out_activations, c_out)));
  }
  return out;
}

namespace {

struct Row {
  const char* name;
  int64_t snn_fj;
  int64_t ann_fj;
};

std::vector<Row> breakdown_rows(const EnergyBreakdown& snn, const EnergyBreakdown* ann) {
  const EnergyBreakdown zero;
  const EnergyBreakdown& a = ann ? *ann : zero;
  return {
      {"Potentials", snn.potentials_fj, a.potentials_fj},
      {"Weights", snn.weights_fj, a.weights_fj},
      {"Bias", snn.bias_fj, a.bias_fj},
      {"In/Out", snn.io_fj, a.io_fj},
      {"Synaptic Operations", snn.synaptic_fj, a.synaptic_fj},
      {"Addressing", snn.addressing_fj, a.addressing_fj},
      {"Total", snn.total_fj(), a.total_fj()},
  };
}

std::string format_nj(double nj) {
  std::ostringstream os;
  os.precision(9);
  os << nj;
  return os.str();
}

}  // namespace

void write_energy_csv(const std::string& path, const EnergyBreakdown& snn,
                      const EnergyBreakdown* ann, uint64_t images) {
  std::ostringstream out;
  out << "component,snn_nj";
  if (images > 1) out << ",snn_nj_per_image";
  if (ann) out << ",ann_nj";
  out << "\n";
  for (const Row& r : breakdown_rows(snn, ann)) {
    out << r.name << ',' << format_nj(fj_to_nj(r.snn_fj));
    if (images > 1)
      out << ',' << format_nj(fj_to_nj(r.snn_fj) / static_cast<double>(images));
    if (ann) out << ',' << format_nj(fj_to_nj(r.ann_fj));
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

void write_energy_json(const std::string& path, const EnergyBreakdown& snn,
                       const EnergyBreakdown* ann, uint64_t images) {
  json j;
  json rows = json::array();
  for (const Row& r : breakdown_rows(snn, ann)) {
    json row;
    row["component"] = r.name;
    row["snn_nj"] = fj_to_nj(r.snn_fj);
    if (images > 1) row["snn_nj_per_image"] = fj_to_nj(r.snn_fj) / static_cast<double>(images);
    if (ann) row["ann_nj"] = fj_to_nj(r.ann_fj);
    rows.push_back(std::move(row));
  }
  j["breakdown"] = std::move(rows);
  j["images"] = images;
  if (ann && ann->total_fj() > 0)
    j["snn_over_ann"] = static_cast<double>(snn.total_fj()) / static_cast<double>(ann->total_fj());
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace mlsnn
