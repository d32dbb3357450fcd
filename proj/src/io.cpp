#include "levtwin/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace levtwin {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'T', 'T'};
constexpr std::uint16_t kTraceVersion = 1;

template <class T>
void put(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                     std::uint8_t>>>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Cursor {
 public:
  explicit Cursor(const std::string& s) : s_(s) {}
  template <class T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                                       std::uint8_t>>>;
    if (pos_ + sizeof(T) > s_.size()) throw std::runtime_error("trace file truncated");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<U>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }
  std::size_t remaining() const { return s_.size() - pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::uint64_t digest_bits(const std::string& hex) {
  if (hex.empty()) return 0;
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::string digest_hex(std::uint64_t v) {
  if (v == 0) return {};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string density_unit(const Spectrum& s) {
  const std::string u = s.unit == SignalUnit::meters ? "m" : "V";
  return s.convention == SpectrumConvention::one_sided_hertz ? u + "^2/Hz" : u + "^2 s/rad";
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_trace(const TimeTrace& t) {
  const std::size_t n = t.size();
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (t.position[i].empty()) continue;
    if (t.position[i].size() != n) throw InputError("encode_trace: axes differ in length");
    mask |= 1u << i;
  }
  const bool vel = t.has_velocity();
  std::string out(kMagic, 4);
  put(out, kTraceVersion);
  put(out, static_cast<std::uint8_t>(t.unit == SignalUnit::meters ? 0 : 1));
  put(out, static_cast<std::uint8_t>(vel ? 1 : 0));
  put(out, t.dt);
  put(out, static_cast<std::uint64_t>(n));
  put(out, mask);
  put(out, static_cast<std::uint64_t>(t.seed));
  put(out, digest_bits(t.config_digest));
  out.reserve(out.size() + n * 8 * 6);
  for (std::size_t i = 0; i < 3; ++i)
    if (mask & (1u << i))
      for (double v : t.position[i]) put(out, v);
  if (vel)
    for (std::size_t i = 0; i < 3; ++i)
      if (mask & (1u << i)) {
        if (t.velocity[i].size() != n) throw InputError("encode_trace: velocity length mismatch");
        for (double v : t.velocity[i]) put(out, v);
      }
  return out;
}

TimeTrace decode_trace(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0)
    throw std::runtime_error("not a trace file (bad magic)");
  Cursor c(bytes);
  for (int i = 0; i < 4; ++i) c.get<std::uint8_t>();
  const auto version = c.get<std::uint16_t>();
  if (version != kTraceVersion)
    throw std::runtime_error("unsupported trace version " + std::to_string(version));
  TimeTrace t;
  t.unit = c.get<std::uint8_t>() == 0 ? SignalUnit::meters : SignalUnit::volts;
  const bool vel = c.get<std::uint8_t>() != 0;
  t.dt = c.get<double>();
  const auto n = c.get<std::uint64_t>();
  const auto mask = c.get<std::uint32_t>();
  t.seed = c.get<std::uint64_t>();
  t.config_digest = digest_hex(c.get<std::uint64_t>());
  const std::size_t axes = std::popcount(mask & 7u);
  if (c.remaining() != n * axes * 8 * (vel ? 2 : 1))
    throw std::runtime_error("trace file length does not match header");
  for (std::size_t i = 0; i < 3; ++i)
    if (mask & (1u << i)) {
      t.position[i].resize(n);
      for (auto& v : t.position[i]) v = c.get<double>();
    }
  if (vel)
    for (std::size_t i = 0; i < 3; ++i)
      if (mask & (1u << i)) {
        t.velocity[i].resize(n);
        for (auto& v : t.velocity[i]) v = c.get<double>();
      }
  return t;
}

void write_trace_binary(const fs::path& path, const TimeTrace& trace) {
  atomic_write(path, encode_trace(trace));
}

TimeTrace read_trace_binary(const fs::path& path) { return decode_trace(read_file(path)); }

std::string trace_csv(const TimeTrace& t) {
  std::ostringstream o;
  o << "# unit=" << signal_unit_name(t.unit) << " dt=" << num(t.dt) << " seed=" << t.seed
    << " digest=" << t.config_digest << '\n';
  o << 't';
  for (Axis a : kAxes)
    if (!t.position[a].empty()) o << ',' << axis_name(a);
  o << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    o << num(t.dt * static_cast<double>(k));
    for (Axis a : kAxes)
      if (!t.position[a].empty()) o << ',' << num(t.position[a][k]);
    o << '\n';
  }
  return o.str();
}

void write_trace_csv(const fs::path& path, const TimeTrace& trace) {
  atomic_write(path, trace_csv(trace));
}

TimeTrace read_trace_csv(const fs::path& path, SignalUnit unit) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> cols;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      while (!c.empty() && c.front() == ' ') c.erase(0, 1);
      cols.push_back(c);
    }
    break;
  }
  if (cols.empty() || cols[0] != "t") throw InputError("trace CSV: first column must be t");
  std::vector<int> target(cols.size(), -1);
  for (std::size_t i = 1; i < cols.size(); ++i)
    target[i] = static_cast<int>(parse_axis(cols[i]));
  TimeTrace t;
  t.unit = unit;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::size_t i = 0;
    for (std::string c; std::getline(ss, c, ','); ++i) {
      if (i >= cols.size()) throw InputError("trace CSV: too many fields in a row");
      const double v = std::stod(c);
      if (i == 0) times.push_back(v);
      else t.position[static_cast<std::size_t>(target[i])].push_back(v);
    }
    if (i != cols.size()) throw InputError("trace CSV: short row");
  }
  if (times.size() < 2) throw InputError("trace CSV: need at least two rows");
  t.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(t.dt > 0.0)) throw InputError("trace CSV: time column must increase");
  return t;
}

std::string spectrum_csv(const Spectrum& s) {
  std::ostringstream o;
  const bool hz = s.convention == SpectrumConvention::one_sided_hertz;
  o << "# frequency=" << (hz ? "Hz" : "rad/s") << " density=" << density_unit(s)
    << " segment=" << s.meta.segment_length << " averages=" << s.meta.averages
    << " window=" << s.meta.window << '\n';
  o << (hz ? "frequency_hz" : "omega_rad_s") << ",density\n";
  for (std::size_t i = 0; i < s.size(); ++i) o << num(s.frequency[i]) << ',' << num(s.density[i]) << '\n';
  return o.str();
}

std::string allan_csv(const AllanCurve& a, SignalUnit unit) {
  std::ostringstream o;
  o << "# tau=s sigma=" << signal_unit_name(unit) << '\n';
  o << "tau,sigma,segments\n";
  for (std::size_t i = 0; i < a.tau.size(); ++i)
    o << num(a.tau[i]) << ',' << num(a.sigma[i]) << ',' << a.segments[i] << '\n';
  return o.str();
}

std::string telemetry_csv(const Telemetry& t) {
  std::ostringstream o;
  o << "# t=s phase=rad frequency=rad/s residual=rad output=1 stride=" << t.stride << '\n';
  o << "t,phase_x,phase_y,phase_z,frequency_x,frequency_y,frequency_z,residual_x,residual_y,"
       "residual_z,output\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    o << num(t.dt * static_cast<double>(k));
    for (const auto* col : {&t.phase, &t.frequency, &t.residual})
      for (std::size_t i = 0; i < 3; ++i) o << ',' << num((*col)[i][k]);
    o << ',' << num(t.output[k]) << '\n';
  }
  return o.str();
}

nlohmann::json to_json(const LorentzFit& f) {
  nlohmann::json j;
  j["A"] = f.A;
  j["B_rad_s"] = f.B;
  j["C_per_s"] = f.C;
  j["sigma_A"] = f.sigma(0);
  j["sigma_B"] = f.sigma(1);
  j["sigma_C"] = f.sigma(2);
  j["covariance"] = f.covariance;
  j["quality_factor"] = f.C > 0.0 ? f.B / f.C : 0.0;
  j["rms_log_residual"] = f.residual;
  j["points"] = f.points;
  j["evaluations"] = f.evaluations;
  j["converged"] = f.converged;
  j["diagnostic"] = f.diagnostic;
  j["unit"] = signal_unit_name(f.unit);
  return j;
}

nlohmann::json to_json(const ScanCalibration& c) {
  nlohmann::json j;
  j["resolved"] = c.resolved;
  j["note"] = c.note;
  j["first_scale_v"] = c.first_scale;
  j["second_scale_v"] = c.second_scale;
  j["ratio"] = c.ratio;
  j["beta"] = c.beta;
  j["beta_small_angle"] = c.beta_small;
  j["z0_m"] = c.z0;
  j["gamma_v_m"] = c.gamma;
  j["mass_kg"] = c.mass;
  j["radius_m"] = c.radius;
  j["resolution_m_rthz"] = c.resolution;
  return j;
}

nlohmann::json to_json(const QuantumMetrics& q) {
  nlohmann::json j;
  j["ground_size_m"] = q.ground_size;
  j["zero_point_m"] = q.zero_point;
  j["occupancy"] = q.occupancy;
  j["scattered_power_w"] = q.scattered_power;
  j["recoil_rate_per_s"] = q.recoil_rate;
  j["phonon_limit"] = q.phonon_limit;
  return j;
}

}  // namespace levtwin
