#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "levtwin/analysis.hpp"
#include "levtwin/dynamics.hpp"
#include "levtwin/feedback.hpp"
#include "levtwin/spectrum.hpp"

namespace levtwin {

namespace fs = std::filesystem;

/// Writes `content` to a sibling temporary file and renames it into place.
void atomic_write(const fs::path& path, const std::string& content);

/// Little-endian binary layout:
///   "LVTT" | u16 version | u8 unit | u8 has_velocity | f64 dt | u64 length |
///   u32 axis mask | u64 seed | u64 digest | f64 samples per present axis
///   (positions, then velocities when present).
std::string encode_trace(const TimeTrace& trace);
TimeTrace decode_trace(const std::string& bytes);
void write_trace_binary(const fs::path& path, const TimeTrace& trace);
TimeTrace read_trace_binary(const fs::path& path);

/// Columns t, then each present axis. A "# unit=..." line leads the file.
std::string trace_csv(const TimeTrace& trace);
void write_trace_csv(const fs::path& path, const TimeTrace& trace);
/// Import path for external data: a header naming t and any of x, y, z.
TimeTrace read_trace_csv(const fs::path& path, SignalUnit unit = SignalUnit::meters);

std::string spectrum_csv(const Spectrum& s);
std::string allan_csv(const AllanCurve& a, SignalUnit unit);
std::string telemetry_csv(const Telemetry& t);

nlohmann::json to_json(const LorentzFit& fit);
nlohmann::json to_json(const ScanCalibration& cal);
nlohmann::json to_json(const QuantumMetrics& q);

std::string read_file(const fs::path& path);

}  // namespace levtwin
