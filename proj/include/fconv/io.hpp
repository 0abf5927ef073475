#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fconv/experiments.hpp"
#include "fconv/inversion.hpp"
#include "fconv/measures.hpp"

namespace fconv {

/// {"atoms": [...], "weights": [...]} or {"eigenvalues": [...]}.
SpectralMeasure measure_from_json(const nlohmann::json& j);
nlohmann::ordered_json measure_to_json(const SpectralMeasure& mu);

SpectralMeasure read_measure(const std::filesystem::path& path);
void write_measure(const std::filesystem::path& path, const SpectralMeasure& mu);

/// %.17g formatting used by every CSV writer.
std::string format_double(double x);

std::string density_csv(const DensityCurve& d);    // E,rho
std::string cdf_csv(const CdfCurve& c);            // E,F
std::string spectrum_csv(const std::vector<double>& eigenvalues);  // index,eigenvalue

nlohmann::ordered_json report_to_json(const ExperimentReport& r);
std::string report_raw_csv(const ExperimentReport& r);

/// Writes to a temporary sibling and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace fconv
