#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fpr/dynamics.hpp"
#include "fpr/equilibrium.hpp"
#include "fpr/market.hpp"

namespace fpr {

// File formats. JSON numbers are emitted in shortest round-trip form; CSV
// reals use 17 significant digits. Either way a file re-read through its own
// reader reproduces the doubles bit for bit.

std::string market_to_json(const MarketInstance& market);
MarketInstance market_from_json(const std::string& text);
void write_market(const std::filesystem::path& path, const MarketInstance& market);
MarketInstance read_market(const std::filesystem::path& path);

std::string bids_to_json(const BidProfile& b);
BidProfile bids_from_json(const std::string& text);
void write_bids(const std::filesystem::path& path, const BidProfile& b);
BidProfile read_bids(const std::filesystem::path& path);

// A schedule file is either a bare array of steps (arrays of 0-based buyer
// indices) or an object {"steps": [...], "T": k}. The writer emits the object
// form when a liveness bound is known, the bare array otherwise.
std::string schedule_to_json(const ActivationSchedule& s);
ActivationSchedule schedule_from_json(const std::string& text);
void write_schedule(const std::filesystem::path& path, const ActivationSchedule& s);
ActivationSchedule read_schedule(const std::filesystem::path& path);

std::string certificate_to_json(const EquilibriumCertificate& cert);
EquilibriumCertificate certificate_from_json(const std::string& text);
void write_certificate(const std::filesystem::path& path, const EquilibriumCertificate& cert);
EquilibriumCertificate read_certificate(const std::filesystem::path& path);

// Header: t,potential,nsw,distance,price_0,...,price_{m-1}.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          std::size_t m);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// %.17g; parses back to the identical double.
std::string format_real(double x);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

const char* to_string(GenericityVerdict v);
GenericityVerdict genericity_verdict_from_string(const std::string& s);

}  // namespace fpr
