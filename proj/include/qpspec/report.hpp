#pragma once

#include <cstddef>
#include <limits>
#include <string>

#include <json.hpp>

namespace qpspec {

enum class CheckStatus { Pass, Fail, Skipped };

std::string_view to_string(CheckStatus s);

/// Outcome of one numerical check. pass <=> margin >= 0; margin is NaN when skipped.
struct VerificationReport {
  std::string check_name;
  nlohmann::json parameters = nlohmann::json::object();
  CheckStatus status = CheckStatus::Skipped;
  double margin = std::numeric_limits<double>::quiet_NaN();
  std::size_t samples = 0;
  std::string notes;

  bool pass() const { return status == CheckStatus::Pass; }

  static VerificationReport skipped(std::string name, nlohmann::json params, std::string reason);
  /// Sets status from the sign of margin.
  void conclude(double worst_margin);
};

nlohmann::json to_json(const VerificationReport& r);
/// One compact JSON object per line.
std::string to_json_line(const VerificationReport& r);

}  // namespace qpspec
