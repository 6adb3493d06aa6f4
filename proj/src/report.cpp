#include "qpspec/report.hpp"

#include <cmath>

namespace qpspec {

std::string_view to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Skipped: return "skipped";
  }
  return "unknown";
}

VerificationReport VerificationReport::skipped(std::string name, nlohmann::json params,
                                               std::string reason) {
  VerificationReport r;
  r.check_name = std::move(name);
  r.parameters = std::move(params);
  r.status = CheckStatus::Skipped;
  r.notes = std::move(reason);
  return r;
}

void VerificationReport::conclude(double worst_margin) {
  margin = worst_margin;
  status = margin >= 0.0 ? CheckStatus::Pass : CheckStatus::Fail;
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["check"] = r.check_name;
  j["parameters"] = r.parameters;
  j["status"] = std::string(to_string(r.status));
  j["pass"] = r.pass();
  if (std::isnan(r.margin))
    j["margin"] = nullptr;
  else if (std::isinf(r.margin))
    j["margin"] = r.margin > 0 ? "inf" : "-inf";
  else
    j["margin"] = r.margin;
  j["samples"] = r.samples;
  j["notes"] = r.notes;
  return j;
}

std::string to_json_line(const VerificationReport& r) { return to_json(r).dump(); }

}  // namespace qpspec
