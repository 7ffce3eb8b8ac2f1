#pragma once

namespace fairreg {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kAuditReportFormatVersion = 1;

}  // namespace fairreg
