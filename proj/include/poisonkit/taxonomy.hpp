// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "poisonkit/error.hpp"

namespace poisonkit {

enum class Group { TPI, ICI, DPI };

inline constexpr std::array<Group, 3> kAllGroups{Group::TPI, Group::ICI, Group::DPI};

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::TPI: return "TPI";
    case Group::ICI: return "ICI";
    case Group::DPI: return "DPI";
  }
  return "?";
}

inline std::optional<Group> parse_group(std::string_view s) {
  if (s == "TPI") return Group::TPI;
  if (s == "ICI") return Group::ICI;
  if (s == "DPI") return Group::DPI;
  return std::nullopt;
}

inline Group group_from_string(std::string_view s) {
  if (auto g = parse_group(s)) return *g;
  throw Error("unknown vulnerability group '" + std::string(s) + "' (expected TPI, ICI or DPI)");
}

inline std::size_t group_index(Group g) { return static_cast<std::size_t>(g); }

struct CweEntry {
  std::string_view id;
  std::string_view description;
  Group group;
};

// The 24 covered weaknesses and their vulnerability group.
inline constexpr std::array<CweEntry, 24> kTaxonomy{{
    {"CWE-020", "Improper Input Validation", Group::TPI},
    {"CWE-078", "OS Command Injection", Group::TPI},
    {"CWE-080", "Basic XSS", Group::TPI},
    {"CWE-089", "SQL Injection", Group::TPI},
    {"CWE-094", "Code Injection", Group::TPI},
    {"CWE-095", "Eval Injection", Group::TPI},
    {"CWE-113", "HTTP Request/Response Splitting", Group::TPI},
    {"CWE-022", "Path Traversal", Group::TPI},
    {"CWE-200", "Exposure of Sensitive Information to Unauthorized Actor", Group::TPI},
    {"CWE-377", "Insecure Temporary File", Group::TPI},
    {"CWE-601", "URL Redirection to Untrusted Site ('Open Redirect')", Group::TPI},
    {"CWE-117", "Improper Output Neutralization for Logs", Group::TPI},
    {"CWE-918", "Server-Side Request Forgery (SSRF)", Group::TPI},
    {"CWE-209", "Generation of Error Message Containing Sensitive Information", Group::ICI},
    {"CWE-269", "Improper Privilege Management", Group::ICI},
    {"CWE-295", "Improper Certificate Validation", Group::ICI},
    {"CWE-611", "Improper Restriction of XML External Entity Reference", Group::ICI},
    {"CWE-319", "Cleartext Transmission of Sensitive Information", Group::DPI},
    {"CWE-326", "Inadequate Encryption Strength", Group::DPI},
    {"CWE-327", "Use of a Broken or Risky Cryptographic Algorithm", Group::DPI},
    {"CWE-329", "Generation of Predictable IV with CBC Mode", Group::DPI},
    {"CWE-330", "Use of Insufficiently Random Values", Group::DPI},
    {"CWE-347", "Improper Verification of Cryptographic Signature", Group::DPI},
    {"CWE-502", "Deserialization of Untrusted Data", Group::DPI},
}};

inline const CweEntry* find_cwe(std::string_view cwe) {
  for (const auto& e : kTaxonomy)
    if (e.id == cwe) return &e;
  return nullptr;
}

inline std::optional<Group> group_of_cwe(std::string_view cwe) {
  if (const auto* e = find_cwe(cwe)) return e->group;
  return std::nullopt;
}

}  // namespace poisonkit
