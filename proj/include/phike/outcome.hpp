#pragma once

#include <optional>

#include "phike/bytes.hpp"

namespace phike {

enum class RoleKind { Client, Server };

// j = 0 for the client, 1 for the server; selects the validator hashes.
struct Role {
  RoleKind kind = RoleKind::Client;

  static constexpr Role client() { return {RoleKind::Client}; }
  static constexpr Role server() { return {RoleKind::Server}; }

  constexpr unsigned j() const { return kind == RoleKind::Client ? 0 : 1; }
  constexpr bool is_client() const { return kind == RoleKind::Client; }
  const char* name() const { return is_client() ? "client" : "server"; }

  friend constexpr bool operator==(Role, Role) = default;
};

enum class PartyStatus { Running, Accepted, Aborted };

enum class AbortReason {
  None,
  CommitMismatch,
  AuthenticatorMismatch,
  ValidationFailed,
  ConfirmationFailed,
  Malformed,
  UnexpectedMessage,
};

inline const char* abort_reason_name(AbortReason r) {
  switch (r) {
    case AbortReason::None: return "none";
    case AbortReason::CommitMismatch: return "commit-mismatch";
    case AbortReason::AuthenticatorMismatch: return "authenticator-mismatch";
    case AbortReason::ValidationFailed: return "validation-failed";
    case AbortReason::ConfirmationFailed: return "confirmation-failed";
    case AbortReason::Malformed: return "malformed";
    case AbortReason::UnexpectedMessage: return "unexpected-message";
  }
  return "unknown";
}

using SessionKey = KeyBits;

}  // namespace phike
