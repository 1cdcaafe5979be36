#pragma once

#include <string>
#include <vector>

#include "kesic/harness/fleet.hpp"
#include "kesic/harness/transport.hpp"

namespace kesic::harness {

// The forms a secret could take on the wire: raw bytes, hex in either case,
// and base64 at each of the three byte alignments. Base64 needles are
// trimmed to the characters that depend on the secret alone, so a secret
// embedded anywhere inside a larger base64 blob is still found.
std::vector<std::pair<std::string, std::string>> secret_needles(ByteView secret);

struct Leak {
  std::string secret;
  std::uint64_t seq = 0;
  std::string form;
  Json to_json() const { return Json{{"secret", secret}, {"seq", seq}, {"form", form}}; }
};

std::vector<Leak> scan_for_secrets(const std::vector<Secret>& secrets,
                                   const std::vector<Packet>& transcript);

}  // namespace kesic::harness
