#include "kesic/harness/probe.hpp"

#include <algorithm>
#include <cctype>

namespace kesic::harness {

std::vector<std::pair<std::string, std::string>> secret_needles(ByteView secret) {
  std::vector<std::pair<std::string, std::string>> out;
  if (secret.empty()) return out;
  out.emplace_back("raw", std::string(secret.begin(), secret.end()));
  std::string hex = to_hex(secret);
  out.emplace_back("hex", hex);
  std::string upper = hex;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper != hex) out.emplace_back("HEX", upper);

  // With `a` filler bytes in front, the first ceil(8a/6) characters mix in
  // the filler; the last two may mix in whatever follows.
  static constexpr std::size_t kSkip[] = {0, 2, 3};
  for (std::size_t a = 0; a < 3; ++a) {
    Bytes shifted(a, 0);
    shifted.insert(shifted.end(), secret.begin(), secret.end());
    std::string b64 = base64_encode(shifted);
    while (!b64.empty() && b64.back() == '=') b64.pop_back();
    if (b64.size() < kSkip[a] + 2 + 8) continue;  // too short to mean anything
    out.emplace_back("base64+" + std::to_string(a), b64.substr(kSkip[a], b64.size() - kSkip[a] - 2));
  }
  return out;
}

std::vector<Leak> scan_for_secrets(const std::vector<Secret>& secrets,
                                   const std::vector<Packet>& transcript) {
  std::vector<Leak> leaks;
  for (const auto& s : secrets) {
    auto needles = secret_needles(s.bytes);
    for (const auto& p : transcript) {
      for (const auto& [form, needle] : needles) {
        if (p.payload.find(needle) != std::string::npos) {
          leaks.push_back({s.label, p.seq, form});
          break;
        }
      }
    }
  }
  return leaks;
}

}  // namespace kesic::harness
