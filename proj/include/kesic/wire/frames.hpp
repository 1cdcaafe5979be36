#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kesic/common/bytes.hpp"
#include "kesic/common/clock.hpp"
#include "kesic/crypto/crypto.hpp"
#include "kesic/wire/fields.hpp"

namespace kesic::wire {

using crypto::HmacTag;

// Device-path frames. Each is a concatenation of fixed-width ASCII fields in
// the order given by layout(kind).

struct SyncRequest {
  NumericId id_dev;
  std::uint64_t co_sync = 0;
  HmacTag mac;
  bool operator==(const SyncRequest&) const = default;
};

struct SyncResponse {
  NumericId id_isv;
  std::uint64_t co_sync = 0;
  Timestamp sync_val = 0;
  HmacTag mac;
  bool operator==(const SyncResponse&) const = default;
};

struct AttestRequest {
  NumericId id_isv;
  Challenge challenge;
  HmacTag mac;
  bool operator==(const AttestRequest&) const = default;
};

struct AttestResponse {
  NumericId id_dev;
  HmacTag attst_hmac;
  bool operator==(const AttestResponse&) const = default;
};

struct ServiceRequestG {
  Command cmd = Command::led_on;
  NumericId id_c;
  Address ad_c;
  Timestamp lifetime = 0;
  HmacTag ticket;
  Timestamp ts = 0;
  HmacTag authenticator;
  bool operator==(const ServiceRequestG&) const = default;
};

struct ServiceRequestPC {
  Command cmd = Command::led_on;
  NumericId id_c;
  Address ad_c;
  std::uint64_t co_pc = 0;
  HmacTag ticket;
  bool operator==(const ServiceRequestPC&) const = default;
};

enum class FrameKind {
  sync_request,
  sync_response,
  attest_request,
  attest_response,
  service_request_g,
  service_request_pc,
};

std::string_view to_string(FrameKind kind);
const std::vector<FieldSpec>& layout(FrameKind kind);
std::size_t frame_size(FrameKind kind);
// Byte offset of a named field within the frame; npos when absent.
std::size_t field_offset(FrameKind kind, std::string_view field_name);

// encode() is total over well-typed messages; decode() rejects wrong lengths
// (LengthMismatch) and malformed fields (FieldFormatError / Overflow).
std::string encode(const SyncRequest& m);
std::string encode(const SyncResponse& m);
std::string encode(const AttestRequest& m);
std::string encode(const AttestResponse& m);
std::string encode(const ServiceRequestG& m);
std::string encode(const ServiceRequestPC& m);

Result<SyncRequest> decode_sync_request(std::string_view frame);
Result<SyncResponse> decode_sync_response(std::string_view frame);
Result<AttestRequest> decode_attest_request(std::string_view frame);
Result<AttestResponse> decode_attest_response(std::string_view frame);
Result<ServiceRequestG> decode_service_request_g(std::string_view frame);
Result<ServiceRequestPC> decode_service_request_pc(std::string_view frame);

template <typename M>
Result<M> decode(std::string_view frame);
template <> inline Result<SyncRequest> decode(std::string_view f) { return decode_sync_request(f); }
template <> inline Result<SyncResponse> decode(std::string_view f) { return decode_sync_response(f); }
template <> inline Result<AttestRequest> decode(std::string_view f) { return decode_attest_request(f); }
template <> inline Result<AttestResponse> decode(std::string_view f) { return decode_attest_response(f); }
template <> inline Result<ServiceRequestG> decode(std::string_view f) { return decode_service_request_g(f); }
template <> inline Result<ServiceRequestPC> decode(std::string_view f) { return decode_service_request_pc(f); }

// Human-readable "name=value" rendering of a frame, as an eavesdropper would
// see it. Falls back to a length note for undecodable input.
std::string describe(FrameKind kind, std::string_view frame);

// ---------------------------------------------------------------- MAC inputs
//
// Each returns the exact canonical bytes MAC'd by one protocol step.

std::string sync_request_mac_input(const NumericId& id_dev, std::uint64_t co_sync);
std::string sync_response_mac_input(const NumericId& id_isv, std::uint64_t co_sync,
                                    Timestamp sync_val);
std::string attest_request_mac_input(const NumericId& id_isv, const Challenge& challenge);
std::string service_authenticator_input(Timestamp ts);

// Canonical ticket-tuple renderings handed to the crypto derivations.
struct TicketFields {
  std::string id_c;
  std::string ad_c;
  std::string nonce;  // lifetime (28) for Dev_g, co_pc (24) for Dev_pc
  std::string id_dev;
};
TicketFields ticket_fields_g(const NumericId& id_c, const Address& ad_c, Timestamp lifetime,
                             const NumericId& id_dev);
TicketFields ticket_fields_pc(const NumericId& id_c, const Address& ad_c, std::uint64_t co_pc,
                              const NumericId& id_dev);

}  // namespace kesic::wire
