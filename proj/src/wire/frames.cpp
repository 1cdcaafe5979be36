#include "kesic/wire/frames.hpp"

#include <array>
#include <numeric>

namespace kesic::wire {

namespace {

using namespace fields;

const std::vector<FieldSpec> kSyncRequest{id_dev, co_sync, mac};
const std::vector<FieldSpec> kSyncResponse{id_isv, co_sync, sync_val, mac};
const std::vector<FieldSpec> kAttestRequest{id_isv, challenge, mac};
const std::vector<FieldSpec> kAttestResponse{id_dev, attst_hmac};
const std::vector<FieldSpec> kServiceRequestG{cmd, id_c, ad_c, lifetime, ticket, ts, authenticator};
const std::vector<FieldSpec> kServiceRequestPC{cmd, id_c, ad_c, co_pc, ticket};

// Splits a frame along its layout, checking total length and the charset of
// every field.
Result<std::vector<std::string_view>> split(FrameKind kind, std::string_view frame) {
  const auto& specs = layout(kind);
  if (frame.size() != frame_size(kind)) {
    return make_error(Errc::LengthMismatch, std::string(to_string(kind)) + " expects " +
                                                std::to_string(frame_size(kind)) +
                                                " bytes, got " + std::to_string(frame.size()));
  }
  std::vector<std::string_view> parts;
  std::size_t off = 0;
  for (const auto& spec : specs) {
    auto part = frame.substr(off, spec.width);
    if (!is_canonical(spec, part)) {
      return make_error(Errc::FieldFormatError,
                        std::string(to_string(kind)) + "." + std::string(spec.name) + " malformed");
    }
    parts.push_back(part);
    off += spec.width;
  }
  return parts;
}

std::string ts_text(const FieldSpec& spec, Timestamp t) { return render_timestamp(spec, t).value(); }
std::string counter_text(const FieldSpec& spec, std::uint64_t c) {
  return render_counter(spec, c).value();
}

}  // namespace

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::sync_request: return "SyncRequest";
    case FrameKind::sync_response: return "SyncResponse";
    case FrameKind::attest_request: return "AttestRequest";
    case FrameKind::attest_response: return "AttestResponse";
    case FrameKind::service_request_g: return "ServiceRequestG";
    case FrameKind::service_request_pc: return "ServiceRequestPC";
  }
  return "Unknown";
}

const std::vector<FieldSpec>& layout(FrameKind kind) {
  switch (kind) {
    case FrameKind::sync_request: return kSyncRequest;
    case FrameKind::sync_response: return kSyncResponse;
    case FrameKind::attest_request: return kAttestRequest;
    case FrameKind::attest_response: return kAttestResponse;
    case FrameKind::service_request_g: return kServiceRequestG;
    case FrameKind::service_request_pc: return kServiceRequestPC;
  }
  return kSyncRequest;
}

std::size_t frame_size(FrameKind kind) {
  const auto& specs = layout(kind);
  return std::accumulate(specs.begin(), specs.end(), std::size_t{0},
                         [](std::size_t n, const FieldSpec& s) { return n + s.width; });
}

std::size_t field_offset(FrameKind kind, std::string_view field_name) {
  std::size_t off = 0;
  for (const auto& spec : layout(kind)) {
    if (spec.name == field_name) return off;
    off += spec.width;
  }
  return std::string_view::npos;
}

// ---------------------------------------------------------------- encode

std::string encode(const SyncRequest& m) {
  return m.id_dev.render() + counter_text(co_sync, m.co_sync) + m.mac.hex();
}

std::string encode(const SyncResponse& m) {
  return m.id_isv.render() + counter_text(co_sync, m.co_sync) + ts_text(sync_val, m.sync_val) +
         m.mac.hex();
}

std::string encode(const AttestRequest& m) {
  return m.id_isv.render() + m.challenge.text() + m.mac.hex();
}

std::string encode(const AttestResponse& m) { return m.id_dev.render() + m.attst_hmac.hex(); }

std::string encode(const ServiceRequestG& m) {
  return std::string(command_token(m.cmd)) + m.id_c.render() + m.ad_c.render() +
         ts_text(lifetime, m.lifetime) + m.ticket.hex() + ts_text(ts, m.ts) +
         m.authenticator.hex();
}

std::string encode(const ServiceRequestPC& m) {
  return std::string(command_token(m.cmd)) + m.id_c.render() + m.ad_c.render() +
         counter_text(co_pc, m.co_pc) + m.ticket.hex();
}

// ---------------------------------------------------------------- decode

Result<SyncRequest> decode_sync_request(std::string_view frame) {
  KESIC_TRY(p, split(FrameKind::sync_request, frame));
  KESIC_TRY(id, NumericId::parse(p[0]));
  KESIC_TRY(counter, parse_counter(co_sync, p[1]));
  KESIC_TRY(tag, HmacTag::from_hex(p[2]));
  return SyncRequest{id, counter, tag};
}

Result<SyncResponse> decode_sync_response(std::string_view frame) {
  KESIC_TRY(p, split(FrameKind::sync_response, frame));
  KESIC_TRY(id, NumericId::parse(p[0]));
  KESIC_TRY(counter, parse_counter(co_sync, p[1]));
  KESIC_TRY(val, parse_timestamp(sync_val, p[2]));
  KESIC_TRY(tag, HmacTag::from_hex(p[3]));
  return SyncResponse{id, counter, val, tag};
}

Result<AttestRequest> decode_attest_request(std::string_view frame) {
  KESIC_TRY(p, split(FrameKind::attest_request, frame));
  KESIC_TRY(id, NumericId::parse(p[0]));
  KESIC_TRY(ch, Challenge::parse(p[1]));
  KESIC_TRY(tag, HmacTag::from_hex(p[2]));
  return AttestRequest{id, ch, tag};
}

Result<AttestResponse> decode_attest_response(std::string_view frame) {
  KESIC_TRY(p, split(FrameKind::attest_response, frame));
  KESIC_TRY(id, NumericId::parse(p[0]));
  KESIC_TRY(tag, HmacTag::from_hex(p[1]));
  return AttestResponse{id, tag};
}

Result<ServiceRequestG> decode_service_request_g(std::string_view frame) {
  KESIC_TRY(p, split(FrameKind::service_request_g, frame));
  KESIC_TRY(command, parse_command(p[0]));
  if (p[0] != command_token(command)) {
    return make_error(Errc::FieldFormatError, "command token not canonically padded");
  }
  KESIC_TRY(client, NumericId::parse(p[1]));
  KESIC_TRY(addr, Address::parse(p[2]));
  KESIC_TRY(lf, parse_timestamp(lifetime, p[3]));
  KESIC_TRY(tkt, HmacTag::from_hex(p[4]));
  KESIC_TRY(stamp, parse_timestamp(ts, p[5]));
  KESIC_TRY(auth, HmacTag::from_hex(p[6]));
  return ServiceRequestG{command, client, addr, lf, tkt, stamp, auth};
}

Result<ServiceRequestPC> decode_service_request_pc(std::string_view frame) {
  KESIC_TRY(p, split(FrameKind::service_request_pc, frame));
  KESIC_TRY(command, parse_command(p[0]));
  if (p[0] != command_token(command)) {
    return make_error(Errc::FieldFormatError, "command token not canonically padded");
  }
  KESIC_TRY(client, NumericId::parse(p[1]));
  KESIC_TRY(addr, Address::parse(p[2]));
  KESIC_TRY(counter, parse_counter(co_pc, p[3]));
  KESIC_TRY(tkt, HmacTag::from_hex(p[4]));
  return ServiceRequestPC{command, client, addr, counter, tkt};
}

std::string describe(FrameKind kind, std::string_view frame) {
  std::string out(to_string(kind));
  if (frame.size() != frame_size(kind)) {
    return out + "(undecodable, " + std::to_string(frame.size()) + " bytes)";
  }
  out += "{";
  std::size_t off = 0;
  bool first = true;
  for (const auto& spec : layout(kind)) {
    if (!first) out += " ";
    first = false;
    out += std::string(spec.name) + "=" + std::string(frame.substr(off, spec.width));
    off += spec.width;
  }
  return out + "}";
}

// ---------------------------------------------------------------- MAC inputs

std::string sync_request_mac_input(const NumericId& id, std::uint64_t counter) {
  return id.render() + counter_text(co_sync, counter);
}

std::string sync_response_mac_input(const NumericId& id, std::uint64_t counter, Timestamp val) {
  return id.render() + counter_text(co_sync, counter) + ts_text(sync_val, val);
}

std::string attest_request_mac_input(const NumericId& id, const Challenge& ch) {
  return id.render() + ch.text();
}

std::string service_authenticator_input(Timestamp t) { return ts_text(ts, t); }

TicketFields ticket_fields_g(const NumericId& client, const Address& addr, Timestamp lf,
                             const NumericId& dev) {
  return {client.render(), addr.render(), ts_text(lifetime, lf), dev.render()};
}

TicketFields ticket_fields_pc(const NumericId& client, const Address& addr, std::uint64_t counter,
                              const NumericId& dev) {
  return {client.render(), addr.render(), counter_text(co_pc, counter), dev.render()};
}

}  // namespace kesic::wire
