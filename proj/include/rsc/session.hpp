#pragma once

// Rateless transmission of one source sample. The encoder quantizes the
// full latent once; symbols then stream in chunks and after every round the
// receiver decodes from what it has (zeros for the rest) and decides whether
// to acknowledge.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rsc/link.hpp"
#include "rsc/models.hpp"
#include "rsc/quantizer.hpp"

namespace rsc {

enum class AckRule {
  kFixedK,            // ACK once k reaches fixed_k
  kDistortionTarget,  // ACK once the receiver's proxy drops to tau
  kDelayExhausted,    // never ACK early; stop at K
};

enum class AckProxy {
  kCritic,     // -r(ŵ): what a receiver can evaluate on its own
  kOracleMse,  // ‖w - ŵ‖² against the true source; for testing
};

struct SessionPolicy {
  std::size_t max_delay = 12;  // K
  AckRule rule = AckRule::kDelayExhausted;
  std::size_t fixed_k = 0;
  double tau = std::numeric_limits<double>::infinity();
  AckProxy proxy = AckProxy::kCritic;
  std::size_t chunk = 1;

  void validate() const;

  static SessionPolicy fixed(std::size_t k, std::size_t K, std::size_t chunk = 1);
  static SessionPolicy target(double tau, AckProxy proxy, std::size_t K, std::size_t chunk = 1);
  static SessionPolicy exhaust(std::size_t K, std::size_t chunk = 1);
};

struct SessionRound {
  std::size_t k = 0;
  std::optional<double> snr_db;  // over the symbols received so far
  std::uint64_t digest = 0;      // of the reconstruction
  std::optional<double> mse;
  std::optional<double> critic_score;
  std::optional<double> proxy;   // value compared against tau
  bool ack = false;
};

struct SessionTrace {
  std::uint64_t session_id = 0;
  std::vector<SessionRound> rounds;
  std::size_t k_ack = 0;
  std::size_t symbols_sent = 0;
  // distortion_target never satisfied by k = K.
  bool unsatisfied = false;
  Tensor reconstruction;  // [1 × d] at k_ack
  LatentCode code;        // what was sent, for serialization
};

struct SessionModels {
  const Codec* codec = nullptr;
  const Critic* critic = nullptr;  // required by the critic proxy only
  // TC/SC send the continuous latent.
  bool quantize = true;
};

// `w` is one sample, [d] or [1 × d]. `reference` enables the per-round MSE.
SessionTrace run_session(const Tensor& w, const SessionModels& models, const QuantizerConfig& q,
                         const ChannelConfig& channel, const SessionPolicy& policy,
                         const CommonRandomness& cr, bool reference = true);

// One JSON object per round, then a summary line.
void write_trace_jsonl(const SessionTrace& trace, std::ostream& out);

// ---- wire format --------------------------------------------------------------
//
// u8 version | u32 K | u32 k | u16 L_q | u64 seed | u64 session_id, little
// endian, followed by k lattice indices of ceil(log2 L_q) bits each, packed
// most significant bit first and zero-padded to a byte boundary.

inline constexpr std::uint8_t kWireVersion = 1;

LatentCode make_latent_code(const Tensor& z_row, std::size_t k, const QuantizerConfig& q,
                            const CommonRandomness& cr, std::uint64_t offset = 0);
std::vector<std::uint8_t> encode_wire(const LatentCode& code);
LatentCode decode_wire(const std::vector<std::uint8_t>& bytes);

}  // namespace rsc
