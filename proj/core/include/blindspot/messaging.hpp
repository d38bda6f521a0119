#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "blindspot/crypto_ure.hpp"
#include "blindspot/social_graph.hpp"

namespace blindspot::msg {

using graph::NodeId;
using Day = int;
using MessageId = std::uint32_t;
using TraceId = std::uint32_t;

inline constexpr TraceId kNoTrace = std::numeric_limits<TraceId>::max();
inline constexpr std::size_t kDefaultCapacity = 150;
inline constexpr int kDefaultTtlDays = 15;
// Queue position of a sender's own messages: ahead of every routed message.
inline constexpr double kOwnMessageScore = -std::numeric_limits<double>::infinity();

// Stand-in for the sealed envelope when encryption is switched off: the same
// recognition information, carried in the clear.
struct ClearEnvelope {
  ure::Nonce nonce;
  NodeId destination = 0;
};

using SealedPtr = std::shared_ptr<const ure::SealedMessage>;

struct BlindspotMessage {
  std::variant<ClearEnvelope, SealedPtr> content;
  // Simulation metadata. Routing decisions never read these; they feed
  // metrics, TTL bookkeeping and hop traces.
  MessageId sim_id = 0;
  Day created_day = 0;
  TraceId trace = kNoTrace;

  bool sealed() const noexcept { return std::holds_alternative<SealedPtr>(content); }
  const ure::SealedMessage& sealed_message() const { return *std::get<SealedPtr>(content); }
};

struct UploadId {
  NodeId uploader = 0;
  std::uint64_t seq = 0;  // per-uploader, starting at 1

  friend bool operator==(const UploadId&, const UploadId&) = default;
};

struct Upload {
  UploadId id;
  Day day = 0;
  std::vector<BlindspotMessage> carried;

  NodeId uploader() const noexcept { return id.uploader; }
};

struct QueuedMessage {
  BlindspotMessage message;
  double score = 0.0;
};

struct InputEntry {
  BlindspotMessage message;
  NodeId from = 0;
  Day upload_day = 0;
};

// Uploads already processed. Uploads of one neighbour are always processed in
// sequence order, so a per-uploader high-water mark represents the set.
class SeenUploads {
 public:
  bool contains(const UploadId& id) const;
  void mark(const UploadId& id);
  std::size_t uploaders() const noexcept { return high_water_.size(); }

 private:
  std::unordered_map<NodeId, std::uint64_t> high_water_;
};

struct MessageQueues {
  std::vector<InputEntry> input;
  // Ascending score, FIFO among equal scores.
  std::vector<QueuedMessage> output;
  SeenUploads seen_uploads;
  // Nonce -> created day, pruned once the message can no longer be alive.
  std::unordered_map<ure::Nonce, Day, ure::NonceHash> delivered_nonces;
  // Messages recognized for a neighbour, awaiting that neighbour's next pull.
  std::map<NodeId, std::vector<BlindspotMessage>> direct;

  // Inserts already-sorted entries behind existing ones with equal score.
  void enqueue_sorted(std::vector<QueuedMessage> entries);
  std::size_t live_messages() const;
};

// Everything needed to produce a message for one destination.
struct DestinationKeys {
  NodeId node = 0;
  ure::Bytes address;
  std::optional<ure::PublicKey> message_key;
  std::optional<ure::PublicKey> neighbourhood_key;
};

ure::Bytes encode_address(NodeId node);
std::optional<NodeId> decode_address(std::span<const std::uint8_t> address);

// Optional encryption context. Without one, messages carry a ClearEnvelope.
struct CryptoContext {
  const ure::GroupParams* params = nullptr;
  ure::Randomness* randomness = nullptr;
};

struct NeighbourhoodKey {
  NodeId owner = 0;
  ure::PrivateKey key;
};

// Keys held by one node: its own neighbourhood private key and those shared by
// each neighbour, plus the message-secrecy key for reading payloads.
struct NodeKeys {
  NodeId self = 0;
  std::vector<NodeId> neighbours;  // sorted; used when envelopes are clear
  std::vector<NeighbourhoodKey> neighbourhood_keys;
  std::optional<ure::PrivateKey> message_key;
};

// Seals a fresh message and puts it at the head of the sender's output queue
// (behind older own messages).
BlindspotMessage construct_message(MessageQueues& sender, const DestinationKeys& dest,
                                   std::span<const std::uint8_t> payload, Day day,
                                   MessageId sim_id, ure::Randomness& randomness,
                                   const CryptoContext& crypto = {});

enum class QueuePolicy {
  // An upload removes what it carries from the output queue.
  kDrain,
  // Queued messages ride on every upload until they expire.
  kRepost,
};

// Takes up to `capacity` messages from the head of the output queue,
// re-encrypting each sealed message. An empty queue still yields an upload.
Upload pack_upload(MessageQueues& queues, std::size_t capacity, Day day, UploadId id,
                   const CryptoContext& crypto = {}, QueuePolicy policy = QueuePolicy::kDrain);

struct DeliveryCheck {
  bool for_me = false;
  std::optional<NodeId> for_neighbour;
  bool duplicate = false;

  bool recognized() const noexcept { return for_me || for_neighbour.has_value(); }
};

// Tries every held neighbourhood key. A recognized nonce seen before is
// flagged duplicate; otherwise it is recorded.
DeliveryCheck check_delivery(const BlindspotMessage& message, const NodeKeys& keys,
                             MessageQueues& queues, const CryptoContext& crypto = {});

// Drops messages older than ttl_days (strictly greater age) from all queues.
void expire(MessageQueues& queues, Day day, int ttl_days = kDefaultTtlDays);

inline bool expired(const BlindspotMessage& m, Day day, int ttl_days) {
  return day - m.created_day > ttl_days;
}

// Header: uploader, day, message count as big-endian u32, then each message's
// wire form. Only sealed messages can be serialized.
ure::Bytes serialize_upload(const ure::GroupParams& params, const Upload& upload);
Upload parse_upload(const ure::GroupParams& params, std::span<const std::uint8_t> wire);

}  // namespace blindspot::msg
