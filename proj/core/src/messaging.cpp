#include "blindspot/messaging.hpp"

#include <algorithm>
#include <iterator>

#include "blindspot/error.hpp"

namespace blindspot::msg {
namespace {

void put_u32(ure::Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

bool by_score(const QueuedMessage& a, const QueuedMessage& b) { return a.score < b.score; }

}  // namespace

bool SeenUploads::contains(const UploadId& id) const {
  const auto it = high_water_.find(id.uploader);
  return it != high_water_.end() && id.seq <= it->second;
}

void SeenUploads::mark(const UploadId& id) {
  auto& mark = high_water_[id.uploader];
  mark = std::max(mark, id.seq);
}

void MessageQueues::enqueue_sorted(std::vector<QueuedMessage> entries) {
  if (entries.empty()) return;
  std::vector<QueuedMessage> merged;
  merged.reserve(output.size() + entries.size());
  // std::merge takes from the first range on ties, so older entries stay ahead.
  std::merge(std::make_move_iterator(output.begin()), std::make_move_iterator(output.end()),
             std::make_move_iterator(entries.begin()), std::make_move_iterator(entries.end()),
             std::back_inserter(merged), by_score);
  output = std::move(merged);
}

std::size_t MessageQueues::live_messages() const {
  std::size_t n = input.size() + output.size();
  for (const auto& [_, v] : direct) n += v.size();
  return n;
}

ure::Bytes encode_address(NodeId node) {
  ure::Bytes out;
  put_u32(out, node);
  return out;
}

std::optional<NodeId> decode_address(std::span<const std::uint8_t> address) {
  if (address.size() != 4) return std::nullopt;
  return get_u32(address);
}

BlindspotMessage construct_message(MessageQueues& sender, const DestinationKeys& dest,
                                   std::span<const std::uint8_t> payload, Day day,
                                   MessageId sim_id, ure::Randomness& randomness,
                                   const CryptoContext& crypto) {
  if (payload.size() > ure::kMaxPayloadBytes) {
    throw InvalidInput("payload exceeds the per-message cap; send multiple messages");
  }
  const ure::Nonce nonce = ure::Nonce::random(randomness);
  BlindspotMessage m;
  m.sim_id = sim_id;
  m.created_day = day;
  if (crypto.params) {
    if (!dest.message_key || !dest.neighbourhood_key) {
      throw InvalidInput("destination keys are required when encryption is enabled");
    }
    m.content = std::make_shared<const ure::SealedMessage>(
        ure::seal_message(*crypto.params, payload, nonce, dest.address, *dest.message_key,
                          *dest.neighbourhood_key, *crypto.randomness));
  } else {
    m.content = ClearEnvelope{nonce, dest.node};
  }
  sender.enqueue_sorted({QueuedMessage{m, kOwnMessageScore}});
  return m;
}

Upload pack_upload(MessageQueues& queues, std::size_t capacity, Day day, UploadId id,
                   const CryptoContext& crypto, QueuePolicy policy) {
  Upload up;
  up.id = id;
  up.day = day;
  const std::size_t n = std::min(capacity, queues.output.size());
  up.carried.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    BlindspotMessage m = policy == QueuePolicy::kDrain ? std::move(queues.output[i].message)
                                                       : queues.output[i].message;
    if (m.sealed()) {
      if (!crypto.params) throw InvalidInput("sealed message needs a crypto context to re-encrypt");
      m.content = std::make_shared<const ure::SealedMessage>(
          ure::reencrypt_message(*crypto.params, m.sealed_message(), *crypto.randomness));
    }
    up.carried.push_back(std::move(m));
  }
  if (policy == QueuePolicy::kDrain) {
    queues.output.erase(queues.output.begin(), queues.output.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return up;
}

DeliveryCheck check_delivery(const BlindspotMessage& message, const NodeKeys& keys,
                             MessageQueues& queues, const CryptoContext& crypto) {
  std::optional<NodeId> destination;
  ure::Nonce nonce;

  if (message.sealed()) {
    if (!crypto.params) throw InvalidInput("sealed message needs a crypto context");
    for (const auto& held : keys.neighbourhood_keys) {
      auto opened = ure::open_envelope(*crypto.params, message.sealed_message().envelope, held.key);
      if (!opened) continue;
      const auto addr = decode_address(opened->address);
      if (!addr) continue;
      destination = *addr;
      nonce = opened->nonce;
      break;
    }
  } else {
    const auto& clear = std::get<ClearEnvelope>(message.content);
    if (clear.destination == keys.self ||
        std::binary_search(keys.neighbours.begin(), keys.neighbours.end(), clear.destination)) {
      destination = clear.destination;
      nonce = clear.nonce;
    }
  }

  DeliveryCheck out;
  if (!destination) return out;
  if (*destination == keys.self) {
    out.for_me = true;
  } else if (std::binary_search(keys.neighbours.begin(), keys.neighbours.end(), *destination)) {
    out.for_neighbour = *destination;
  } else {
    return out;  // key matched an address outside the neighbourhood
  }
  out.duplicate = !queues.delivered_nonces.emplace(nonce, message.created_day).second;
  return out;
}

void expire(MessageQueues& queues, Day day, int ttl_days) {
  std::erase_if(queues.input, [&](const InputEntry& e) { return expired(e.message, day, ttl_days); });
  std::erase_if(queues.output, [&](const QueuedMessage& q) { return expired(q.message, day, ttl_days); });
  for (auto it = queues.direct.begin(); it != queues.direct.end();) {
    std::erase_if(it->second, [&](const BlindspotMessage& m) { return expired(m, day, ttl_days); });
    it = it->second.empty() ? queues.direct.erase(it) : std::next(it);
  }
  std::erase_if(queues.delivered_nonces,
                [&](const auto& entry) { return day - entry.second > ttl_days; });
}

ure::Bytes serialize_upload(const ure::GroupParams& params, const Upload& upload) {
  ure::Bytes out;
  put_u32(out, upload.id.uploader);
  put_u32(out, static_cast<std::uint32_t>(upload.day));
  put_u32(out, static_cast<std::uint32_t>(upload.carried.size()));
  for (const auto& m : upload.carried) {
    if (!m.sealed()) throw InvalidInput("only sealed messages have a wire form");
    const auto wire = ure::serialize_message(params, m.sealed_message());
    out.insert(out.end(), wire.begin(), wire.end());
  }
  return out;
}

Upload parse_upload(const ure::GroupParams& params, std::span<const std::uint8_t> wire) {
  if (wire.size() < 12) throw InvalidInput("upload header truncated");
  Upload up;
  up.id.uploader = get_u32(wire);
  up.day = static_cast<Day>(get_u32(wire.subspan(4)));
  const std::uint32_t count = get_u32(wire.subspan(8));
  const std::size_t block = 4 * params.element_width();
  std::size_t pos = 12;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (pos >= wire.size()) throw InvalidInput("upload body truncated");
    const std::size_t len = 1 + std::size_t{wire[pos]} * block;
    if (pos + len > wire.size()) throw InvalidInput("upload body truncated");
    BlindspotMessage m;
    m.content = std::make_shared<const ure::SealedMessage>(
        ure::parse_message(params, wire.subspan(pos, len)));
    up.carried.push_back(std::move(m));
    pos += len;
  }
  if (pos != wire.size()) throw InvalidInput("trailing bytes after upload body");
  return up;
}

}  // namespace blindspot::msg
