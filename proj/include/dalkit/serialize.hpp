#ifndef DALKIT_SERIALIZE_HPP_
#define DALKIT_SERIALIZE_HPP_

#include <string>
#include <string_view>

#include "dalkit/net.hpp"
#include "dalkit/tensor.hpp"

namespace dalkit {

/// Versioned binary model container. Layout: magic "DALM", format version,
/// payload length, payload, FNV-1a checksum of the payload. The payload
/// carries the full topology, all parameters, moving averages, frozen
/// statistics and layer modes, each double bit-exact.
std::string serialize_model(const Network& net);
Network deserialize_model(std::string_view bytes);

void save_model(const Network& net, const std::string& path);
Network load_model(const std::string& path);

/// Bit-exact tensor round trip, used inside the model payload and directly
/// testable on its own.
std::string tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(std::string_view bytes);

}  // namespace dalkit

#endif  // DALKIT_SERIALIZE_HPP_
