#ifndef SAFERL_CHECKPOINT_HPP_
#define SAFERL_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "saferl/nets.hpp"

namespace saferl {

// Raw little-endian IEEE-754 doubles, no header.
std::vector<std::uint8_t> encode_params(const ParamVector& params);
ParamVector decode_params(const std::vector<std::uint8_t>& bytes);

// Writes `<stem>.bin` (parameters) and `<stem>.json` (sidecar holding the
// MlpSpec, parameter count and `metadata_json`, which must be a JSON object).
void save_params(const std::filesystem::path& stem, const MlpSpec& spec,
                 const ParamVector& params,
                 const std::string& metadata_json = "{}");

struct LoadedParams {
  MlpSpec spec;
  ParamVector params;
  std::string metadata_json;
};

LoadedParams load_params(const std::filesystem::path& stem);

std::string spec_to_json(const MlpSpec& spec);
MlpSpec spec_from_json(const std::string& json);

}  // namespace saferl

#endif  // SAFERL_CHECKPOINT_HPP_
