#include "saferl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "saferl/errors.hpp"

namespace saferl {

namespace {

using nlohmann::json;

const char* transform_name(HeadTransform t) {
  return t == HeadTransform::kSoftplusPlusOne ? "softplus_plus_one"
                                              : "identity";
}

HeadTransform transform_from_name(const std::string& s) {
  if (s == "identity") return HeadTransform::kIdentity;
  if (s == "softplus_plus_one") return HeadTransform::kSoftplusPlusOne;
  throw ConfigError("unknown head transform: " + s);
}

json spec_json(const MlpSpec& spec) {
  json heads = json::array();
  for (const auto& h : spec.heads) {
    heads.push_back(
        {{"name", h.name}, {"size", h.size}, {"transform", transform_name(h.transform)}});
  }
  return {{"layer_sizes", spec.layer_sizes},
          {"hidden_activation", "tanh"},
          {"output_heads", heads}};
}

MlpSpec spec_from(const json& j) {
  MlpSpec spec;
  spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  if (j.value("hidden_activation", "tanh") != "tanh") {
    throw ConfigError("unsupported hidden activation");
  }
  for (const auto& h : j.at("output_heads")) {
    spec.heads.push_back({h.at("name").get<std::string>(),
                          h.at("size").get<std::size_t>(),
                          transform_from_name(h.at("transform").get<std::string>())});
  }
  spec.validate();
  return spec;
}

}  // namespace

std::vector<std::uint8_t> encode_params(const ParamVector& params) {
  std::vector<std::uint8_t> out;
  out.reserve(params.size() * 8);
  for (double v : params.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xffu));
    }
  }
  return out;
}

ParamVector decode_params(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % 8 != 0) {
    throw DimensionMismatch("decode_params: byte count is not a multiple of 8");
  }
  ParamVector p;
  p.values.reserve(bytes.size() / 8);
  for (std::size_t i = 0; i < bytes.size(); i += 8) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[i + b]) << (8 * b);
    }
    p.values.push_back(std::bit_cast<double>(bits));
  }
  return p;
}

std::string spec_to_json(const MlpSpec& spec) { return spec_json(spec).dump(); }

MlpSpec spec_from_json(const std::string& text) {
  return spec_from(json::parse(text));
}

void save_params(const std::filesystem::path& stem, const MlpSpec& spec,
                 const ParamVector& params, const std::string& metadata_json) {
  if (params.size() != spec.param_count()) {
    throw DimensionMismatch("save_params: parameter count does not match spec");
  }
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";

  const auto bytes = encode_params(params);
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot open " + bin_path.string());
  bin.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));

  json sidecar = {{"format", "f64le"},
                  {"param_count", params.size()},
                  {"spec", spec_json(spec)},
                  {"metadata", json::parse(metadata_json)}};
  std::ofstream js(json_path);
  if (!js) throw Error("cannot open " + json_path.string());
  js << sidecar.dump(2) << '\n';
}

LoadedParams load_params(const std::filesystem::path& stem) {
  auto bin_path = stem;
  bin_path += ".bin";
  auto json_path = stem;
  json_path += ".json";

  std::ifstream js(json_path);
  if (!js) throw Error("cannot open " + json_path.string());
  const json sidecar = json::parse(js);
  if (sidecar.value("format", "") != "f64le") {
    throw ConfigError("unsupported checkpoint format");
  }

  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot open " + bin_path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(bin)),
                                  std::istreambuf_iterator<char>());

  LoadedParams out;
  out.spec = spec_from(sidecar.at("spec"));
  out.params = decode_params(bytes);
  out.metadata_json = sidecar.value("metadata", json::object()).dump();
  const auto declared = sidecar.at("param_count").get<std::size_t>();
  if (out.params.size() != declared) {
    throw DimensionMismatch("checkpoint: binary holds " +
                            std::to_string(out.params.size()) +
                            " values, sidecar declares " +
                            std::to_string(declared));
  }
  return out;
}

}  // namespace saferl
