// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#include "componerf/guidance.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "componerf/endian.hpp"
#include "componerf/error.hpp"

namespace componerf {

using nlohmann::json;

namespace {

double wrap_azimuth(double az) {
  double a = std::fmod(az, 360.0);
  if (a > 180.0) a -= 360.0;
  if (a <= -180.0) a += 360.0;
  return a;
}

std::string encode_image(const Image<float>& image) {
  return encode_floats_b64(std::span<const float>(image.data.data(), std::size_t(image.data.size())));
}

[[noreturn]] void protocol_error(const std::string& what) {
  throw Error(ErrorCode::ProtocolVersionMismatch, what);
}

json parse_json_body(std::string_view body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) protocol_error("response is not an object");
    if (j.contains("protocol_version") && j.at("protocol_version") != kProtocolVersion) {
      protocol_error("service speaks protocol " + j.at("protocol_version").dump());
    }
    return j;
  } catch (const json::exception& e) {
    protocol_error(std::string("malformed response: ") + e.what());
  }
}

Image<float> decode_image(const json& j, const char* field, int h, int w, int c) {
  if (!j.contains(field) || !j.at(field).is_string()) protocol_error(std::string("response lacks ") + field);
  std::vector<float> values;
  try {
    values = decode_floats_b64(j.at(field).get<std::string>());
  } catch (const Error& e) {
    protocol_error(e.detail());
  }
  if (values.size() != std::size_t(h) * w * c) protocol_error(std::string(field) + " has the wrong size");
  Image<float> out(h, w, c);
  for (std::size_t i = 0; i < values.size(); ++i) out.data[Eigen::Index(i)] = values[i];
  return out;
}

struct Endpoint {
  std::string base;
  std::string path;
};

/// POST with retries on transport failure; HTTP errors map to the error taxonomy.
std::string post_json(const RemoteConfig& cfg, const std::string& path, const std::string& body,
                      const std::string& request_id, ErrorCode transport_code) {
  std::unique_ptr<httplib::Client> client;
  try {
    client = std::make_unique<httplib::Client>(cfg.url);
  } catch (const std::exception& e) {
    throw Error(transport_code, "bad service url '" + cfg.url + "': " + e.what());
  }
  if (!client->is_valid()) throw Error(transport_code, "bad service url '" + cfg.url + "'");
  const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
  client->set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client->set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client->set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  httplib::Headers headers;
  if (!request_id.empty()) headers.emplace("X-Request-Id", request_id);
  const int attempts = std::max(cfg.max_attempts, 1);
  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(cfg.retry_delay_s));
    auto res = client->Post(path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;

    std::string code = "UNKNOWN";
    std::string message = res->body;
    try {
      json j = json::parse(res->body);
      if (j.contains("error_code")) code = j.at("error_code").get<std::string>();
      if (j.contains("message")) message = j.at("message").get<std::string>();
    } catch (const json::exception&) {
    }
    const std::string what = path + " HTTP " + std::to_string(res->status) + " " + code + ": " + message;
    if (code == "BAD_VERSION") throw Error(ErrorCode::ProtocolVersionMismatch, what);
    throw Error(ErrorCode::ProviderError, what);
  }
  throw Error(transport_code, path + " unreachable after " + std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace

std::string augment_prompt(std::string_view prompt, ViewAngles view) {
  std::string out(prompt);
  const double az = std::abs(wrap_azimuth(view.azimuth_deg));
  if (view.elevation_deg > 60.0) {
    out += ", overhead view";
  } else if (az < 45.0) {
    out += ", front view";
  } else if (az > 135.0) {
    out += ", back view";
  } else {
    out += ", side view";
  }
  return out;
}

GuidanceResponse mock_guidance(const GuidanceRequest& request, const Image<float>& target) {
  require_same_shape(request.image, target, "mock guidance");
  GuidanceResponse out;
  out.grad_image = request.image;
  out.grad_image.data -= target.data;
  out.provider = "mock";
  out.loss = 0.5 * out.grad_image.data.template cast<double>().squaredNorm();
  return out;
}

std::string encode_floats_b64(std::span<const float> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t v = little_endian(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(bytes.data() + 4 * i, &v, 4);
  }
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), int(bytes.size()));
  out.resize(std::size_t(n));
  return out;
}

std::vector<float> decode_floats_b64(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::ProtocolVersionMismatch, "base64 length is not a multiple of 4");
  std::string bytes(text.size() / 4 * 3 + 1, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(bytes.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), int(text.size()));
  if (n < 0) throw Error(ErrorCode::ProtocolVersionMismatch, "invalid base64");
  std::size_t len = std::size_t(n);
  // EVP_DecodeBlock counts padding as zero bytes.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  if (len % 4 != 0) throw Error(ErrorCode::ProtocolVersionMismatch, "payload is not a float32 array");
  std::vector<float> out(len / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(little_endian(v));
  }
  return out;
}

std::string sds_request_body(const GuidanceRequest& request) {
  json j;
  j["protocol_version"] = kProtocolVersion;
  j["prompt"] = request.prompt;
  j["height"] = request.image.height;
  j["width"] = request.image.width;
  j["channels"] = request.image.channels;
  j["view"] = {{"azimuth", request.view.azimuth_deg}, {"elevation", request.view.elevation_deg}};
  if (request.noise_level) j["t"] = *request.noise_level;
  j["image_b64"] = encode_image(request.image);
  if (!request.request_id.empty()) j["request_id"] = request.request_id;
  return j.dump();
}

GuidanceResponse parse_sds_response(std::string_view body, const GuidanceRequest& request) {
  const json j = parse_json_body(body);
  GuidanceResponse out;
  out.grad_image = decode_image(j, "grad_b64", request.image.height, request.image.width, request.image.channels);
  try {
    if (j.contains("t_used") && !j.at("t_used").is_null()) out.t_used = j.at("t_used").get<int>();
    if (!j.contains("provider")) protocol_error("response lacks provider");
    out.provider = j.at("provider").get<std::string>();
  } catch (const json::exception& e) {
    protocol_error(std::string("malformed response: ") + e.what());
  }
  return out;
}

GuidanceResponse remote_sds_guidance(const RemoteConfig& cfg, const GuidanceRequest& request) {
  if (request.prompt.empty()) throw Error(ErrorCode::ProviderError, "PROMPT_EMPTY: prompt is empty");
  const std::string body =
      post_json(cfg, "/v1/sds_grad", sds_request_body(request), request.request_id, ErrorCode::Transport);
  return parse_sds_response(body, request);
}

ClipScores remote_clip_score(const RemoteConfig& cfg, std::string_view prompt, std::span<const Image<float>> frames) {
  if (frames.empty()) throw Error(ErrorCode::ValidationError, "clip_score needs at least one frame");
  json j;
  j["protocol_version"] = kProtocolVersion;
  j["prompt"] = prompt;
  j["height"] = frames.front().height;
  j["width"] = frames.front().width;
  j["channels"] = frames.front().channels;
  json images = json::array();
  for (const Image<float>& f : frames) {
    require_same_shape(f, frames.front(), "clip_score frames");
    images.push_back(encode_image(f));
  }
  j["image_b64"] = std::move(images);
  const json r = parse_json_body(post_json(cfg, "/v1/clip_score", j.dump(), "", ErrorCode::Transport));
  ClipScores out;
  try {
    out.scores = r.at("scores").get<std::vector<double>>();
    out.mean = r.at("mean").get<double>();
  } catch (const json::exception& e) {
    protocol_error(std::string("malformed clip_score response: ") + e.what());
  }
  if (out.scores.size() != frames.size()) protocol_error("clip_score returned the wrong number of scores");
  return out;
}

Image<float> remote_decode(const RemoteConfig& cfg, const Image<float>& latent) {
  json j;
  j["protocol_version"] = kProtocolVersion;
  j["height"] = latent.height;
  j["width"] = latent.width;
  j["channels"] = latent.channels;
  j["image_b64"] = encode_image(latent);
  const json r = parse_json_body(post_json(cfg, "/v1/decode", j.dump(), "", ErrorCode::DecodeUnavailable));
  int h = 0, w = 0, c = 0;
  try {
    h = r.at("height").get<int>();
    w = r.at("width").get<int>();
    c = r.at("channels").get<int>();
  } catch (const json::exception& e) {
    protocol_error(std::string("malformed decode response: ") + e.what());
  }
  return decode_image(r, "image_b64", h, w, c);
}

}  // namespace componerf
