// Copyright 2026 The componerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "componerf/camera.hpp"
#include "componerf/render.hpp"
#include "componerf/types.hpp"

namespace componerf {

inline constexpr int kProtocolVersion = 1;

struct ViewAngles {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

struct GuidanceRequest {
  Image<float> image;
  std::string prompt;
  ViewAngles view;
  std::optional<int> noise_level;  // pinned t; nullopt leaves the choice to the provider
  std::string request_id;

  // In-process only; never sent over the wire.
  ViewTag subject;
  std::optional<Camera> camera;
};

struct GuidanceResponse {
  Image<float> grad_image;
  std::optional<int> t_used;
  std::string provider;
  std::optional<double> loss;  // only providers with a scalar objective report one
};

/// Appends exactly one view cue: overhead above 60 degrees elevation, else
/// front (|az| < 45), back (|az| > 135) or side.
std::string augment_prompt(std::string_view prompt, ViewAngles view);

/// Gradient of 0.5 * |image - target|^2.
GuidanceResponse mock_guidance(const GuidanceRequest& request, const Image<float>& target);

/// Produces image-space gradients for rendered views. Implementations must
/// not keep per-request state that changes later answers.
class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual GuidanceResponse guide(const GuidanceRequest& request) = 0;
  virtual std::string tag() const = 0;
};

class MockGuidance final : public GuidanceProvider {
 public:
  using TargetSource = std::function<Image<float>(const GuidanceRequest&)>;

  explicit MockGuidance(TargetSource targets) : targets_(std::move(targets)) {}

  GuidanceResponse guide(const GuidanceRequest& request) override {
    return mock_guidance(request, targets_(request));
  }
  std::string tag() const override { return "mock"; }

 private:
  TargetSource targets_;
};

struct RemoteConfig {
  std::string url;  // scheme://host:port
  int max_attempts = 3;
  double timeout_s = 60.0;
  double retry_delay_s = 0.2;
};

// Wire codec: base64 of little-endian float32, row-major H*W*C.
std::string encode_floats_b64(std::span<const float> values);
std::vector<float> decode_floats_b64(std::string_view text);

std::string sds_request_body(const GuidanceRequest& request);
/// Throws ProtocolVersionMismatch unless the body is a well-formed response
/// whose gradient matches the request shape.
GuidanceResponse parse_sds_response(std::string_view body, const GuidanceRequest& request);

/// POST /v1/sds_grad with idempotent retries on transport failure.
GuidanceResponse remote_sds_guidance(const RemoteConfig& cfg, const GuidanceRequest& request);

class RemoteGuidance final : public GuidanceProvider {
 public:
  explicit RemoteGuidance(RemoteConfig cfg) : cfg_(std::move(cfg)) {}
  GuidanceResponse guide(const GuidanceRequest& request) override { return remote_sds_guidance(cfg_, request); }
  std::string tag() const override { return "remote:" + cfg_.url; }

 private:
  RemoteConfig cfg_;
};

struct ClipScores {
  std::vector<double> scores;
  double mean = 0.0;
};

/// POST /v1/clip_score with RGB frames.
ClipScores remote_clip_score(const RemoteConfig& cfg, std::string_view prompt, std::span<const Image<float>> frames);

/// POST /v1/decode: latent (c = 4) to RGB. Throws DecodeUnavailable when the
/// service cannot be reached.
Image<float> remote_decode(const RemoteConfig& cfg, const Image<float>& latent);

}  // namespace componerf
