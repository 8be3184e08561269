#pragma once

// Background restyling backends: a remote img2img service reached over HTTP,
// and a deterministic stub that perturbs colours and texture in proportion
// to the requested strength.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

// <resolv.h>, pulled in by httplib, defines _res, which Eigen uses as a parameter name.
#ifdef _res
#undef _res
#endif

#include "ltmot/error.hpp"
#include "ltmot/image.hpp"
#include "ltmot/rng.hpp"

namespace ltmot {

struct DiffusionRequest {
  Image image;
  std::string prompt = "A street";
  double strength = 0.4;  // enhancement coefficient
  std::uint64_t seed = 0;
};

inline void validate(const DiffusionRequest& req) {
  if (!(req.strength >= 0.0 && req.strength <= 1.0)) {
    throw Error(ErrorCode::InvalidValue, "diffusion strength must lie in [0,1]");
  }
  if (req.image.data.empty()) throw Error(ErrorCode::InvalidValue, "diffusion request has no image");
}

// ---------------------------------------------------------------------------
// base64

namespace detail {

inline constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const std::uint8_t> in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += kBase64Alphabet[v & 63];
  }
  if (i < in.size()) {
    std::uint32_t v = in[i] << 16;
    if (i + 1 < in.size()) v |= in[i + 1] << 8;
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += (i + 1 < in.size()) ? kBase64Alphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view in) {
  auto value = [](char ch) -> int {
    if (ch >= 'A' && ch <= 'Z') return ch - 'A';
    if (ch >= 'a' && ch <= 'z') return ch - 'a' + 26;
    if (ch >= '0' && ch <= '9') return ch - '0' + 52;
    if (ch == '+' || ch == '-') return 62;
    if (ch == '/' || ch == '_') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  out.reserve(in.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char ch : in) {
    if (ch == '=') break;
    if (ch == '\n' || ch == '\r' || ch == ' ') continue;
    const int v = value(ch);
    if (v < 0) throw Error(ErrorCode::ParseError, "invalid base64 payload");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// clients

class DiffusionClient {
 public:
  virtual ~DiffusionClient() = default;
  virtual Image diffuse(const DiffusionRequest& req) = 0;
};

/// delta(x, y, c) = strength * (colour_shift[c] + block(x/8, y/8, c) + grain(x, y, c)),
/// every term keyed by the request seed only. Strength 0 is the identity, and
/// the mean absolute change grows with strength.
class StubDiffusion final : public DiffusionClient {
 public:
  static constexpr double kColourShift = 96.0;
  static constexpr double kBlockAmplitude = 48.0;
  static constexpr double kGrainAmplitude = 24.0;

  Image diffuse(const DiffusionRequest& req) override {
    validate(req);
    if (req.strength == 0.0) return req.image;
    const Image& in = req.image;
    Image out = in;
    auto signed_unit = [](std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
    std::vector<double> shift(static_cast<std::size_t>(in.channels));
    for (int ch = 0; ch < in.channels; ++ch) {
      shift[ch] = kColourShift * signed_unit(derive_seed(req.seed, {1, static_cast<std::uint64_t>(ch)}));
    }
    for (int y = 0; y < in.height; ++y) {
      for (int x = 0; x < in.width; ++x) {
        const std::uint8_t* src = in.pixel(x, y);
        std::uint8_t* dst = out.pixel(x, y);
        for (int ch = 0; ch < in.channels; ++ch) {
          const double block = kBlockAmplitude * signed_unit(derive_seed(
              req.seed, {2, static_cast<std::uint64_t>(x / 8), static_cast<std::uint64_t>(y / 8),
                         static_cast<std::uint64_t>(ch)}));
          const double grain = kGrainAmplitude * signed_unit(derive_seed(
              req.seed, {3, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y),
                         static_cast<std::uint64_t>(ch)}));
          const double v = src[ch] + req.strength * (shift[ch] + block + grain);
          dst[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
    return out;
  }
};

struct ServiceOptions {
  std::string url = "http://127.0.0.1:7860";
  int timeout_ms = 60000;
  int retries = 2;
  int max_in_flight = 4;
};

/// POST /v1/img2img with {image_b64, prompt, strength, seed}; expects
/// {image_b64} back. Transport failures and 5xx are retried.
class HttpDiffusion final : public DiffusionClient {
 public:
  explicit HttpDiffusion(ServiceOptions opts)
      : opts_(std::move(opts)),
        slots_(std::make_unique<std::counting_semaphore<>>(std::max(1, opts_.max_in_flight))) {}

  Image diffuse(const DiffusionRequest& req) override {
    validate(req);
    nlohmann::json body;
    body["image_b64"] = detail::base64_encode(encode_png(req.image));
    body["prompt"] = req.prompt;
    body["strength"] = req.strength;
    body["seed"] = req.seed;
    const std::string payload = body.dump();

    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    int last_status = 0;
    for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
      httplib::Client cli(opts_.url);
      const auto timeout = std::chrono::milliseconds(opts_.timeout_ms);
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      cli.set_write_timeout(timeout);
      auto res = cli.Post("/v1/img2img", payload, "application/json");
      if (!res) {
        last_status = 0;
        continue;
      }
      last_status = res->status;
      if (res->status >= 500) continue;
      if (res->status != 200) break;
      return decode_response(res->body, req.image);
    }
    if (last_status == 0) throw Error(ErrorCode::ServiceUnreachable, opts_.url);
    throw Error(ErrorCode::ServiceError, "status " + std::to_string(last_status));
  }

  const ServiceOptions& options() const { return opts_; }

 private:
  static Image decode_response(const std::string& body, const Image& request_image) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ServiceError, "response is not JSON");
    }
    if (!j.contains("image_b64") || !j["image_b64"].is_string()) {
      throw Error(ErrorCode::ServiceError, "response lacks image_b64");
    }
    const auto bytes = detail::base64_decode(j["image_b64"].get<std::string>());
    Image img = decode_image(bytes);
    if (img.width != request_image.width || img.height != request_image.height) {
      throw Error(ErrorCode::DimensionMismatch, "service returned " + std::to_string(img.width) + "x" +
                                                    std::to_string(img.height));
    }
    return img;
  }

  ServiceOptions opts_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

enum class DiffusionMode { stub, service };

inline std::unique_ptr<DiffusionClient> make_diffusion_client(DiffusionMode mode, const ServiceOptions& opts = {}) {
  if (mode == DiffusionMode::stub) return std::make_unique<StubDiffusion>();
  return std::make_unique<HttpDiffusion>(opts);
}

}  // namespace ltmot
