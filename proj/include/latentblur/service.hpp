#pragma once

#include "latentblur/checkpoint.hpp"
#include "latentblur/evaluation.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace latentblur {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::string metadata;  // JSON, sent as X-Result-Metadata with image bodies
};

/**
 * Read-only inference backend for interactive deblurring and blur synthesis.
 *
 * Latents of every catalog slide are encoded once at construction, so each
 * slider request costs a single decode. Cache entries carry the checkpoint
 * tag and are re-validated on every hit. Handlers only read shared state and
 * are safe to call from many threads.
 */
class InferenceService {
 public:
  /// A service without a model: health reports 503 and inference routes refuse.
  InferenceService() = default;
  InferenceService(std::shared_ptr<const Autoencoder<float>> model, CheckpointMetadata meta,
                   const std::vector<ZStackSlide>& catalog, const ImageStore& store);

  bool has_model() const { return model_ != nullptr; }
  const std::string& checkpoint_tag() const { return tag_; }

  HttpReply health() const;
  HttpReply slides() const;
  HttpReply reconstruct(const std::string& body) const;
  HttpReply deblur(const std::string& body) const;
  HttpReply blur(const std::string& body) const;
  HttpReply projection(const std::string& slide_id) const;

  /// Registers the /api routes and CORS handling on `server`.
  void mount(httplib::Server& server) const;

 private:
  struct CacheEntry {
    std::string tag;
    std::shared_ptr<const SlideLatents> latents;
  };

  /// nullptr for unknown slides; re-encodes entries whose tag no longer matches the model.
  std::shared_ptr<const SlideLatents> cached(const std::string& slide_id) const;
  std::optional<HttpReply> require_model() const;
  HttpReply image_reply(const Image& image, const std::string& metadata) const;
  Image prepare_upload(const std::string& base64_png, std::vector<std::string>& warnings) const;

  std::shared_ptr<const Autoencoder<float>> model_;
  CheckpointMetadata meta_;
  std::string tag_;
  mutable std::map<std::string, CacheEntry> cache_;
  mutable std::mutex cache_mutex_;
};

std::string base64_decode(std::string_view text);

}  // namespace latentblur
