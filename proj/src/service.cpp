#include "latentblur/service.hpp"

#include "latentblur/image_io.hpp"
#include "latentblur/latent.hpp"

#include "httplib.h"
#include "json.hpp"

#include <array>
#include <cmath>

namespace latentblur {

using nlohmann::json;

std::string base64_decode(std::string_view text) {
  // Accept an optional data: URL prefix as produced by browsers.
  if (text.rfind("data:", 0) == 0) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw std::invalid_argument("malformed data URL");
    text.remove_prefix(comma + 1);
  }
  static const std::array<int, 256> table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const char* chars = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(chars[i])] = i;
    t['-'] = 62;
    t['_'] = 63;
    return t;
  }();
  std::string out;
  out.reserve(text.size() * 3 / 4);
  unsigned buffer = 0;
  int bits = 0;
  for (char ch : text) {
    if (ch == '=') break;
    if (ch == '\n' || ch == '\r' || ch == ' ') continue;
    const int v = table[static_cast<unsigned char>(ch)];
    if (v < 0) throw std::invalid_argument("invalid base64 character");
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

namespace {

HttpReply json_reply(int status, const json& body) { return {status, "application/json", body.dump(), ""}; }

HttpReply error_reply(int status, const std::string& message) { return json_reply(status, {{"error", message}}); }

/// Request fields are validated here; any failure becomes a 400.
struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json parse_body(const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw BadRequest("request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw BadRequest(std::string("malformed JSON: ") + e.what());
  }
}

int level_field(const json& j, const char* key) {
  if (!j.contains(key)) throw BadRequest(std::string("missing field '") + key + "'");
  if (!j.at(key).is_number_integer()) throw BadRequest(std::string("field '") + key + "' must be an integer");
  return j.at(key).get<int>();
}

double alpha_field(const json& j) {
  if (!j.contains("alpha")) throw BadRequest("missing field 'alpha'");
  if (!j.at("alpha").is_number()) throw BadRequest("field 'alpha' must be a number");
  const double a = j.at("alpha").get<double>();
  if (!std::isfinite(a)) throw BadRequest("alpha must be finite");
  return a;
}

/// Level reached by a blend of (hi, lo) at weight alpha, if it is an integer.
std::optional<int> implied_level(int hi, int lo, double alpha, bool extrapolating) {
  const double level = extrapolating ? lo + (hi - lo) / alpha : lo + alpha * (hi - lo);
  const double rounded = std::round(level);
  if (std::abs(level - rounded) > 1e-6) return std::nullopt;
  return static_cast<int>(rounded);
}

}  // namespace

InferenceService::InferenceService(std::shared_ptr<const Autoencoder<float>> model, CheckpointMetadata meta,
                                   const std::vector<ZStackSlide>& catalog, const ImageStore& store)
    : model_(std::move(model)), meta_(std::move(meta)), tag_(meta_.tag()) {
  if (!model_) throw std::invalid_argument("InferenceService: null model");
  for (const ZStackSlide& s : catalog) {
    if (cache_.count(s.slide_id)) throw std::invalid_argument("duplicate catalog slide " + s.slide_id);
    cache_[s.slide_id] = {tag_, std::make_shared<const SlideLatents>(encode_slide(*model_, s, store))};
  }
}

std::shared_ptr<const SlideLatents> InferenceService::cached(const std::string& slide_id) const {
  std::lock_guard lock(cache_mutex_);
  const auto it = cache_.find(slide_id);
  if (it == cache_.end()) return nullptr;
  if (it->second.tag != tag_) {
    // Stale entry: rebuild from the stored crops with the current model.
    auto fresh = std::make_shared<SlideLatents>(*it->second.latents);
    std::vector<Image> crops;
    for (int z : fresh->levels) crops.push_back(fresh->crops.at(z));
    fresh->latents = model_->encode(stack_images(crops));
    it->second = {tag_, std::move(fresh)};
  }
  return it->second.latents;
}

std::optional<HttpReply> InferenceService::require_model() const {
  if (!model_) return error_reply(503, "no model loaded");
  return std::nullopt;
}

HttpReply InferenceService::image_reply(const Image& image, const std::string& metadata) const {
  return {200, "image/png", encode_png(image, 8), metadata};
}

Image InferenceService::prepare_upload(const std::string& base64_png, std::vector<std::string>& warnings) const {
  Image img;
  try {
    img = decode_png(base64_decode(base64_png));
  } catch (const std::exception& e) {
    throw BadRequest(std::string("upload is not a decodable PNG: ") + e.what());
  }
  const Index size = model_->config().input_size;
  const Index shorter = std::min(img.height, img.width);
  if (shorter == 0) throw BadRequest("upload is empty");
  const Index h = std::max<Index>(size, static_cast<Index>(std::lround(double(img.height) * size / shorter)));
  const Index w = std::max<Index>(size, static_cast<Index>(std::lround(double(img.width) * size / shorter)));
  warnings.push_back("uploaded image of " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                     " resized and center-cropped to " + std::to_string(size) + "x" + std::to_string(size) +
                     "; out-of-distribution input");
  return center_crop(resize_bilinear(img, h, w), size);
}

HttpReply InferenceService::health() const {
  if (!model_) return json_reply(503, {{"status", "unavailable"}, {"checkpoint_tag", nullptr}});
  return json_reply(200, {{"status", "ok"},
                          {"checkpoint_tag", tag_},
                          {"mode", to_string(meta_.mode)},
                          {"channel", to_string(meta_.channel)},
                          {"epoch", meta_.epoch},
                          {"image_size", model_->config().input_size}});
}

HttpReply InferenceService::slides() const {
  json out = json::array();
  std::lock_guard lock(cache_mutex_);
  for (const auto& [id, entry] : cache_) out.push_back({{"slide_id", id}, {"levels", entry.latents->levels}});
  return json_reply(200, out);
}

HttpReply InferenceService::reconstruct(const std::string& body) const {
  if (auto r = require_model()) return *r;
  try {
    const json j = parse_body(body);
    std::vector<std::string> warnings;
    Vector<float> z;
    json meta = {{"checkpoint_tag", tag_}};
    if (j.contains("upload")) {
      const Image x = prepare_upload(j.at("upload").get<std::string>(), warnings);
      z = model_->encode(stack_images(std::span<const Image>(&x, 1)));
    } else {
      const std::string id = j.value("slide_id", "");
      const auto s = cached(id);
      if (!s) return error_reply(404, "unknown slide '" + id + "'");
      const int level = level_field(j, "level");
      if (!s->has(level)) return error_reply(400, "slide " + id + " has no level " + std::to_string(level));
      z = s->latent(level);
      meta["slide_id"] = id;
      meta["level"] = level;
    }
    meta["warnings"] = warnings;
    return image_reply(decode_latent(*model_, z), meta.dump());
  } catch (const BadRequest& e) {
    return error_reply(400, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("malformed request: ") + e.what());
  }
}

HttpReply InferenceService::deblur(const std::string& body) const {
  if (auto r = require_model()) return *r;
  try {
    const json j = parse_body(body);
    const double alpha = alpha_field(j);
    if (!(alpha > 0.0 && alpha <= 1.0)) return error_reply(400, "alpha must lie in (0, 1] for deblurring");
    const bool by_slide = j.contains("slide_id");
    const bool by_upload = j.contains("upload_b") || j.contains("upload_c");
    if (by_slide == by_upload) return error_reply(400, "give either slide_id or both upload_b and upload_c");

    json meta = {{"checkpoint_tag", tag_}, {"alpha", alpha}, {"psnr_if_ground_truth", nullptr}};
    std::vector<std::string> warnings;
    Vector<float> zb, zc;
    std::shared_ptr<const SlideLatents> s;
    int level_b = 0, level_c = 0;
    if (by_slide) {
      const std::string id = j.at("slide_id").get<std::string>();
      s = cached(id);
      if (!s) return error_reply(404, "unknown slide '" + id + "'");
      level_b = level_field(j, "level_b");
      level_c = level_field(j, "level_c");
      if (!s->has(level_b) || !s->has(level_c)) return error_reply(400, "requested level not in catalog for " + id);
      if (!(level_b > level_c)) return error_reply(400, "level_b must be less blurred (higher) than level_c");
      zb = s->latent(level_b);
      zc = s->latent(level_c);
      meta["slide_id"] = id;
      meta["level_b"] = level_b;
      meta["level_c"] = level_c;
    } else {
      if (!j.contains("upload_b") || !j.contains("upload_c")) return error_reply(400, "both upload_b and upload_c are required");
      const std::array<Image, 2> x{prepare_upload(j.at("upload_b").get<std::string>(), warnings),
                                   prepare_upload(j.at("upload_c").get<std::string>(), warnings)};
      const Matrix<float> z = model_->encode(stack_images(std::span<const Image>(x)));
      zb = z.col(0);
      zc = z.col(1);
    }
    const Vector<float> za = extrapolate_latents(zb, zc, static_cast<float>(alpha));
    const Image y = decode_latent(*model_, za);
    if (s) {
      std::optional<int> target = j.contains("target_level") ? std::optional(level_field(j, "target_level"))
                                                             : implied_level(level_b, level_c, alpha, true);
      if (target) meta["target_level"] = *target;
      if (target && s->has(*target)) meta["psnr_if_ground_truth"] = psnr(s->crops.at(*target), y);
    }
    meta["warnings"] = warnings;
    return image_reply(y, meta.dump());
  } catch (const BadRequest& e) {
    return error_reply(400, e.what());
  } catch (const LatentError& e) {
    return error_reply(400, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("malformed request: ") + e.what());
  }
}

HttpReply InferenceService::blur(const std::string& body) const {
  if (auto r = require_model()) return *r;
  try {
    const json j = parse_body(body);
    const double alpha = alpha_field(j);
    if (!(alpha >= 0.0 && alpha <= 1.0)) return error_reply(400, "alpha must lie in [0, 1] for blur synthesis");
    if (!j.contains("slide_id")) return error_reply(400, "missing field 'slide_id'");
    const std::string id = j.at("slide_id").get<std::string>();
    const auto s = cached(id);
    if (!s) return error_reply(404, "unknown slide '" + id + "'");
    const int level_a = level_field(j, "level_a");
    const int level_c = level_field(j, "level_c");
    if (!s->has(level_a) || !s->has(level_c)) return error_reply(400, "requested level not in catalog for " + id);
    const Vector<float> z = interpolate_latents(s->latent(level_a), s->latent(level_c), static_cast<float>(alpha));
    const Image y = decode_latent(*model_, z);
    json meta = {{"checkpoint_tag", tag_}, {"alpha", alpha},       {"slide_id", id},
                 {"level_a", level_a},     {"level_c", level_c},   {"psnr_if_ground_truth", nullptr},
                 {"warnings", json::array()}};
    if (const auto target = implied_level(level_a, level_c, alpha, false)) {
      meta["target_level"] = *target;
      if (s->has(*target)) meta["psnr_if_ground_truth"] = psnr(s->crops.at(*target), y);
    }
    return image_reply(y, meta.dump());
  } catch (const BadRequest& e) {
    return error_reply(400, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("malformed request: ") + e.what());
  }
}

HttpReply InferenceService::projection(const std::string& slide_id) const {
  if (auto r = require_model()) return *r;
  const auto s = cached(slide_id);
  if (!s) return error_reply(404, "unknown slide '" + slide_id + "'");
  const LatentTrajectory t = s->trajectory();
  try {
    const Projection2D p = pca_project_2d(t.latents);
    json points = json::array();
    for (Index i = 0; i < t.size(); ++i) {
      points.push_back({{"z_level", t.z_levels[static_cast<std::size_t>(i)]},
                        {"pc1", p.points(i, 0)},
                        {"pc2", p.points(i, 1)}});
    }
    return json_reply(200, {{"slide_id", slide_id},
                            {"points", points},
                            {"explained_variance_ratio", {p.explained_ratio[0], p.explained_ratio[1]}}});
  } catch (const MetricError& e) {
    return error_reply(422, e.what());
  }
}

void InferenceService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    if (!reply.metadata.empty()) res.set_header("X-Result-Metadata", reply.metadata);
    res.set_content(reply.body, reply.content_type);
  };
  server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Expose-Headers", "X-Result-Metadata");
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Get("/api/slides", [this, send](const httplib::Request&, httplib::Response& res) { send(res, slides()); });
  server.Get("/api/projection", [this, send](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("slide_id")) return send(res, error_reply(400, "missing query parameter slide_id"));
    send(res, projection(req.get_param_value("slide_id")));
  });
  server.Post("/api/reconstruct",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, reconstruct(req.body)); });
  server.Post("/api/deblur",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, deblur(req.body)); });
  server.Post("/api/blur", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, blur(req.body)); });
}

}  // namespace latentblur
