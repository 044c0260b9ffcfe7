#include "doctest.h"
#include "integration_support.hpp"

#include "latentblur/checkpoint.hpp"
#include "latentblur/image_io.hpp"
#include "latentblur/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <set>
#include <thread>

using namespace latentblur;
using nlohmann::json;

namespace {

/// A service on an ephemeral localhost port, stopped on destruction.
class RunningServer {
 public:
  explicit RunningServer(const InferenceService& service) {
    service.mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~RunningServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

struct Fixture {
  LoadedModel loaded;
  PreparedData data;
  std::unique_ptr<InferenceService> service;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    const auto& run = testing::shared_run();
    Fixture x;
    x.loaded = load_checkpoint(run.result.best_checkpoint);
    x.data = prepare_data(run.config);
    x.service = std::make_unique<InferenceService>(x.loaded.model, x.loaded.meta, x.data.test, x.data.store);
    return x;
  }();
  return f;
}

httplib::Result post(httplib::Client& c, const std::string& path, const json& body) {
  return c.Post(path, body.dump(), "application/json");
}

}  // namespace

TEST_CASE("health reports the checkpoint, or 503 without one") {
  const InferenceService empty;
  CHECK(empty.health().status == 503);
  CHECK(empty.deblur(R"({"slide_id":"x","level_b":2,"level_c":0,"alpha":0.5})").status == 503);

  const Fixture& f = fixture();
  RunningServer server(*f.service);
  auto c = server.client();
  auto res = c.Get("/api/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  const json h = json::parse(res->body);
  CHECK(h["checkpoint_tag"] == f.loaded.meta.tag());
  CHECK(h["mode"] == "direct");
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");

  auto slides = c.Get("/api/slides");
  REQUIRE(slides);
  const json list = json::parse(slides->body);
  CHECK(list.size() == f.data.test.size());
  CHECK(list[0]["levels"].size() == 9);
}

TEST_CASE("alpha 1 deblurring equals reconstruction of level b") {
  const Fixture& f = fixture();
  RunningServer server(*f.service);
  auto c = server.client();
  const std::string slide = f.data.test.front().slide_id;
  auto rec = post(c, "/api/reconstruct", {{"slide_id", slide}, {"level", 8}});
  auto deb = post(c, "/api/deblur", {{"slide_id", slide}, {"level_b", 8}, {"level_c", 2}, {"alpha", 1.0}});
  REQUIRE(rec);
  REQUIRE(deb);
  CHECK(rec->status == 200);
  CHECK(deb->status == 200);
  CHECK(rec->get_header_value("Content-Type") == "image/png");
  CHECK(deb->body == rec->body);
  const Image img = decode_png(deb->body);
  CHECK(img.height == f.loaded.meta.model.input_size);

  const json meta = json::parse(deb->get_header_value("X-Result-Metadata"));
  CHECK(meta["alpha"] == 1.0);
  CHECK(meta["checkpoint_tag"] == f.loaded.meta.tag());
}

TEST_CASE("invalid requests get 4xx replies") {
  const Fixture& f = fixture();
  RunningServer server(*f.service);
  auto c = server.client();
  const std::string slide = f.data.test.front().slide_id;
  auto zero = post(c, "/api/deblur", {{"slide_id", slide}, {"level_b", 2}, {"level_c", 0}, {"alpha", 0.0}});
  REQUIRE(zero);
  CHECK(zero->status == 400);
  CHECK(json::parse(zero->body).contains("error"));
  auto big = post(c, "/api/deblur", {{"slide_id", slide}, {"level_b", 2}, {"level_c", 0}, {"alpha", 1.5}});
  CHECK(big->status == 400);
  auto unknown = post(c, "/api/deblur", {{"slide_id", "nope"}, {"level_b", 2}, {"level_c", 0}, {"alpha", 0.5}});
  CHECK(unknown->status == 404);
  auto garbage = c.Post("/api/reconstruct", "{not json", "application/json");
  CHECK(garbage->status == 400);
  auto blur = post(c, "/api/blur", {{"slide_id", slide}, {"level_a", 16}, {"level_c", 0}, {"alpha", -0.1}});
  CHECK(blur->status == 400);
  auto options = c.Options("/api/deblur");
  CHECK(options->status == 204);
}

TEST_CASE("deblurring with a target level reports PSNR against ground truth") {
  const Fixture& f = fixture();
  const std::string slide = f.data.test.front().slide_id;
  const HttpReply r = f.service->deblur(
      json{{"slide_id", slide}, {"level_b", 2}, {"level_c", 0}, {"alpha", 0.125}, {"target_level", 16}}.dump());
  REQUIRE(r.status == 200);
  const json meta = json::parse(r.metadata);
  CHECK(meta["psnr_if_ground_truth"].is_number());

  const HttpReply blur = f.service->blur(json{{"slide_id", slide}, {"level_a", 16}, {"level_c", 0}, {"alpha", 0.5}}.dump());
  CHECK(blur.status == 200);
  CHECK(json::parse(blur.metadata)["psnr_if_ground_truth"].is_number());
}

TEST_CASE("uploads are decoded and resized to the model input") {
  const Fixture& f = fixture();
  Rng rng(91);
  const Image upload = testing::random_image(rng, 30, 24);
  const std::string png = encode_png(upload, 8);
  const std::string b64 =
      httplib::detail::base64_encode(png);
  const HttpReply r = f.service->reconstruct(json{{"upload", "data:image/png;base64," + b64}}.dump());
  REQUIRE(r.status == 200);
  CHECK(decode_png(r.body).height == f.loaded.meta.model.input_size);
  CHECK(json::parse(r.metadata)["warnings"].size() >= 1);
  CHECK(base64_decode(b64) == png);
  CHECK(f.service->reconstruct(json{{"upload", "!!!"}}.dump()).status == 400);
}

TEST_CASE("a 64-request parallel storm returns uncorrupted PNGs") {
  const Fixture& f = fixture();
  RunningServer server(*f.service);
  std::vector<json> distinct;
  for (const auto& slide : f.data.test)
    for (double alpha : {0.125, 0.25, 0.5, 1.0})
      distinct.push_back({{"slide_id", slide.slide_id}, {"level_b", 4}, {"level_c", 0}, {"alpha", alpha}});
  distinct.resize(std::min<std::size_t>(distinct.size(), 16));

  // Sequential references.
  std::vector<std::string> reference;
  for (const json& body : distinct) {
    const HttpReply r = f.service->deblur(body.dump());
    REQUIRE(r.status == 200);
    reference.push_back(r.body);
  }

  constexpr int kRequests = 64;
  std::vector<std::string> bodies(kRequests);
  std::vector<int> status(kRequests, 0);
  std::vector<std::thread> threads;
  for (int i = 0; i < kRequests; ++i) {
    threads.emplace_back([&, i] {
      auto c = server.client();
      c.set_read_timeout(120, 0);
      auto res = post(c, "/api/deblur", distinct[static_cast<std::size_t>(i) % distinct.size()]);
      if (res) {
        status[i] = res->status;
        bodies[i] = res->body;
      } else {
        bodies[i] = httplib::to_string(res.error());
      }
    });
  }
  for (auto& t : threads) t.join();

  std::set<std::size_t> hashes, expected;
  for (const std::string& r : reference) expected.insert(std::hash<std::string>{}(r));
  for (int i = 0; i < kRequests; ++i) {
    CHECK_MESSAGE(status[i] == 200, bodies[i]);
    CHECK(bodies[i] == reference[static_cast<std::size_t>(i) % distinct.size()]);
    CHECK_NOTHROW(decode_png(bodies[i]));
    hashes.insert(std::hash<std::string>{}(bodies[i]));
  }
  CHECK(hashes == expected);
}

TEST_CASE("projection returns one point per level") {
  const Fixture& f = fixture();
  RunningServer server(*f.service);
  auto c = server.client();
  auto res = c.Get("/api/projection?slide_id=" + f.data.test.front().slide_id);
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const json p = json::parse(res->body);
  CHECK(p["points"].size() == 9);
  CHECK(c.Get("/api/projection?slide_id=nope")->status == 404);
}
