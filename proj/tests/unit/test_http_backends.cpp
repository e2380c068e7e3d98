#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <thread>

#include <httplib.h>
#include <spdlog/sinks/ringbuffer_sink.h>

#include "genmix/base64.hpp"
#include "genmix/edit_backend.hpp"
#include "genmix/faithful_filter.hpp"
#include "test_support.hpp"

using namespace genmix;

namespace {

/// httplib server on an ephemeral loopback port, stopped on destruction.
class LocalServer {
public:
    explicit LocalServer(const std::function<void(httplib::Server&)>& routes) {
        routes(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string url(const std::string& prefix = "") const {
        return "http://127.0.0.1:" + std::to_string(port_) + prefix;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

HttpOptions fast_options() {
    HttpOptions o;
    o.retry.initial_backoff = std::chrono::milliseconds(5);
    o.timeout = std::chrono::milliseconds(2000);
    return o;
}

void reply_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

/// Captures genmix log lines for the lifetime of the object.
class LogCapture {
public:
    LogCapture() : sink_(std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(64)) {
        logger()->sinks().push_back(sink_);
    }
    ~LogCapture() {
        auto& sinks = logger()->sinks();
        sinks.erase(std::remove(sinks.begin(), sinks.end(), sink_), sinks.end());
    }
    bool contains(const std::string& needle) const {
        for (const auto& line : sink_->last_formatted())
            if (line.find(needle) != std::string::npos) return true;
        return false;
    }

private:
    std::shared_ptr<spdlog::sinks::ringbuffer_sink_mt> sink_;
};

}  // namespace

TEST(HttpEdit, EchoServerRoundTripsExactly) {
    nlohmann::json seen;
    LocalServer server([&](httplib::Server& s) {
        s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
        s.Post("/v1/edit", [&](const httplib::Request& req, httplib::Response& res) {
            seen = nlohmann::json::parse(req.body);
            reply_json(res, {{"image", seen["image"]}, {"model", "echo-1"}});
        });
    });
    HttpEditBackend backend(server.url(), fast_options());
    EXPECT_TRUE(backend.healthy());
    Image img = genmix::testing::random_image(4, 4, 11);
    EditedImage out = backend.edit({img, "A transformed version of image into sunset", 77, "s", "sunset"});
    EXPECT_EQ(out.image, img);
    EXPECT_EQ(seen["instruction"], "A transformed version of image into sunset");
    EXPECT_EQ(seen["seed"], 77);
    EXPECT_EQ(backend.last_model(), "echo-1");
}

TEST(HttpEdit, PathPrefixIsHonoured) {
    LocalServer server([&](httplib::Server& s) {
        s.Get("/svc/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("", "text/plain"); });
        s.Post("/svc/v1/edit", [&](const httplib::Request& req, httplib::Response& res) {
            reply_json(res, {{"image", nlohmann::json::parse(req.body)["image"]}, {"model", "m"}});
        });
    });
    HttpEditBackend backend(server.url("/svc/"), fast_options());
    EXPECT_TRUE(backend.healthy());
    Image img = genmix::testing::random_image(3, 5, 1);
    EXPECT_EQ(backend.edit({img, "x", 1, "s", "p"}).image, img);
}

TEST(HttpEdit, ServiceUnavailableIsRetriedThenSurfaced) {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/edit", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            res.status = 503;
            res.set_content("model warming up", "text/plain");
        });
    });
    HttpEditBackend backend(server.url(), fast_options());
    try {
        backend.edit({genmix::testing::random_image(4, 4, 1), "x", 1, "s", "p"});
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_EQ(e.status(), 503);
        EXPECT_NE(std::string(e.what()).find("model warming up"), std::string::npos);
    }
    EXPECT_EQ(calls.load(), 3);
}

TEST(HttpEdit, TransientFailureRecovers) {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/edit", [&](const httplib::Request& req, httplib::Response& res) {
            if (++calls < 3) {
                res.status = 429;
                return;
            }
            reply_json(res, {{"image", nlohmann::json::parse(req.body)["image"]}, {"model", "m"}});
        });
    });
    HttpEditBackend backend(server.url(), fast_options());
    Image img = genmix::testing::random_image(4, 4, 2);
    EXPECT_EQ(backend.edit({img, "x", 1, "s", "p"}).image, img);
    EXPECT_EQ(calls.load(), 3);
}

TEST(HttpEdit, TimeoutIsRetryable) {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/edit", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            std::this_thread::sleep_for(std::chrono::milliseconds(400));
            res.status = 500;
        });
    });
    HttpOptions o = fast_options();
    o.timeout = std::chrono::milliseconds(100);
    o.retry.attempts = 2;
    HttpEditBackend backend(server.url(), o);
    EXPECT_THROW(backend.edit({genmix::testing::random_image(4, 4, 1), "x", 1, "s", "p"}), BackendError);
    EXPECT_EQ(calls.load(), 2);
}

TEST(HttpEdit, ClientErrorsAreNotRetried) {
    std::atomic<int> calls{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/edit", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            reply_json(res, {{"error", "missing field instruction"}}, 400);
        });
    });
    HttpEditBackend backend(server.url(), fast_options());
    try {
        backend.edit({genmix::testing::random_image(4, 4, 1), "x", 1, "s", "p"});
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_EQ(e.status(), 400);
        EXPECT_NE(std::string(e.what()).find("instruction"), std::string::npos);
    }
    EXPECT_EQ(calls.load(), 1);
}

TEST(HttpEdit, ProtocolViolationsAreFatal) {
    std::atomic<int> calls{0};
    std::atomic<int> mode{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/edit", [&](const httplib::Request&, httplib::Response& res) {
            ++calls;
            switch (mode.load()) {
                case 0: reply_json(res, {{"image", "%%%not base64%%%"}}); break;
                case 1: reply_json(res, {{"image", base64_encode(std::vector<unsigned char>{1, 2, 3})}}); break;
                case 2: reply_json(res, {{"model", "m"}}); break;
                default: res.set_content("not json", "application/json");
            }
        });
    });
    HttpEditBackend backend(server.url(), fast_options());
    for (int m = 0; m < 4; ++m) {
        mode = m;
        calls = 0;
        EXPECT_THROW(backend.edit({genmix::testing::random_image(4, 4, 1), "x", 1, "s", "p"}), ProtocolError) << m;
        EXPECT_EQ(calls.load(), 1);
    }
}

TEST(HttpEdit, MismatchedSizeIsResizedAndLogged) {
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/edit", [&](const httplib::Request&, httplib::Response& res) {
            reply_json(res, {{"image", base64_encode(encode_png(genmix::testing::horizontal_gradient(256, 256)))},
                             {"model", "big"}});
        });
    });
    LogCapture logs;
    HttpEditBackend backend(server.url(), fast_options());
    Image out = backend.edit({Image(224, 224, 0.5f), "x", 1, "img1", "sunset"}).image;
    ASSERT_EQ(out.size(), (Size{224, 224}));
    // The served gradient is quantized to 8 bits; allow for that.
    for (int x = 0; x < 224; ++x)
        ASSERT_NEAR(out.at(100, x, 0), genmix::testing::resized_gradient_oracle(x, 256, 224), 0.6 / 255.0) << x;
    EXPECT_TRUE(logs.contains("resizing to 224x224"));
    EXPECT_TRUE(logs.contains("img1"));
}

TEST(HttpEdit, UnreachableServerIsUnhealthyAndFails) {
    HttpOptions o = fast_options();
    o.timeout = std::chrono::milliseconds(200);
    o.retry.attempts = 2;
    // Port 9 (discard) on loopback is closed in the test environment.
    HttpEditBackend backend("http://127.0.0.1:9", o);
    EXPECT_FALSE(backend.healthy());
    EXPECT_THROW(backend.edit({genmix::testing::random_image(4, 4, 1), "x", 1, "s", "p"}), BackendError);
}

TEST(HttpEmbed, ParsesVectorsAndPinsDimension) {
    std::atomic<int> dim{4};
    LocalServer server([&](httplib::Server& s) {
        s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
        s.Post("/v1/embed", [&](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            Image img = decode_image(base64_decode(body["image"].get<std::string>()));
            std::vector<double> v(static_cast<std::size_t>(dim.load()), 0.0);
            v[0] = img.at(0, 0, 0) + 0.1;
            v[1] = 1.0;
            reply_json(res, {{"vector", v}, {"model", "fake"}});
        });
    });
    HttpEmbedder embedder(server.url(), fast_options());
    EXPECT_TRUE(embedder.healthy());
    auto a = embedder.embed(Image(4, 4, 230.0f / 255.0f));  // on the 8-bit grid, survives PNG transport
    EXPECT_EQ(a.dimension(), 4u);
    EXPECT_NEAR(a.values()[0], 230.0 / 255.0 + 0.1, 1e-6);
    dim = 5;
    EXPECT_THROW(embedder.embed(Image(4, 4, 0.9f)), ProtocolError);
}

TEST(HttpEmbed, RejectsMalformedVectors) {
    std::atomic<int> mode{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/embed", [&](const httplib::Request&, httplib::Response& res) {
            switch (mode.load()) {
                case 0: reply_json(res, {{"vector", nlohmann::json::array()}}); break;
                case 1: reply_json(res, {{"vector", {1, "a"}}}); break;
                case 2: reply_json(res, {{"vector", {0, 0, 0}}}); break;
                default: reply_json(res, {{"model", "m"}});
            }
        });
    });
    for (int m = 0; m < 4; ++m) {
        mode = m;
        HttpEmbedder embedder(server.url(), fast_options());
        EXPECT_THROW(embedder.embed(Image(2, 2)), ProtocolError) << m;
    }
}

TEST(Endpoint, Parsing) {
    auto e = Endpoint::parse("localhost:8000/api/");
    EXPECT_EQ(e.base, "http://localhost:8000");
    EXPECT_EQ(e.prefix, "/api");
    EXPECT_EQ(e.url("/v1/edit"), "http://localhost:8000/api/v1/edit");
    EXPECT_THROW(Endpoint::parse("https://x"), DomainError);
    EXPECT_THROW(Endpoint::parse("http:///x"), DomainError);
    EXPECT_TRUE(is_retryable_status(503));
    EXPECT_TRUE(is_retryable_status(408));
    EXPECT_FALSE(is_retryable_status(404));
}
