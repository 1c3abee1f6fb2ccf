#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "agenticsum/mock_backend.hpp"
#include "agenticsum/remote.hpp"
#include "oracles.hpp"

using namespace agenticsum;
using remote::json;

TEST(Base64, KnownVectors) {
  auto bytes = [](std::string_view s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  EXPECT_EQ(remote::b64::encode(bytes("")), "");
  EXPECT_EQ(remote::b64::encode(bytes("f")), "Zg==");
  EXPECT_EQ(remote::b64::encode(bytes("fo")), "Zm8=");
  EXPECT_EQ(remote::b64::encode(bytes("foo")), "Zm9v");
  EXPECT_EQ(remote::b64::encode(bytes("foobar")), "Zm9vYmFy");
  EXPECT_EQ(remote::b64::decode("Zm9vYmE="), bytes("fooba"));
  EXPECT_THROW(remote::b64::decode("Zm9*"), ParseError);
}

TEST(Base64, Float32RoundTrip) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(37);
  for (auto& x : v) x = static_cast<float>(u(rng));
  EXPECT_EQ(remote::decode_f32(remote::encode_f32(v)), v);
  // 1.0f is 00 00 80 3F little-endian.
  EXPECT_EQ(remote::encode_f32({1.0}), "AACAPw==");
}

TEST(Wire, GenerationRoundTripBothEncodings) {
  const MockBackend mock;
  const auto gen = mock.score({"Note: cough and fever. End", 6, 22}, "cough noted");
  EXPECT_EQ(remote::decode_generation(remote::encode_generation(gen, false)), gen);
  const auto packed = remote::decode_generation(remote::encode_generation(gen, true));
  ASSERT_EQ(packed.step_attentions.size(), gen.step_attentions.size());
  for (std::size_t s = 0; s < gen.step_attentions.size(); ++s) {
    const auto& a = gen.step_attentions[s];
    const auto& b = packed.step_attentions[s];
    ASSERT_EQ(a.weights.size(), b.weights.size());
    for (std::size_t i = 0; i < a.weights.size(); ++i) EXPECT_NEAR(a.weights[i], b.weights[i], 1e-7);
  }
}

TEST(Wire, AttentionRoundTrip) {
  const MockBackend mock;
  const auto a = mock.sentence_attention("Blood cultures remained negative.");
  EXPECT_EQ(remote::decode_attention(remote::encode_attention(a, false)), a);
}

TEST(Wire, RaggedStepIsParseError) {
  json j = {{"text", "a"},
            {"tokens", {{{"text", "a"}, {"start", 0}, {"end", 1}}}},
            {"step_attentions", {{{"step", 1}, {"heads", {{0.5, 0.5}, {1.0}}}}}},
            {"input_positions", {0}}};
  EXPECT_THROW(remote::decode_generation(j), ParseError);
}

TEST(Wire, VerdictFromRawText) {
  const auto v = remote::decode_verdict(json{{"raw", oracle::read_fixture("annotation_output.txt")}});
  EXPECT_EQ(v.label, EntailmentLabel::not_entailed);
  EXPECT_EQ(v.problematic_spans, (std::vector<std::string>{"history of diabetes"}));
  EXPECT_THROW(remote::decode_verdict(json{{"raw", "no label"}}), ParseError);
}

namespace {

struct Loopback {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit Loopback(const Backend& backend) {
    remote::mount(server, backend);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~Loopback() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST(RemoteErrors, CapacityMapsFrom413) {
  MockOptions o;
  o.context_limit = 3;
  const MockBackend mock(o);
  Loopback lb(mock);
  const remote::RemoteBackend client({lb.url()});
  try {
    client.generate({"one two three four five", 0, 5}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::capacity);
  }
}

TEST(RemoteErrors, PreconditionKindTravels) {
  const MockBackend mock;
  Loopback lb(mock);
  const remote::RemoteBackend client({lb.url()});
  try {
    client.entail("", "span", "p");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(RemoteErrors, UnreachableIsTransport) {
  remote::RemoteOptions o;
  o.url = "http://127.0.0.1:1";
  o.connect_timeout_s = 1;
  const remote::RemoteBackend client(o);
  try {
    client.sentence_attention("x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport);
  }
}

TEST(RemoteHealth, ReportsModelAndLayer) {
  const MockBackend mock;
  Loopback lb(mock);
  const remote::RemoteBackend client({lb.url()});
  const auto h = client.health();
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["attention_layer"], "final");
  EXPECT_NE(client.identity().find("model=mock"), std::string::npos);
}
