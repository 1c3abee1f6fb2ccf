#include <gtest/gtest.h>

#include "agenticsum/mock_backend.hpp"
#include "agenticsum/trace.hpp"
#include "oracles.hpp"

using namespace agenticsum;

namespace {

RefinementTrace sample(Mode mode) {
  const auto mock = oracle::adversarial_mock();
  PipelineConfig c;
  c.mode = mode;
  return run_pipeline(text::make_document("n1", oracle::read_fixture("discharge_note.txt")), c, mock);
}

}  // namespace

TEST(Trace, RoundTripIsByteStable) {
  for (auto mode : {Mode::vanilla, Mode::draft, Mode::fix_nosup, Mode::full}) {
    const auto tr = sample(mode);
    const auto once = trace::serialize(tr);
    const auto parsed = trace::parse(once);
    EXPECT_EQ(parsed, tr);
    EXPECT_EQ(trace::serialize(parsed), once);
  }
}

TEST(Trace, SchemaFields) {
  const auto j = nlohmann::json::parse(trace::serialize(sample(Mode::full)));
  EXPECT_EQ(j["schema"], "agenticsum-trace/1");
  EXPECT_EQ(j["doc_id"], "n1");
  EXPECT_EQ(j["halt_reason"], "budget");
  EXPECT_EQ(j["manifest"]["templates"]["entailment"], "entailment-prompt/1");
  const auto& span = j["states"][0]["spans"][0];
  for (const char* key : {"text", "a", "h", "flagged"}) EXPECT_TRUE(span.contains(key)) << key;
}

TEST(Trace, RejectsWrongSchemaAndGarbage) {
  EXPECT_THROW(trace::parse("{\"schema\":\"other/9\"}"), ParseError);
  EXPECT_THROW(trace::parse("not json"), ParseError);
  auto text = trace::serialize(sample(Mode::draft));
  text.replace(text.find("\"halt_reason\": \"draft\""), 22, "\"halt_reason\": \"nope!\"");
  EXPECT_THROW(trace::parse(text), Error);
}
