#include "digdeeper/error.hpp"
#include "digdeeper/llm.hpp"
#include "digdeeper/text.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace digdeeper;

namespace {

CallContext quiet_ctx(CallTrace* trace = nullptr) { return CallContext{RetryPolicy{}, dd_test::no_sleep(), trace}; }

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ChatRequest judge_request() {
    ChatRequest r;
    r.role = "coherence_judge";
    r.user = "Rate this.";
    r.attributes["article"] = "One paragraph.";
    return r;
}

}  // namespace

TEST(PromptTemplate, RenderSubstitutesOnce) {
    const auto t = PromptTemplate::parse("t", "Hi {{name}}, about {{topic}} and {{name}} again.");
    EXPECT_EQ(t.required_placeholders, (std::set<std::string>{"name", "topic"}));
    EXPECT_EQ(render(t, {{"name", "Ada"}, {"topic", "{{name}}"}}), "Hi Ada, about {{name}} and Ada again.");
}

TEST(PromptTemplate, MissingPlaceholderNamesTheSlot) {
    const auto t = PromptTemplate::parse("t", "{{a}} {{b}}");
    try {
        render(t, {{"a", "x"}});
        FAIL();
    } catch (const MissingPlaceholder& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPlaceholder);
        EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
    }
}

TEST(PromptTemplate, ExtraBindingsAndStrayBracesAreHarmless) {
    const auto t = PromptTemplate::parse("t", "a { b } {{ not a slot }} {{x}}");
    EXPECT_EQ(render(t, {{"x", "1"}, {"unused", "2"}}), "a { b } {{ not a slot }} 1");
}

TEST(TemplateSet, DefaultsMatchShippedFiles) {
    const auto defaults = TemplateSet::defaults();
    for (auto role : {PromptRole::Summarizer, PromptRole::Stage1Generator, PromptRole::Reranker,
                      PromptRole::Stage3Rewriter, PromptRole::CoherenceJudge}) {
        const std::string file = std::string(DD_PROMPT_DIR) + "/" + std::string(to_string(role)) + ".txt";
        EXPECT_EQ(TemplateSet::default_file_contents(role), slurp(file)) << file;
        const auto parsed = TemplateSet::parse_role_file(role, slurp(file));
        EXPECT_EQ(parsed.user.body, defaults.get(role).user.body);
        EXPECT_EQ(parsed.system.body, defaults.get(role).system.body);
    }
    EXPECT_TRUE(defaults.get(PromptRole::Reranker).user.required_placeholders.count("candidates"));
    EXPECT_TRUE(defaults.get(PromptRole::Stage3Rewriter).user.required_placeholders.count("recommendations"));
}

TEST(TemplateSet, DirectoryOverridesSingleRoles) {
    dd_test::TempDir dir;
    std::ofstream(dir.file("coherence_judge.txt")) << "Be strict.\n---\nScore: {{article}}\n";
    const auto set = TemplateSet::load(dir.str());
    EXPECT_EQ(render(set.get(PromptRole::CoherenceJudge).user, {{"article", "A"}}), "Score: A");
    EXPECT_EQ(set.get(PromptRole::Reranker).user.body, TemplateSet::defaults().get(PromptRole::Reranker).user.body);
    EXPECT_THROW(TemplateSet::load(dir.file("nope")), Error);
    EXPECT_THROW(TemplateSet::parse_role_file(PromptRole::Summarizer, "no separator here"), Error);
}

TEST(ChatRequest, Validation) {
    ChatRequest r;
    r.user = "x";
    EXPECT_NO_THROW(validate(r));
    r.temperature = 2.5;
    EXPECT_THROW(validate(r), Error);
    r.temperature = 0.0;
    r.max_tokens = 0;
    EXPECT_THROW(validate(r), Error);
    r.max_tokens = 10;
    r.user.clear();
    EXPECT_THROW(validate(r), Error);
}

TEST(ExtractJson, FencedBlocksComeFirst) {
    const auto v = extract_first_json("Sure! {\"a\": 1}\n```json\n{\"b\": 2}\n```");
    ASSERT_TRUE(v);
    EXPECT_EQ(*v, Json::parse(R"({"b": 2})"));
}

TEST(ExtractJson, FirstBalancedValue) {
    EXPECT_EQ(*extract_first_json("prefix [1, {\"x\": \"}\"}] trailing {\"y\": 1}"),
              Json::parse(R"([1, {"x": "}"}])"));
    EXPECT_EQ(*extract_first_json("Score: 7"), Json(7));
    EXPECT_EQ(*extract_first_json("7"), Json(7));
    EXPECT_FALSE(extract_first_json("no json here").has_value());
    EXPECT_FALSE(extract_first_json("{\"unterminated\": ").has_value());
    EXPECT_FALSE(extract_first_json("").has_value());
}

TEST(ExtractJson, SkipsBrokenCandidates) {
    EXPECT_EQ(*extract_first_json("{oops} then {\"ok\": true}"), Json::parse(R"({"ok": true})"));
}

TEST(Schema, ValidationMessagesNameThePath) {
    const auto s = Schema::object({{"n", Schema::integer(1, 10)},
                                   {"tags", Schema::string_list()},
                                   {"items", Schema::array(Schema::object({{"ok", Schema::boolean()}}))}});
    EXPECT_FALSE(validate_against(s, Json::parse(R"({"n": 3, "tags": [], "items": [{"ok": true}]})")));
    auto err = validate_against(s, Json::parse(R"({"n": 11, "tags": [], "items": []})"));
    ASSERT_TRUE(err);
    EXPECT_NE(err->find("n"), std::string::npos);
    err = validate_against(s, Json::parse(R"({"n": 1, "tags": [3], "items": []})"));
    ASSERT_TRUE(err);
    EXPECT_NE(err->find("tags"), std::string::npos);
    err = validate_against(s, Json::parse(R"({"n": 1, "tags": [], "items": [{"ok": "yes"}]})"));
    ASSERT_TRUE(err);
    EXPECT_NE(err->find("ok"), std::string::npos);
    EXPECT_TRUE(validate_against(s, Json::parse(R"({"tags": [], "items": []})")));
    EXPECT_TRUE(validate_against(Schema::integer(), Json(2.5)));
    EXPECT_FALSE(validate_against(Schema::number(0, 1), Json(0.5)));
}

TEST(Schema, SemanticCheckRunsAfterShape) {
    auto s = Schema::object({{"a", Schema::integer()}});
    s.check = [](const Json& j) -> std::optional<std::string> {
        if (j["a"].get<int>() % 2) return "a must be even";
        return std::nullopt;
    };
    EXPECT_FALSE(validate_against(s, Json{{"a", 2}}));
    EXPECT_EQ(validate_against(s, Json{{"a", 3}}).value_or(""), "a must be even");
}

TEST(CompleteStructured, ReasksWithTheValidationError) {
    dd_test::ScriptedChat chat([](const ChatRequest&, int call) -> std::string {
        if (call == 0) return "I think it is great";
        if (call == 1) return "12";
        return "Score: 8";
    });
    const auto v = complete_structured(chat, judge_request(), Schema::integer(1, 10), 2, quiet_ctx());
    EXPECT_EQ(v.parse_attempts, 3);
    EXPECT_EQ(*v.parsed, Json(8));
    const auto reqs = chat.requests();
    ASSERT_EQ(reqs.size(), 3u);
    EXPECT_EQ(reqs[0].user, "Rate this.");
    EXPECT_NE(reqs[1].user.find("Your previous reply could not be used: no JSON value"), std::string::npos);
    EXPECT_NE(reqs[2].user.find("could not be used"), std::string::npos);
    EXPECT_EQ(reqs[2].attributes.at("attempt"), "3");
}

TEST(CompleteStructured, ThrowsAfterEveryAttemptFails) {
    dd_test::ScriptedChat chat([](const ChatRequest&, int) { return std::string("nope"); });
    try {
        complete_structured(chat, judge_request(), Schema::integer(1, 10), 2, quiet_ctx());
        FAIL();
    } catch (const UnparsableVerdict& e) {
        EXPECT_EQ(e.attempts(), 3);
        EXPECT_EQ(e.raw(), "nope");
        EXPECT_EQ(e.code(), ErrorCode::Unparsable);
    }
    EXPECT_EQ(chat.requests().size(), 3u);
    EXPECT_THROW(complete_structured(chat, judge_request(), Schema{}, 2, quiet_ctx()), Error);
}

TEST(Complete, TracesEveryCall) {
    dd_test::ScriptedChat chat([](const ChatRequest& r, int) { return "echo " + r.user; });
    CallTrace trace;
    ChatRequest r = judge_request();
    const auto c = complete(chat, r, quiet_ctx(&trace));
    EXPECT_EQ(c.text, "echo Rate this.");
    EXPECT_EQ(trace.count_role("coherence_judge"), 1u);
    EXPECT_EQ(trace.records()[0].attempts, 1);
    EXPECT_NE(trace.records()[0].prompt_hash, 0u);
}

TEST(MockBackend, Deterministic) {
    MockChatBackend a, b;
    ChatRequest r;
    r.role = "summarizer";
    r.user = "x";
    r.attributes = {{"title", "T"}, {"transcript", dd_test::words(300, "lava")}, {"target_words", "150"}};
    EXPECT_EQ(a.send(r), b.send(r));
    EXPECT_EQ(count_words(a.send(r)), 150u);
}

TEST(MockBackend, UnknownRoleIsBackendError) {
    MockChatBackend m;
    ChatRequest r;
    r.role = "poet";
    r.user = "x";
    try {
        m.send(r);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Backend);
    }
}

TEST(MockBackend, JudgeFaultsRecoverOrFail) {
    const auto schema = Schema::integer(1, 10);
    MockChatBackend once(MockOptions{MockFault::None, MockFault::MalformedFirstAttempt});
    const auto v = complete_structured(once, judge_request(), schema, 2, quiet_ctx());
    EXPECT_EQ(v.parse_attempts, 2);
    ASSERT_TRUE(v.parsed);
    MockChatBackend always(MockOptions{MockFault::None, MockFault::AlwaysMalformed});
    EXPECT_THROW(complete_structured(always, judge_request(), schema, 2, quiet_ctx()), UnparsableVerdict);
}
