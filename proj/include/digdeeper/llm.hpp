#pragma once

#include "digdeeper/http.hpp"
#include "digdeeper/json.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace digdeeper {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

/// Text with `{{name}}` slots. Placeholder names are [A-Za-z0-9_]+.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::set<std::string> required_placeholders;

    /// Builds a template whose required placeholders are every slot in `body`.
    static PromptTemplate parse(std::string name, std::string body);
};

/// Single-pass substitution. Bound values are inserted verbatim and never re-expanded.
std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

/// Pipeline roles that own a prompt.
enum class PromptRole { Summarizer, Stage1Generator, Reranker, Stage3Rewriter, CoherenceJudge };

std::string_view to_string(PromptRole role);

/// System + user templates for one role. On disk: one file per role, the system part
/// first, then a line containing only `---`, then the user part.
struct RolePrompt {
    PromptTemplate system;
    PromptTemplate user;
};

class TemplateSet {
public:
    /// Built-in prompts (identical to the files shipped under prompts/).
    static TemplateSet defaults();
    /// Defaults, overridden by `<dir>/<role>.txt` for every file that exists.
    static TemplateSet load(const std::string& dir);
    static RolePrompt parse_role_file(PromptRole role, const std::string& contents);
    static std::string default_file_contents(PromptRole role);

    const RolePrompt& get(PromptRole role) const;

private:
    std::map<PromptRole, RolePrompt> prompts_;
};

// ---------------------------------------------------------------------------
// Chat backends
// ---------------------------------------------------------------------------

struct ChatRequest {
    /// Pipeline role tag ("summarizer", "stage1_generator", ...). Used for tracing and by
    /// the mock backend for dispatch; never sent over the wire.
    std::string role;
    std::string model;
    std::string system;
    std::string user;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
    /// Structured copies of the prompt inputs. Only the mock backend reads these.
    std::map<std::string, std::string> attributes;
};

void validate(const ChatRequest& request);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// One attempt. Throws Error with Transient, Auth, Backend or EmptyCompletion codes.
    virtual std::string send(const ChatRequest& request) = 0;
    virtual std::string tag() const = 0;
};

struct HttpChatSettings {
    std::string url;
    std::string model;
    std::string api_key_env;
    std::chrono::milliseconds timeout{60000};
};

/// OpenAI-style chat-completions client.
class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(HttpChatSettings settings, std::shared_ptr<HttpTransport> transport);

    std::string send(const ChatRequest& request) override;
    std::string tag() const override { return "http:" + settings_.model; }

    static Json request_body(const ChatRequest& request, const std::string& default_model);

private:
    HttpChatSettings settings_;
    std::shared_ptr<HttpTransport> transport_;
};

/// Failure injection for the mock's structured roles (reranker, coherence judge).
enum class MockFault { None, MalformedFirstAttempt, AlwaysMalformed };

struct MockOptions {
    MockFault reranker_fault = MockFault::None;
    MockFault judge_fault = MockFault::None;
};

/// Deterministic offline backend; output is a pure function of the request.
/// summarizer: first `target_words` words of the transcript.
/// stage1_generator: article assembled from the transcript's salient terms.
/// reranker: lexical-overlap judgments for every listed candidate.
/// stage3_rewriter: weaves each recommendation link into the paragraph holding its keyword.
/// coherence_judge: bare integer from paragraph and sentence structure.
class MockChatBackend final : public ChatBackend {
public:
    explicit MockChatBackend(MockOptions options = {}) : options_(options) {}

    std::string send(const ChatRequest& request) override;
    std::string tag() const override { return "mock"; }

private:
    MockOptions options_;
};

// ---------------------------------------------------------------------------
// Completion with retry, tracing and structured output
// ---------------------------------------------------------------------------

struct CallRecord {
    std::string role;
    std::string model;
    int attempts = 0;
    bool ok = false;
    std::string error;
    std::uint64_t prompt_hash = 0;
    std::vector<std::chrono::milliseconds> backoff;
};

/// Append-only log of backend calls for one unit of work.
class CallTrace {
public:
    void record(CallRecord r);
    std::vector<CallRecord> records() const;
    std::size_t count_role(std::string_view role) const;

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

struct CallContext {
    RetryPolicy retry;
    Sleeper sleep = thread_sleeper();
    CallTrace* trace = nullptr;
};

struct Completion {
    std::string text;
    int attempts = 0;
};

Completion complete(ChatBackend& backend, const ChatRequest& request, const CallContext& ctx);

/// Shape descriptor for structured outputs.
struct Schema {
    enum class Kind { Integer, Number, Boolean, String, StringList, Object, Array };

    Kind kind = Kind::Object;
    std::optional<double> min;
    std::optional<double> max;
    std::vector<std::pair<std::string, Schema>> fields;  // Object
    std::shared_ptr<Schema> items;                        // Array
    /// Extra semantic check run after shape validation; returns an error message.
    std::function<std::optional<std::string>(const Json&)> check;

    static Schema integer(std::optional<double> lo = {}, std::optional<double> hi = {});
    static Schema number(std::optional<double> lo = {}, std::optional<double> hi = {});
    static Schema boolean();
    static Schema string();
    static Schema string_list();
    static Schema object(std::vector<std::pair<std::string, Schema>> fields);
    static Schema array(Schema items);

    bool empty() const { return kind == Kind::Object && fields.empty(); }
};

/// Returns an error message naming the offending path, or nullopt when `value` conforms.
std::optional<std::string> validate_against(const Schema& schema, const Json& value);

/// First balanced JSON value in `text`. Fenced ```json blocks are searched first.
std::optional<Json> extract_first_json(std::string_view text);

struct StructuredVerdict {
    std::string raw;
    std::optional<Json> parsed;
    int parse_attempts = 0;
};

/// Completes, extracts and validates; re-asks with the validation error appended up to
/// `max_reasks` times. Throws UnparsableVerdict when every attempt fails validation.
StructuredVerdict complete_structured(ChatBackend& backend, ChatRequest request,
                                      const Schema& schema, int max_reasks,
                                      const CallContext& ctx);

}  // namespace digdeeper
