#include "digdeeper/llm.hpp"

#include "digdeeper/concurrency.hpp"
#include "digdeeper/error.hpp"
#include "digdeeper/text.hpp"
#include "default_prompts.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace digdeeper {

// ---------------------------------------------------------------------------
// Templates

namespace {

bool is_placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// Calls on_text for literal runs and on_slot for each well-formed `{{name}}`.
template <typename OnText, typename OnSlot>
void scan_template(std::string_view body, OnText on_text, OnSlot on_slot) {
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = body.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const auto name = body.substr(open + 2, close - open - 2);
        const bool valid = !name.empty() && std::all_of(name.begin(), name.end(), is_placeholder_char);
        if (!valid) {
            on_text(body.substr(pos, open + 2 - pos));
            pos = open + 2;
            continue;
        }
        on_text(body.substr(pos, open - pos));
        on_slot(name);
        pos = close + 2;
    }
    on_text(body.substr(pos));
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string body) {
    PromptTemplate t;
    t.name = std::move(name);
    t.body = std::move(body);
    scan_template(
        t.body, [](std::string_view) {},
        [&](std::string_view slot) { t.required_placeholders.emplace(slot); });
    return t;
}

std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
    for (const auto& name : tmpl.required_placeholders) {
        if (!bindings.count(name)) throw MissingPlaceholder(name);
    }
    std::string out;
    out.reserve(tmpl.body.size());
    scan_template(
        tmpl.body, [&](std::string_view text) { out.append(text); },
        [&](std::string_view slot) {
            auto it = bindings.find(std::string(slot));
            if (it == bindings.end()) throw MissingPlaceholder(std::string(slot));
            out.append(it->second);
        });
    return out;
}

std::string_view to_string(PromptRole role) {
    switch (role) {
        case PromptRole::Summarizer: return "summarizer";
        case PromptRole::Stage1Generator: return "stage1_generator";
        case PromptRole::Reranker: return "reranker";
        case PromptRole::Stage3Rewriter: return "stage3_rewriter";
        case PromptRole::CoherenceJudge: return "coherence_judge";
    }
    return "unknown";
}

namespace {

constexpr PromptRole kAllRoles[] = {PromptRole::Summarizer, PromptRole::Stage1Generator,
                                    PromptRole::Reranker, PromptRole::Stage3Rewriter,
                                    PromptRole::CoherenceJudge};

}  // namespace

std::string TemplateSet::default_file_contents(PromptRole role) {
    switch (role) {
        case PromptRole::Summarizer: return std::string(prompts::kSummarizer);
        case PromptRole::Stage1Generator: return std::string(prompts::kStage1Generator);
        case PromptRole::Reranker: return std::string(prompts::kReranker);
        case PromptRole::Stage3Rewriter: return std::string(prompts::kStage3Rewriter);
        case PromptRole::CoherenceJudge: return std::string(prompts::kCoherenceJudge);
    }
    return {};
}

RolePrompt TemplateSet::parse_role_file(PromptRole role, const std::string& contents) {
    const std::string name(to_string(role));
    std::istringstream in(contents);
    std::string line;
    std::string system;
    std::string user;
    bool in_user = false;
    bool first_user_line = true;
    while (std::getline(in, line)) {
        if (!in_user && line == "---") {
            in_user = true;
            continue;
        }
        if (in_user) {
            if (!first_user_line) user.push_back('\n');
            user += line;
            first_user_line = false;
        } else {
            if (!system.empty()) system.push_back('\n');
            system += line;
        }
    }
    if (!in_user) {
        throw Error(ErrorCode::Config, "prompt file for " + name + " lacks the '---' separator");
    }
    while (!user.empty() && (user.back() == '\n' || user.back() == ' ')) user.pop_back();
    if (user.empty()) throw Error(ErrorCode::Config, "prompt file for " + name + " has an empty user part");
    return RolePrompt{PromptTemplate::parse(name + ".system", system),
                      PromptTemplate::parse(name + ".user", user)};
}

TemplateSet TemplateSet::defaults() {
    TemplateSet set;
    for (auto role : kAllRoles) set.prompts_[role] = parse_role_file(role, default_file_contents(role));
    return set;
}

TemplateSet TemplateSet::load(const std::string& dir) {
    TemplateSet set = defaults();
    if (dir.empty()) return set;
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::Io, "template directory not found: " + dir);
    }
    for (auto role : kAllRoles) {
        const auto path = std::filesystem::path(dir) / (std::string(to_string(role)) + ".txt");
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorCode::Io, "cannot read template " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        set.prompts_[role] = parse_role_file(role, buf.str());
    }
    return set;
}

const RolePrompt& TemplateSet::get(PromptRole role) const { return prompts_.at(role); }

// ---------------------------------------------------------------------------
// HTTP backend

void validate(const ChatRequest& request) {
    if (request.user.empty()) throw Error(ErrorCode::Precondition, "chat request has an empty user message");
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
        throw Error(ErrorCode::Precondition, "temperature must lie in [0, 2]");
    }
    if (request.max_tokens <= 0) throw Error(ErrorCode::Precondition, "max_tokens must be positive");
}

HttpChatBackend::HttpChatBackend(HttpChatSettings settings, std::shared_ptr<HttpTransport> transport)
    : settings_(std::move(settings)), transport_(std::move(transport)) {
    if (settings_.url.empty()) throw Error(ErrorCode::Config, "chat backend url is empty");
    if (!transport_) throw Error(ErrorCode::Config, "chat backend has no transport");
}

Json HttpChatBackend::request_body(const ChatRequest& request, const std::string& default_model) {
    Json messages = Json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    Json body;
    body["model"] = request.model.empty() ? default_model : request.model;
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (request.seed) body["seed"] = *request.seed;
    return body;
}

std::string HttpChatBackend::send(const ChatRequest& request) {
    HttpHeaders headers{{"Accept", "application/json"}};
    if (auto key = read_env(settings_.api_key_env); !key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + key);
    }
    const auto response =
        transport_->post(settings_.url, headers, request_body(request, settings_.model).dump());
    raise_for_status(response, "chat backend");
    Json parsed;
    try {
        parsed = Json::parse(response.body);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::Backend, std::string("chat backend returned invalid JSON: ") + e.what());
    }
    const auto* content = [&]() -> const Json* {
        if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty()) {
            return nullptr;
        }
        const auto& first = parsed["choices"][0];
        if (!first.contains("message") || !first["message"].contains("content")) return nullptr;
        return &first["message"]["content"];
    }();
    if (!content || content->is_null()) {
        throw Error(ErrorCode::EmptyCompletion, "chat backend response lacks choices[0].message.content");
    }
    if (!content->is_string()) throw Error(ErrorCode::Backend, "chat completion content is not a string");
    auto text = content->get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorCode::EmptyCompletion, "chat backend returned an empty completion");
    }
    return text;
}

// ---------------------------------------------------------------------------
// Tracing and completion

void CallTrace::record(CallRecord r) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(r));
}

std::vector<CallRecord> CallTrace::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t CallTrace::count_role(std::string_view role) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                  [&](const CallRecord& r) { return r.role == role; }));
}

Completion complete(ChatBackend& backend, const ChatRequest& request, const CallContext& ctx) {
    validate(request);
    CallRecord rec;
    rec.role = request.role;
    rec.model = request.model.empty() ? backend.tag() : request.model;
    rec.prompt_hash = fnv1a(request.user, fnv1a(request.system));
    Completion out;
    try {
        out.attempts = run_with_retry(
            ctx.retry, ctx.sleep,
            [&] {
                ++rec.attempts;
                ConcurrencyLimiter::Permit permit(backend_limiter());
                out.text = backend.send(request);
                if (out.text.find_first_not_of(" \t\r\n") == std::string::npos) {
                    throw Error(ErrorCode::EmptyCompletion, "empty completion");
                }
            },
            &rec.backoff);
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = std::string(to_string(e.code()));
        if (ctx.trace) ctx.trace->record(rec);
        throw;
    }
    rec.ok = true;
    if (ctx.trace) ctx.trace->record(std::move(rec));
    return out;
}

// ---------------------------------------------------------------------------
// Structured output

Schema Schema::integer(std::optional<double> lo, std::optional<double> hi) {
    Schema s;
    s.kind = Kind::Integer;
    s.min = lo;
    s.max = hi;
    return s;
}

Schema Schema::number(std::optional<double> lo, std::optional<double> hi) {
    Schema s;
    s.kind = Kind::Number;
    s.min = lo;
    s.max = hi;
    return s;
}

Schema Schema::boolean() {
    Schema s;
    s.kind = Kind::Boolean;
    return s;
}

Schema Schema::string() {
    Schema s;
    s.kind = Kind::String;
    return s;
}

Schema Schema::string_list() {
    Schema s;
    s.kind = Kind::StringList;
    return s;
}

Schema Schema::object(std::vector<std::pair<std::string, Schema>> fields) {
    Schema s;
    s.kind = Kind::Object;
    s.fields = std::move(fields);
    return s;
}

Schema Schema::array(Schema items) {
    Schema s;
    s.kind = Kind::Array;
    s.items = std::make_shared<Schema>(std::move(items));
    return s;
}

namespace {

std::optional<std::string> check_range(const Schema& schema, double v, const std::string& path) {
    if (schema.min && v < *schema.min) {
        return path + " = " + Json(v).dump() + " is below the minimum " + Json(*schema.min).dump();
    }
    if (schema.max && v > *schema.max) {
        return path + " = " + Json(v).dump() + " is above the maximum " + Json(*schema.max).dump();
    }
    return std::nullopt;
}

std::optional<std::string> validate_at(const Schema& schema, const Json& value, const std::string& path) {
    using K = Schema::Kind;
    std::optional<std::string> err;
    switch (schema.kind) {
        case K::Integer: {
            if (value.is_number_integer()) {
                err = check_range(schema, value.get<double>(), path);
            } else if (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>()) {
                err = check_range(schema, value.get<double>(), path);
            } else {
                err = path + " must be an integer";
            }
            break;
        }
        case K::Number:
            err = value.is_number() ? check_range(schema, value.get<double>(), path)
                                    : std::optional<std::string>(path + " must be a number");
            break;
        case K::Boolean:
            if (!value.is_boolean()) err = path + " must be true or false";
            break;
        case K::String:
            if (!value.is_string()) err = path + " must be a string";
            break;
        case K::StringList:
            if (!value.is_array()) {
                err = path + " must be an array of strings";
            } else {
                for (std::size_t i = 0; i < value.size() && !err; ++i) {
                    if (!value[i].is_string()) err = path + "[" + std::to_string(i) + "] must be a string";
                }
            }
            break;
        case K::Object:
            if (!value.is_object()) {
                err = path + " must be an object";
                break;
            }
            for (const auto& [name, sub] : schema.fields) {
                if (!value.contains(name)) {
                    err = path + " is missing field \"" + name + "\"";
                    break;
                }
                err = validate_at(sub, value[name], path + "." + name);
                if (err) break;
            }
            break;
        case K::Array:
            if (!value.is_array()) {
                err = path + " must be an array";
                break;
            }
            for (std::size_t i = 0; i < value.size() && !err && schema.items; ++i) {
                err = validate_at(*schema.items, value[i], path + "[" + std::to_string(i) + "]");
            }
            break;
    }
    if (!err && schema.check) err = schema.check(value);
    return err;
}

// End of the balanced JSON container starting at text[pos], honoring string escapes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t pos) {
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = pos; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{' || c == '[') stack.push_back(c == '{' ? '}' : ']');
        else if (c == '}' || c == ']') {
            if (stack.empty() || stack.back() != c) return std::nullopt;
            stack.pop_back();
            if (stack.empty()) return i + 1;
        }
    }
    return std::nullopt;
}

std::optional<Json> scan_for_json(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{' || c == '[') {
            if (auto end = balanced_end(text, i)) {
                try {
                    return Json::parse(text.substr(i, *end - i));
                } catch (const Json::parse_error&) {
                }
            }
            continue;
        }
        const bool boundary = i == 0 || !(std::isalnum(static_cast<unsigned char>(text[i - 1])) ||
                                          text[i - 1] == '.' || text[i - 1] == '_');
        const bool starts_number =
            std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '-' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1])));
        if (boundary && starts_number) {
            std::size_t end = i + 1;
            while (end < text.size() &&
                   (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.' ||
                    text[end] == 'e' || text[end] == 'E' || text[end] == '+' || text[end] == '-')) {
                ++end;
            }
            // a number glued to letters ("7th", "3x") is prose, not a value
            if (end < text.size() && (std::isalpha(static_cast<unsigned char>(text[end])) || text[end] == '_')) {
                i = end;
                continue;
            }
            while (end > i + 1 && (text[end - 1] == '.' || text[end - 1] == '-' || text[end - 1] == '+')) --end;
            try {
                return Json::parse(text.substr(i, end - i));
            } catch (const Json::parse_error&) {
            }
            i = end - 1;
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_against(const Schema& schema, const Json& value) {
    return validate_at(schema, value, "$");
}

std::optional<Json> extract_first_json(std::string_view text) {
    for (auto fence = text.find("```"); fence != std::string_view::npos;) {
        std::size_t body_start = fence + 3;
        while (body_start < text.size() && std::isalnum(static_cast<unsigned char>(text[body_start]))) {
            ++body_start;
        }
        const auto close = text.find("```", body_start);
        if (close == std::string_view::npos) break;
        if (auto v = scan_for_json(text.substr(body_start, close - body_start))) return v;
        fence = text.find("```", close + 3);
    }
    return scan_for_json(text);
}

StructuredVerdict complete_structured(ChatBackend& backend, ChatRequest request, const Schema& schema,
                                      int max_reasks, const CallContext& ctx) {
    if (schema.empty()) throw Error(ErrorCode::Precondition, "structured completion needs a nonempty schema");
    if (max_reasks < 0) throw Error(ErrorCode::Precondition, "max_reasks must be >= 0");
    const std::string base_user = request.user;
    StructuredVerdict verdict;
    std::string last_error;
    for (int attempt = 1; attempt <= max_reasks + 1; ++attempt) {
        request.attributes["attempt"] = std::to_string(attempt);
        if (attempt > 1) {
            request.user = base_user + "\n\nYour previous reply could not be used: " + last_error +
                           ". Reply again with only valid JSON in the requested format.";
        }
        verdict.parse_attempts = attempt;
        verdict.raw = complete(backend, request, ctx).text;
        auto value = extract_first_json(verdict.raw);
        if (!value) {
            last_error = "no JSON value found in the reply";
            continue;
        }
        if (auto err = validate_against(schema, *value)) {
            last_error = *err;
            continue;
        }
        verdict.parsed = std::move(*value);
        return verdict;
    }
    throw UnparsableVerdict(verdict.raw, verdict.parse_attempts, last_error);
}

}  // namespace digdeeper
