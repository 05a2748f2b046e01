#include "digdeeper/cli.hpp"

#include "digdeeper/concurrency.hpp"
#include "digdeeper/config.hpp"
#include "digdeeper/corpus.hpp"
#include "digdeeper/embedding.hpp"
#include "digdeeper/error.hpp"
#include "digdeeper/eval.hpp"
#include "digdeeper/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace digdeeper {

namespace {

namespace fs = std::filesystem;

void emit_error(std::ostream& err, std::string_view code, const std::string& message,
                const std::string& lesson_id = {}) {
    Json j;
    j["error"] = code;
    j["message"] = message;
    if (!lesson_id.empty()) j["lesson_id"] = lesson_id;
    err << j.dump() << '\n';
}

void emit_warning(std::ostream& err, const std::string& message) {
    Json j;
    j["warning"] = message;
    err << j.dump() << '\n';
}

/// Values given on the command line; empty strings mean "use the config".
struct Common {
    std::string config_path;
    std::string corpus;
    std::string out;
    std::string index;
    bool mock = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_index) {
    cmd->add_option("--config", c.config_path, "JSON config file; DD_<KEY> environment variables override it");
    cmd->add_option("--corpus", c.corpus, "Corpus JSONL (overrides corpus_path)");
    cmd->add_option("--out", c.out, "Output path (overrides output_dir)");
    if (with_index) cmd->add_option("--index", c.index, "Dense index file (overrides index_path)");
}

Config resolve(const Common& c) {
    Config config = load_config(c.config_path);
    if (!c.corpus.empty()) config.corpus_path = c.corpus;
    if (!c.out.empty()) config.output_dir = c.out;
    if (!c.index.empty()) config.index_path = c.index;
    if (c.mock) {
        config.chat_backend = "mock";
        config.embedding_backend = "mock";
    }
    if (config.corpus_path.empty()) throw Error(ErrorCode::Config, "no corpus given (--corpus or corpus_path)");
    return config;
}

TemplateSet templates_for(const Config& config) {
    return config.template_dir.empty() ? TemplateSet::defaults() : TemplateSet::load(config.template_dir);
}

Corpus load_corpus(const Config& config, std::ostream& err) {
    auto report = ingest_corpus(config.corpus_path, false);
    for (const auto& w : report.warnings) emit_warning(err, w);
    return std::move(report.corpus);
}

/// Summarizes only the lessons that have no summary yet.
Corpus ensure_summaries(const Corpus& corpus, ChatBackend& chat, const TemplateSet& templates, const Config& config,
                        std::ostream& err) {
    const bool missing = std::any_of(corpus.lessons().begin(), corpus.lessons().end(),
                                     [](const Lesson& l) { return !l.summary || l.summary->empty(); });
    if (!missing) return corpus;
    CallContext ctx{config.retry(), thread_sleeper(), nullptr};
    auto report = summarize_corpus(corpus, chat, templates, config.summarize(), ctx);
    for (const auto& o : report.outcomes) {
        if (o.status == SummaryStatus::Failed) emit_error(err, "summary_failed", o.error, o.lesson_id);
    }
    return std::move(report.corpus);
}

DenseIndex obtain_index(const Config& config, const Corpus& corpus, EmbeddingProvider& embedder, bool build,
                        std::ostream& err) {
    if (build) {
        CallContext ctx{config.retry(), thread_sleeper(), nullptr};
        auto report = build_index(corpus, embedder, config.source_field(), ctx);
        for (const auto& w : report.warnings) emit_warning(err, w);
        if (!config.index_path.empty()) {
            if (fs::path(config.index_path).has_parent_path()) {
                fs::create_directories(fs::path(config.index_path).parent_path());
            }
            save_index(report.index, config.index_path);
        }
        return std::move(report.index);
    }
    if (config.index_path.empty()) {
        throw Error(ErrorCode::Config, "no index given (--index or index_path) and --build-index not set");
    }
    DenseIndex index = load_index(config.index_path);
    if (index.provider_tag() != embedder.tag() || index.dim() != embedder.dim()) {
        throw Error(ErrorCode::Config, "index " + config.index_path + " was built with " + index.provider_tag() +
                                           " but the configured embedder is " + embedder.tag());
    }
    return index;
}

std::vector<std::string> split_ids(const std::string& csv) {
    std::vector<std::string> ids;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) ids.push_back(item);
    }
    return ids;
}

std::vector<const Lesson*> select_lessons(const Corpus& corpus, const std::string& lessons_csv) {
    std::vector<const Lesson*> selected;
    if (lessons_csv.empty()) {
        for (const auto& l : corpus.lessons()) selected.push_back(&l);
        return selected;
    }
    std::set<std::string> seen;
    for (const auto& id : split_ids(lessons_csv)) {
        if (!corpus.contains(id)) throw Error(ErrorCode::NotFound, "unknown lesson id: " + id);
        if (seen.insert(id).second) selected.push_back(&corpus.at(id));
    }
    return selected;
}

struct RunSummary {
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    int first_failure_code = 0;
};

/// Runs the pipeline over `lessons`, writing each result into `dir`.
RunSummary run_lessons(const std::vector<const Lesson*>& lessons, const Corpus& corpus, const DenseIndex& index,
                       Backends& backends, const Config& config, PipelineMode mode, const std::string& dir,
                       std::ostream& err) {
    fs::create_directories(dir);
    std::vector<std::optional<std::pair<std::string, std::string>>> failures(lessons.size());
    std::vector<int> codes(lessons.size(), 0);
    const auto pipeline = config.pipeline();
    parallel_for(lessons.size(), static_cast<std::size_t>(config.parallelism), [&](std::size_t i) {
        try {
            auto result = run_pipeline(*lessons[i], corpus, index, backends, pipeline, mode);
            write_result(result, dir);
        } catch (const Error& e) {
            failures[i] = {std::string(to_string(e.code())), e.what()};
            codes[i] = exit_code_for(e.code());
        } catch (const std::exception& e) {
            failures[i] = {"internal", e.what()};
            codes[i] = 1;
        }
    });
    RunSummary s;
    for (std::size_t i = 0; i < lessons.size(); ++i) {
        if (failures[i]) {
            emit_error(err, failures[i]->first, failures[i]->second, lessons[i]->id);
            ++s.failed;
            if (s.first_failure_code == 0) s.first_failure_code = codes[i];
        } else {
            ++s.succeeded;
        }
    }
    return s;
}

Json aggregates_json(const Aggregates& a) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json j;
    j["hit_rate"] = opt(a.hit_rate);
    j["bert_score"] = opt(a.bert_score);
    j["bm25"] = opt(a.bm25);
    j["cosine"] = opt(a.cosine);
    j["coherence"] = opt(a.coherence);
    return j;
}

EvalReport evaluate_dir(const std::string& results_dir, const Corpus& corpus, Backends& backends,
                        const Config& config, bool table3) {
    auto results = load_results(results_dir);
    if (results.empty()) throw Error(ErrorCode::Precondition, "no pipeline results in " + results_dir);
    auto report = evaluate_run(results, corpus, backends, config.eval(table3));
    report.config_snapshot["config"] = config.to_json();
    return report;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json category_json(const std::string& id, std::string_view text, const CategoryThresholds& t) {
    const auto f = dig_deeper_features(text);
    Json j;
    j["id"] = id;
    j["category"] = to_string(classify_dig_deeper(text, t));
    j["prose_words"] = f.prose_words;
    j["link_count"] = f.link_count;
    j["paragraphs"] = f.paragraph_count;
    return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dig Deeper article generation, recommendation and evaluation", "digdeeper"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // ingest
    Common ingest_c;
    bool strict = false;
    auto* ingest = app.add_subcommand("ingest", "Validate a corpus JSONL file and write it back normalized");
    add_common(ingest, ingest_c, false);
    ingest->add_flag("--strict", strict, "Abort on the first malformed record instead of skipping it");

    // summarize
    Common sum_c;
    bool force = false;
    auto* summarize = app.add_subcommand("summarize", "Add fixed-length transcript summaries to a corpus");
    add_common(summarize, sum_c, false);
    summarize->add_flag("--force", force, "Re-summarize lessons that already have a summary");
    summarize->add_flag("--mock", sum_c.mock, "Use the offline mock backends");

    // index
    Common index_c;
    std::string source;
    auto* index_cmd = app.add_subcommand("index", "Embed every lesson and write the dense index");
    add_common(index_cmd, index_c, true);
    index_cmd->add_option("--source", source, "Field to embed: summary or transcript (overrides embedding_source)")
        ->check(CLI::IsMember({"summary", "transcript"}));
    index_cmd->add_flag("--mock", index_c.mock, "Use the offline mock backends");

    // run
    Common run_c;
    std::string mode_name = "full";
    std::string lessons_csv;
    bool build = false;
    auto* run = app.add_subcommand("run", "Generate Dig Deeper articles for lessons");
    add_common(run, run_c, true);
    run->add_option("--mode", mode_name, "Pipeline variant: full, skip-stage1 or skip-stage3")
        ->check(CLI::IsMember({"full", "skip-stage1", "skip-stage3"}));
    run->add_option("--lessons", lessons_csv, "Comma-separated lesson ids (default: all)");
    run->add_flag("--mock", run_c.mock, "Use the offline mock backends");
    run->add_flag("--build-index", build, "Build the dense index instead of loading it (saved to --index if given)");

    // eval
    Common eval_c;
    std::string results_dir;
    bool table3 = false;
    auto* eval = app.add_subcommand("eval", "Score pipeline results and write eval_report.json and .csv");
    add_common(eval, eval_c, false);
    eval->add_option("--results", results_dir, "Directory of result JSON files (default: output_dir)");
    eval->add_flag("--table3", table3, "Add per-category rows comparing generated and existing articles");
    eval->add_flag("--mock", eval_c.mock, "Use the offline mock backends");

    // ablate
    Common abl_c;
    std::string abl_lessons;
    bool abl_build = false;
    auto* ablate = app.add_subcommand("ablate", "Run and evaluate all three pipeline variants side by side");
    add_common(ablate, abl_c, true);
    ablate->add_option("--lessons", abl_lessons, "Comma-separated lesson ids (default: all)");
    ablate->add_flag("--mock", abl_c.mock, "Use the offline mock backends");
    ablate->add_flag("--build-index", abl_build, "Build the dense index instead of loading it");

    // classify
    std::string cls_config;
    std::string cls_corpus;
    std::vector<std::string> texts;
    auto* classify = app.add_subcommand("classify", "Assign Dig Deeper texts to a structural category");
    classify->add_option("--config", cls_config, "JSON config file (category thresholds)");
    classify->add_option("--corpus", cls_corpus, "Classify every lesson's dig_deeper_text");
    classify->add_option("--text", texts, "Classify the contents of these files")->check(CLI::ExistingFile);

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.push_back("digdeeper");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        emit_error(err, "usage", e.what());
        return 2;
    }

    try {
        if (*ingest) {
            Config config = resolve(ingest_c);
            auto report = ingest_corpus(config.corpus_path, strict);
            for (const auto& w : report.warnings) emit_warning(err, w);
            const std::string path = ingest_c.out.empty() ? (fs::path(config.output_dir) / "corpus.jsonl").string()
                                                          : ingest_c.out;
            if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
            write_corpus(report.corpus, path);
            Json j;
            j["records"] = report.records;
            j["lessons"] = report.corpus.lesson_count();
            j["skipped"] = report.skipped;
            j["output"] = path;
            out << j.dump() << '\n';
            return 0;
        }

        if (*summarize) {
            Config config = resolve(sum_c);
            auto chat = make_chat_backend(config);
            const auto templates = templates_for(config);
            Corpus corpus = load_corpus(config, err);
            auto options = config.summarize();
            options.force = force;
            CallContext ctx{config.retry(), thread_sleeper(), nullptr};
            auto report = summarize_corpus(corpus, *chat, templates, options, ctx);
            for (const auto& o : report.outcomes) {
                if (o.status == SummaryStatus::Failed) emit_error(err, "summary_failed", o.error, o.lesson_id);
                if (o.status == SummaryStatus::OutOfBand) {
                    emit_warning(err, "summary of " + o.lesson_id + " has " + std::to_string(o.words) +
                                          " words, outside the target band");
                }
            }
            const std::string path = sum_c.out.empty() ? config.corpus_path : sum_c.out;
            if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
            write_corpus(report.corpus, path);
            Json j;
            j["ok"] = report.count(SummaryStatus::Ok);
            j["out_of_band"] = report.count(SummaryStatus::OutOfBand);
            j["failed"] = report.count(SummaryStatus::Failed);
            j["skipped"] = report.count(SummaryStatus::Skipped);
            j["output"] = path;
            out << j.dump() << '\n';
            return report.count(SummaryStatus::Failed) == 0 ? 0 : 1;
        }

        if (*index_cmd) {
            Config config = resolve(index_c);
            if (!source.empty()) config.embedding_source = source;
            if (config.index_path.empty()) config.index_path = (fs::path(config.output_dir) / "index.ddix").string();
            auto embedder = make_embedding_provider(config);
            Corpus corpus = load_corpus(config, err);
            if (config.source_field() == SourceField::Summary) {
                auto chat = make_chat_backend(config);
                corpus = ensure_summaries(corpus, *chat, templates_for(config), config, err);
            }
            CallContext ctx{config.retry(), thread_sleeper(), nullptr};
            auto report = build_index(corpus, *embedder, config.source_field(), ctx);
            for (const auto& w : report.warnings) emit_warning(err, w);
            if (fs::path(config.index_path).has_parent_path()) {
                fs::create_directories(fs::path(config.index_path).parent_path());
            }
            save_index(report.index, config.index_path);
            Json j;
            j["entries"] = report.index.size();
            j["dim"] = report.index.dim();
            j["provider"] = report.index.provider_tag();
            j["output"] = config.index_path;
            out << j.dump() << '\n';
            return 0;
        }

        if (*run || *ablate) {
            const Common& c = *run ? run_c : abl_c;
            Config config = resolve(c);
            backend_limiter().set_max(static_cast<std::size_t>(config.parallelism));
            auto chat = make_chat_backend(config);
            auto embedder = make_embedding_provider(config);
            const auto templates = templates_for(config);
            Corpus corpus = ensure_summaries(load_corpus(config, err), *chat, templates, config, err);
            const auto lessons = select_lessons(corpus, *run ? lessons_csv : abl_lessons);
            DenseIndex index = obtain_index(config, corpus, *embedder, *run ? build : abl_build, err);
            Backends backends{*chat, *embedder, templates, config.retry(), thread_sleeper()};

            if (*run) {
                const auto mode = *mode_from_string(mode_name);
                auto s = run_lessons(lessons, corpus, index, backends, config, mode, config.output_dir, err);
                Json j;
                j["mode"] = to_string(mode);
                j["succeeded"] = s.succeeded;
                j["failed"] = s.failed;
                j["output"] = config.output_dir;
                out << j.dump() << '\n';
                if (s.succeeded == 0 && s.failed > 0) return s.first_failure_code;
                return 0;
            }

            Json rows = Json::array();
            std::ostringstream csv;
            csv << "mode,lessons,hit_rate,bert_score,bm25,cosine,coherence\n";
            int status = 0;
            for (auto mode : {PipelineMode::Full, PipelineMode::SkipStage1, PipelineMode::SkipStage3}) {
                const std::string dir = (fs::path(config.output_dir) / std::string(to_string(mode))).string();
                auto s = run_lessons(lessons, corpus, index, backends, config, mode, dir, err);
                if (s.succeeded == 0) {
                    emit_error(err, "ablation_mode_failed", "no lesson succeeded in mode " + std::string(to_string(mode)));
                    status = s.first_failure_code ? s.first_failure_code : 1;
                    continue;
                }
                auto report = evaluate_dir(dir, corpus, backends, config, false);
                write_report(report, dir);
                Json row;
                row["mode"] = to_string(mode);
                row["lessons"] = report.per_lesson.size();
                row["failed"] = s.failed;
                row["aggregates"] = aggregates_json(report.aggregates);
                rows.push_back(row);
                csv << to_string(mode) << ',' << report.per_lesson.size();
                for (const auto& v : {report.aggregates.hit_rate, report.aggregates.bert_score, report.aggregates.bm25,
                                      report.aggregates.cosine, report.aggregates.coherence}) {
                    csv << ',';
                    if (v) csv << Json(*v).dump();
                }
                csv << '\n';
            }
            Json table;
            table["modes"] = rows;
            std::ofstream(fs::path(config.output_dir) / "ablation.json", std::ios::binary) << table.dump(2) << '\n';
            std::ofstream(fs::path(config.output_dir) / "ablation.csv", std::ios::binary) << csv.str();
            out << table.dump() << '\n';
            return status;
        }

        if (*eval) {
            Config config = resolve(eval_c);
            auto chat = make_chat_backend(config);
            auto embedder = make_embedding_provider(config);
            const auto templates = templates_for(config);
            Corpus corpus = ensure_summaries(load_corpus(config, err), *chat, templates, config, err);
            Backends backends{*chat, *embedder, templates, config.retry(), thread_sleeper()};
            const std::string dir = results_dir.empty() ? config.output_dir : results_dir;
            auto report = evaluate_dir(dir, corpus, backends, config, table3);
            for (const auto& row : report.per_lesson) {
                for (const auto& e : row.errors) emit_error(err, "metric_failed", e, row.lesson_id);
            }
            const std::string target = eval_c.out.empty() ? dir : eval_c.out;
            fs::create_directories(target);
            write_report(report, target);
            Json j;
            j["lessons"] = report.per_lesson.size();
            j["aggregates"] = aggregates_json(report.aggregates);
            j["output"] = target;
            out << j.dump() << '\n';
            return 0;
        }

        if (*classify) {
            if (cls_corpus.empty() && texts.empty()) {
                throw Error(ErrorCode::Config, "classify needs --corpus or --text");
            }
            Config config = load_config(cls_config);
            const auto thresholds = config.thresholds();
            if (!cls_corpus.empty()) {
                auto report = ingest_corpus(cls_corpus, false);
                for (const auto& w : report.warnings) emit_warning(err, w);
                for (const auto& l : report.corpus.lessons()) {
                    if (l.dig_deeper_text) out << category_json(l.id, *l.dig_deeper_text, thresholds).dump() << '\n';
                }
            }
            for (const auto& path : texts) out << category_json(path, read_file(path), thresholds).dump() << '\n';
            return 0;
        }
    } catch (const Error& e) {
        emit_error(err, to_string(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        emit_error(err, "io", e.what());
        return 2;
    } catch (const Json::exception& e) {
        emit_error(err, "format", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error(err, "internal", e.what());
        return 1;
    }
    return 0;
}

}  // namespace digdeeper
