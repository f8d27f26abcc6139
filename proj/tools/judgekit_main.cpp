// judgekit: criteria-driven LLM-as-judge evaluation harness.
//
// Subcommands cover the full iteration loop: split a dataset, lint the
// exemplar shots, run a judging experiment, report judge-human agreement,
// and diff shot-set versions.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <judgekit/judgekit.hpp>

namespace fs = std::filesystem;
using namespace judgekit;

namespace {

// Exit codes, one per failure class.
constexpr int kExitOk = 0;
constexpr int kExitLintViolations = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitSchema = 4;
constexpr int kExitRuntime = 5;

struct SplitArgs {
    std::string dataset;
    std::string criteria;
    std::string out_dir;
    std::string ratios = "0.6,0.2,0.2";
    std::string stratify_by;
    uint64_t seed = 0;
};

SplitSpec parse_ratios(const std::string& text, uint64_t seed, const std::string& stratify_by) {
    SplitSpec spec;
    spec.seed = seed;
    if (!stratify_by.empty()) spec.stratify_by = stratify_by;
    double r[3];
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]) != 3)
        throw SchemaError("--ratios must look like 0.6,0.2,0.2");
    spec.train_ratio = r[0];
    spec.eval_ratio = r[1];
    spec.test_ratio = r[2];
    spec.validate();
    return spec;
}

int run_split(const SplitArgs& args) {
    std::optional<CriteriaSet> criteria;
    if (!args.criteria.empty()) criteria = CriteriaSet::load(args.criteria);
    std::vector<Case> cases = load_dataset(args.dataset, criteria ? &*criteria : nullptr);
    SplitSpec spec = parse_ratios(args.ratios, args.seed, args.stratify_by);
    SplitResult split = split_dataset(cases, spec);

    fs::path dir(args.out_dir);
    save_dataset(dir / "train.jsonl", split.train);
    save_dataset(dir / "eval.jsonl", split.eval);
    save_dataset(dir / "test.jsonl", split.test);

    auto ids = [](const std::vector<Case>& v) {
        json arr = json::array();
        for (const Case& c : v) arr.push_back(c.id);
        return arr;
    };
    json manifest{{"schema_version", 1},
                  {"generator", "mt19937_64"},
                  {"seed", spec.seed},
                  {"ratios", {spec.train_ratio, spec.eval_ratio, spec.test_ratio}},
                  {"stratify_by", spec.stratify_by ? json(*spec.stratify_by) : json(nullptr)},
                  {"sizes", {split.train.size(), split.eval.size(), split.test.size()}},
                  {"train_ids", ids(split.train)},
                  {"eval_ids", ids(split.eval)},
                  {"test_ids", ids(split.test)}};
    write_file_atomic(dir / "split_manifest.json", manifest.dump(2) + "\n");

    std::cout << "split " << cases.size() << " cases -> train " << split.train.size() << ", eval "
              << split.eval.size() << ", test " << split.test.size() << " (seed " << spec.seed
              << ")\n";
    return kExitOk;
}

int run_lint(const std::string& criteria_path, const std::string& shots_path,
             const std::string& lint_config_path) {
    CriteriaSet criteria = CriteriaSet::load(criteria_path);
    ShotSet shots = ShotSet::load(shots_path);
    LintConfig cfg = lint_config_path.empty() ? LintConfig{} : LintConfig::load(lint_config_path);
    std::vector<LintViolation> violations = lint_shot_set(shots, criteria, cfg);
    for (const LintViolation& v : violations) {
        std::cout << lint_rule_name(v.rule) << " label=\"" << v.label << "\" shot=" << v.shot_index
                  << ": " << v.detail << "\n";
    }
    std::cerr << violations.size() << " violation(s) across " << shots.total_shots()
              << " shots (task \"" << shots.task << "\", version " << shots.version << ")\n";
    return violations.empty() ? kExitOk : kExitLintViolations;
}

struct RunArgs {
    std::string criteria;
    std::string shots;
    std::string split_file;
    std::string template_file;
    std::string out_dir;
    std::string split_name;
    std::string backend_kind = "scripted";
    std::string script;
    std::string endpoint;
    std::string model = "gpt-4";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string mode = "division";
    std::string protocol = "multiturn";
    std::vector<std::string> overrides;
    int shot_limit = 8;
    size_t char_budget = 32000;
    bool repeat_descriptions = true;
    double temperature = 0.0;
    int max_retries = 3;
    int timeout_ms = 30000;
    int parallelism = 4;
};

int run_run(const RunArgs& args) {
    CriteriaSet criteria = CriteriaSet::load(args.criteria);
    ShotSet shots = ShotSet::load(args.shots);
    std::vector<Case> cases = load_dataset(args.split_file, &criteria);
    PromptTemplate tmpl = args.template_file.empty() ? PromptTemplate::defaults(criteria.task())
                                                     : PromptTemplate::load(args.template_file);

    PromptConfig cfg;
    cfg.division = args.mode == "division";
    cfg.multi_turn = args.protocol == "multiturn";
    cfg.repeat_descriptions = args.repeat_descriptions;
    cfg.shot_limit_per_label = args.shot_limit;
    cfg.context_char_budget = args.char_budget;
    for (const std::string& ov : args.overrides) {
        size_t eq = ov.rfind('=');
        if (eq == std::string::npos)
            throw SchemaError("--override expects LABEL=single|multiturn|zero_only");
        cfg.label_protocol_overrides[ov.substr(0, eq)] =
            label_protocol_from_name(ov.substr(eq + 1), "--override");
    }
    cfg.validate();

    std::unique_ptr<Backend> backend;
    json backend_cfg_json;
    if (args.backend_kind == "scripted") {
        if (args.script.empty()) throw SchemaError("--backend scripted requires --script");
        backend = ScriptedBackend::load(args.script, args.parallelism);
        backend_cfg_json = json{{"backend", "scripted"}, {"script", fs::path(args.script).filename().string()}};
    } else {
        BackendConfig bc;
        bc.endpoint_url = args.endpoint;
        bc.model_name = args.model;
        bc.temperature = args.temperature;
        bc.max_retries = args.max_retries;
        bc.timeout_ms = args.timeout_ms;
        bc.parallelism_limit = args.parallelism;
        bc.api_key_env = args.api_key_env;
        backend_cfg_json = bc.to_json();
        backend = std::make_unique<RemoteBackend>(bc);
    }

    std::string split_name =
        args.split_name.empty() ? fs::path(args.split_file).stem().string() : args.split_name;
    RunResult result =
        run_experiment(cases, criteria, shots, tmpl, cfg, *backend, split_name, backend_cfg_json);

    fs::path dir(args.out_dir);
    save_records(dir / "records.jsonl", result.records);
    save_manifest(dir / "manifest.json", result.manifest);

    std::cout << result.manifest.method << " on \"" << split_name << "\": "
              << result.records.size() << "/" << cases.size() << " cases judged, "
              << result.manifest.backend_calls << " backend calls";
    if (!result.manifest.failures.empty())
        std::cout << ", " << result.manifest.failures.size() << " failed";
    std::cout << "\n";
    return kExitOk;
}

struct ReportArgs {
    std::string criteria;
    std::vector<std::string> records;
    std::vector<std::string> datasets;
    std::vector<std::string> manifests;
    std::string format = "table";
    std::string basis = "final";
    std::string out_file;
};

int run_report(const ReportArgs& args) {
    CriteriaSet criteria = CriteriaSet::load(args.criteria);
    if (args.records.empty()) throw SchemaError("report needs at least one --records file");
    if (args.datasets.size() != args.records.size())
        throw SchemaError("pass one --dataset per --records file");
    if (!args.manifests.empty() && args.manifests.size() != args.records.size())
        throw SchemaError("pass one --manifest per --records file (or none)");

    MetricReport report;
    report.task = criteria.task();
    for (size_t i = 0; i < args.records.size(); ++i) {
        std::vector<ScoreRecord> records = load_records(args.records[i]);
        std::vector<Case> cases = load_dataset(args.datasets[i], &criteria);
        ReportOptions options;
        options.basis = args.basis == "labels" ? CorrelationBasis::label_indicators
                                               : CorrelationBasis::final_scores;
        if (!args.manifests.empty()) {
            RunManifest manifest = load_manifest(args.manifests[i]);
            options.split_name = manifest.split_name;
            options.method = manifest.method;
            options.failed = manifest.failures.size();
        } else {
            options.split_name = fs::path(args.records[i]).parent_path().filename().string();
            if (options.split_name.empty())
                options.split_name = fs::path(args.records[i]).stem().string();
        }
        report.splits.push_back(build_report(records, cases, criteria, options));
    }

    std::string rendered = render_report(
        report, args.format == "structured" ? ReportFormat::structured : ReportFormat::table);
    if (args.out_file.empty()) {
        std::cout << rendered;
    } else {
        write_file_atomic(args.out_file, rendered);
        std::cout << "report written to " << args.out_file << "\n";
    }
    return kExitOk;
}

int run_diff(const std::string& old_path, const std::string& new_path, const std::string& format) {
    ShotSet old_set = ShotSet::load(old_path);
    ShotSet new_set = ShotSet::load(new_path);
    ShotSetDiff diff = diff_shot_sets(old_set, new_set);
    if (format == "structured") {
        std::cout << diff.summary_json().dump(2) << "\n";
        return kExitOk;
    }
    std::cout << "task \"" << diff.task << "\": v" << diff.old_version << " -> v" << diff.new_version
              << "\n";
    for (const auto& [label, d] : diff.labels) {
        size_t added = d.count(ChangeKind::added);
        size_t modified = d.count(ChangeKind::modified);
        size_t removed = d.removed_old_indices.size();
        if (added + modified + removed == 0) continue;
        std::cout << "  " << label << ": +" << added << " ~" << modified << " -" << removed << "\n";
    }
    std::cout << "total: " << diff.total(ChangeKind::unchanged) << " unchanged, "
              << diff.total(ChangeKind::modified) << " modified, " << diff.total(ChangeKind::added)
              << " added, " << diff.total_removed() << " removed\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"criteria-driven LLM-as-judge evaluation harness"};
    app.require_subcommand(1);

    SplitArgs split_args;
    CLI::App* split = app.add_subcommand("split", "partition a dataset into train/eval/test");
    split->add_option("--dataset", split_args.dataset, "input dataset (JSONL)")->required();
    split->add_option("--out-dir", split_args.out_dir, "output directory")->required();
    split->add_option("--ratios", split_args.ratios, "train,eval,test ratios (default 0.6,0.2,0.2)");
    split->add_option("--seed", split_args.seed, "shuffle seed");
    split->add_option("--stratify-by", split_args.stratify_by, "stratify by human_score or task");
    split->add_option("--criteria", split_args.criteria, "criteria file for annotation validation");

    std::string lint_criteria, lint_shots, lint_config;
    CLI::App* lint = app.add_subcommand("lint", "check a shot set against the authoring rules");
    lint->add_option("--criteria", lint_criteria, "criteria file")->required();
    lint->add_option("--shots", lint_shots, "shot set file")->required();
    lint->add_option("--lint-config", lint_config, "lint configuration file");

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "judge a dataset split");
    run->add_option("--criteria", run_args.criteria, "criteria file")->required();
    run->add_option("--shots", run_args.shots, "shot set file")->required();
    run->add_option("--split", run_args.split_file, "dataset split to judge (JSONL)")->required();
    run->add_option("--out-dir", run_args.out_dir, "output directory")->required();
    run->add_option("--template", run_args.template_file, "prompt template file");
    run->add_option("--split-name", run_args.split_name, "split name recorded in the manifest");
    run->add_option("--backend", run_args.backend_kind, "scripted or remote")
        ->check(CLI::IsMember({"scripted", "remote"}));
    run->add_option("--script", run_args.script, "scripted responses file");
    run->add_option("--endpoint", run_args.endpoint, "remote endpoint URL");
    run->add_option("--model", run_args.model, "remote model name");
    run->add_option("--api-key-env", run_args.api_key_env,
                    "environment variable holding the API credential");
    run->add_option("--mode", run_args.mode, "division or non-division")
        ->check(CLI::IsMember({"division", "non-division"}));
    run->add_option("--protocol", run_args.protocol, "single or multiturn")
        ->check(CLI::IsMember({"single", "multiturn"}));
    run->add_option("--override", run_args.overrides,
                    "per-label protocol override LABEL=single|multiturn|zero_only");
    run->add_option("--shot-limit", run_args.shot_limit, "max shots per label");
    run->add_option("--char-budget", run_args.char_budget, "context character budget");
    run->add_flag("--repeat-descriptions,!--no-repeat-descriptions", run_args.repeat_descriptions,
                  "ask the judge to restate the label description first");
    run->add_option("--temperature", run_args.temperature, "sampling temperature");
    run->add_option("--max-retries", run_args.max_retries, "retry budget per request");
    run->add_option("--timeout-ms", run_args.timeout_ms, "request timeout");
    run->add_option("--parallelism", run_args.parallelism, "max in-flight requests");

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "score run records against human annotations");
    report->add_option("--criteria", report_args.criteria, "criteria file")->required();
    report->add_option("--records", report_args.records, "run records file (repeatable)")->required();
    report->add_option("--dataset", report_args.datasets, "annotated dataset per records file")
        ->required();
    report->add_option("--manifest", report_args.manifests, "run manifest per records file");
    report->add_option("--format", report_args.format, "table or structured")
        ->check(CLI::IsMember({"table", "structured"}));
    report->add_option("--basis", report_args.basis, "correlation basis: final or labels")
        ->check(CLI::IsMember({"final", "labels"}));
    report->add_option("--out", report_args.out_file, "write the report to a file");

    std::string diff_old, diff_new, diff_format = "table";
    CLI::App* diff = app.add_subcommand("diff-shots", "summarize changes between shot set versions");
    diff->add_option("old", diff_old, "old shot set file")->required();
    diff->add_option("new", diff_new, "new shot set file")->required();
    diff->add_option("--format", diff_format, "table or structured")
        ->check(CLI::IsMember({"table", "structured"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (split->parsed()) return run_split(split_args);
        if (lint->parsed()) return run_lint(lint_criteria, lint_shots, lint_config);
        if (run->parsed()) return run_run(run_args);
        if (report->parsed()) return run_report(report_args);
        if (diff->parsed()) return run_diff(diff_old, diff_new, diff_format);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
