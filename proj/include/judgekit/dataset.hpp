#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "judgekit/criteria.hpp"
#include "judgekit/io.hpp"

namespace judgekit {

/// One item under evaluation, optionally carrying its human annotation.
struct Case {
    std::string id;
    std::string task;
    std::string instruction;
    std::optional<std::string> reference;
    std::string answer;
    std::optional<std::set<std::string>> human_labels;
    std::optional<int> human_score;

    friend bool operator==(const Case&, const Case&) = default;

    static Case from_json(const json& doc, const std::string& where) {
        if (!doc.is_object()) throw SchemaError("case record must be an object in " + where);
        check_known_fields(doc,
                           {"id", "task", "instruction", "reference", "answer", "human_labels",
                            "human_score"},
                           where);
        Case c;
        c.id = require_string(doc, "id", where);
        c.task = require_string(doc, "task", where);
        c.instruction = require_string(doc, "instruction", where);
        c.answer = require_string(doc, "answer", where);
        if (doc.contains("reference")) {
            if (!doc["reference"].is_string()) throw SchemaError("reference must be a string in " + where);
            c.reference = doc["reference"].get<std::string>();
        }
        if (doc.contains("human_labels")) {
            if (!doc["human_labels"].is_array())
                throw SchemaError("human_labels must be an array in " + where);
            std::set<std::string> labels;
            for (const json& l : doc["human_labels"]) {
                if (!l.is_string()) throw SchemaError("human_labels entries must be strings in " + where);
                if (!labels.insert(l.get<std::string>()).second)
                    throw SchemaError("duplicate human label in " + where);
            }
            c.human_labels = std::move(labels);
        }
        if (doc.contains("human_score")) {
            if (!doc["human_score"].is_number_integer())
                throw SchemaError("human_score must be an integer in " + where);
            int s = doc["human_score"].get<int>();
            if (s < 0 || s > 2) throw SchemaError("human_score out of range {0,1,2} in " + where);
            c.human_score = s;
        }
        if (c.id.empty()) throw SchemaError("empty case id in " + where);
        if (c.answer.empty()) throw SchemaError("empty answer in " + where);
        return c;
    }

    json to_json() const {
        json doc{{"id", id}, {"task", task}, {"instruction", instruction}, {"answer", answer}};
        if (reference) doc["reference"] = *reference;
        if (human_labels) doc["human_labels"] = json(*human_labels);
        if (human_score) doc["human_score"] = *human_score;
        return doc;
    }
};

/// Parses a JSONL dataset. Ids must be unique. When `criteria` is given,
/// human labels are checked against it and a stored human_score must agree
/// with the score derived from the stored labels.
inline std::vector<Case> parse_dataset(const std::string& content, const std::string& where,
                                       const CriteriaSet* criteria = nullptr) {
    std::vector<Case> cases;
    std::set<std::string> ids;
    size_t line_no = 0, pos = 0;
    while (pos <= content.size()) {
        size_t end = content.find('\n', pos);
        std::string line = content.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        pos = end == std::string::npos ? content.size() + 1 : end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string lw = where + ":" + std::to_string(line_no);
        Case c = Case::from_json(parse_json(line, lw), lw);
        if (!ids.insert(c.id).second) throw SchemaError("duplicate case id \"" + c.id + "\" in " + lw);
        if (criteria) {
            if (c.human_labels) {
                int derived = final_score(*c.human_labels, *criteria);  // validates label names
                if (c.human_score && *c.human_score != derived) {
                    throw SchemaError("human_score " + std::to_string(*c.human_score) +
                                      " disagrees with human_labels (expected " +
                                      std::to_string(derived) + ") in " + lw);
                }
            }
        }
        cases.push_back(std::move(c));
    }
    return cases;
}

inline std::vector<Case> load_dataset(const std::filesystem::path& path,
                                      const CriteriaSet* criteria = nullptr) {
    return parse_dataset(read_file(path), path.string(), criteria);
}

inline void save_dataset(const std::filesystem::path& path, const std::vector<Case>& cases) {
    std::string out;
    for (const Case& c : cases) {
        out += c.to_json().dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

/// Train/eval/test split request. Ratios must sum to 1.
struct SplitSpec {
    double train_ratio = 0.6;
    double eval_ratio = 0.2;
    double test_ratio = 0.2;
    uint64_t seed = 0;
    std::optional<std::string> stratify_by;  // "human_score" or "task"

    void validate() const {
        if (train_ratio < 0 || eval_ratio < 0 || test_ratio < 0)
            throw SchemaError("split ratios must be non-negative");
        if (std::abs(train_ratio + eval_ratio + test_ratio - 1.0) > 1e-9)
            throw SchemaError("split ratios must sum to 1");
        if (stratify_by && *stratify_by != "human_score" && *stratify_by != "task")
            throw SchemaError("unsupported stratify_by field \"" + *stratify_by + "\"");
    }
};

struct SplitResult {
    std::vector<Case> train;
    std::vector<Case> eval;
    std::vector<Case> test;
};

namespace detail {

/// Sizes are floor(ratio*n); leftover slots go one each to train, eval, test
/// in that order, skipping splits whose share is already integral.
inline std::array<size_t, 3> split_sizes(size_t n, const SplitSpec& spec) {
    std::array<double, 3> ratios{spec.train_ratio, spec.eval_ratio, spec.test_ratio};
    std::array<size_t, 3> sizes{};
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        sizes[i] = static_cast<size_t>(std::floor(ratios[i] * static_cast<double>(n) + 1e-9));
        assigned += sizes[i];
    }
    size_t remainder = n - assigned;
    for (int i = 0; i < 3 && remainder > 0; ++i) {
        double share = ratios[i] * static_cast<double>(n);
        if (share - std::floor(share + 1e-9) > 1e-9) {
            ++sizes[i];
            --remainder;
        }
    }
    // Degenerate rounding leftovers (all shares integral) go to train.
    sizes[0] += remainder;
    return sizes;
}

inline void split_one_stratum(std::vector<Case> cases, const SplitSpec& spec, std::mt19937_64& rng,
                              SplitResult& out) {
    std::shuffle(cases.begin(), cases.end(), rng);
    auto sizes = split_sizes(cases.size(), spec);
    size_t i = 0;
    for (size_t k = 0; k < sizes[0]; ++k) out.train.push_back(std::move(cases[i++]));
    for (size_t k = 0; k < sizes[1]; ++k) out.eval.push_back(std::move(cases[i++]));
    for (size_t k = 0; k < sizes[2]; ++k) out.test.push_back(std::move(cases[i++]));
}

}  // namespace detail

/// Deterministic partition of `cases` into train/eval/test. The same seed
/// always reproduces the same membership; the shuffle generator is mt19937_64
/// seeded directly with spec.seed.
inline SplitResult split_dataset(const std::vector<Case>& cases, const SplitSpec& spec) {
    spec.validate();
    if (cases.empty()) throw SchemaError("cannot split an empty dataset");
    size_t nonzero = (spec.train_ratio > 0) + (spec.eval_ratio > 0) + (spec.test_ratio > 0);
    if (cases.size() < nonzero)
        throw SchemaError("dataset smaller than the number of non-zero split ratios");

    std::mt19937_64 rng(spec.seed);
    SplitResult out;
    if (!spec.stratify_by) {
        detail::split_one_stratum(cases, spec, rng, out);
        return out;
    }
    std::map<std::string, std::vector<Case>> strata;  // sorted keys: deterministic order
    for (const Case& c : cases) {
        std::string key;
        if (*spec.stratify_by == "human_score") {
            key = c.human_score ? std::to_string(*c.human_score) : "unannotated";
        } else {
            key = c.task;
        }
        strata[key].push_back(c);
    }
    for (auto& [key, group] : strata) {
        detail::split_one_stratum(std::move(group), spec, rng, out);
    }
    return out;
}

}  // namespace judgekit
