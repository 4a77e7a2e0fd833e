// ontosg: command-line front end for the ontology, dataset, post-processing
// and evaluation stages.
//
// Exit codes: 0 success, 1 validation failure, 2 input-format error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ontosg/ontosg.hpp"

namespace fs = std::filesystem;
using namespace ontosg;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 1;
constexpr int exit_format = 2;

constexpr std::uint64_t default_seed = 20240607;

/// Reported as exit code 1 after its message is printed.
struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void print_stats_table(std::ostream& out, const std::vector<std::pair<std::string, DatasetStats>>& stages) {
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %8s %12s %14s %12s %10s\n", "stage", "images", "objects/img",
                  "triplets/img", "pairs/img", "% pairs");
    out << line;
    for (const auto& [name, s] : stages) {
        std::snprintf(line, sizeof line, "%-12s %8zu %12s %14s %12s %10s\n", name.c_str(), s.num_images,
                      fixed(s.connected_objects_per_image).c_str(), fixed(s.triplets_per_image).c_str(),
                      fixed(s.annotated_pairs_per_image).c_str(), fixed(s.pct_pairs_annotated).c_str());
        out << line;
    }
}

Json stats_json(const std::vector<std::pair<std::string, DatasetStats>>& stages) {
    Json j = Json::object();
    for (const auto& [name, s] : stages) {
        j[name] = to_json(s);
    }
    return j;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

const SceneGraph& graph_for(const std::map<std::string, const SceneGraph*>& index, const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) {
        throw FormatError("scores reference image '" + id + "', which is not in the dataset");
    }
    return *it->second;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_validate(const std::string& ontology_path) {
    const Ontology onto = load_ontology(ontology_path);
    const auto diags = validate_ontology(onto);
    for (const auto& d : diags) {
        std::cout << to_string(d) << "\n";
    }
    std::cout << onto.classes().size() << " classes, " << onto.predicates().size() << " predicates\n";
    if (has_errors(diags)) {
        throw ValidationFailure("ontology has errors");
    }
    return exit_ok;
}

struct ConvertOptions {
    std::string dataset;
    std::string map;
    std::string ontology;
    std::string filter_tag;
    std::string out_dir;
    bool augment = false;
    double split = 0.1;
    std::uint64_t seed = default_seed;
};

int cmd_convert(const ConvertOptions& opt) {
    std::cout << "seed: " << opt.seed << "\n";
    if (opt.augment && opt.ontology.empty()) {
        throw std::invalid_argument("--augment needs --ontology");
    }
    const std::optional<Ontology> onto =
        opt.ontology.empty() ? std::nullopt : std::optional<Ontology>(load_ontology(opt.ontology));
    const PredicateMap map = load_predicate_map(opt.map);
    LoadReport report;
    std::vector<SceneGraph> graphs = load_dataset(opt.dataset, &report);

    std::vector<std::pair<std::string, DatasetStats>> stages{{"base", compute_stats(graphs)}};
    if (!opt.filter_tag.empty()) {
        graphs = filter_by_tag(graphs, opt.filter_tag);
    }

    std::vector<SceneGraph> mapped;
    std::size_t flagged = 0;
    for (const auto& g : graphs) {
        mapped.push_back(apply_predicate_map(g, map));
        flagged += mapped.back().flags.contains(SceneGraph::empty_after_mapping);
    }
    if (onto) {
        for (const auto& g : mapped) {
            for (const auto& e : g.triplets) {
                onto->predicate(e.triplet.predicate);
            }
        }
    }
    stages.emplace_back("filtered", compute_stats(mapped));

    if (opt.augment) {
        for (auto& g : mapped) {
            g = augment_with_inference(g, *onto);
        }
        stages.emplace_back("augmented", compute_stats(mapped));
    }

    const Split split = stratified_split(mapped, opt.split, opt.seed);
    const fs::path out(opt.out_dir);
    fs::create_directories(out);
    write_text_file(out / "converted.jsonl", serialize_dataset(mapped));
    write_text_file(out / "train.jsonl", serialize_dataset(split.train));
    write_text_file(out / "validation.jsonl", serialize_dataset(split.validation));
    write_text_file(out / "manifest.json", split_manifest(split, opt.split, opt.seed).dump(2) + "\n");
    Json stats = stats_json(stages);
    stats["empty_after_mapping"] = flagged;
    stats["duplicate_triplets"] = report.duplicate_triplets;
    write_text_file(out / "stats.json", stats.dump(2) + "\n");
    write_text_file(out / "registry.json", serialize_registry(build_seen_triplet_registry(split.train)));

    print_stats_table(std::cout, stages);
    std::cout << flagged << " images kept without mapped triplets (flagged)\n"
              << "train " << split.train.size() << ", validation " << split.validation.size() << "\n";
    return exit_ok;
}

int cmd_stats(const std::string& dataset, const std::string& json_out) {
    const auto graphs = load_dataset(dataset);
    const std::vector<std::pair<std::string, DatasetStats>> stages{{"dataset", compute_stats(graphs)}};
    print_stats_table(std::cout, stages);
    const std::string json = stats_json(stages).dump(2) + "\n";
    if (json_out.empty()) {
        std::cout << json;
    } else {
        write_text_file(json_out, json);
    }
    return exit_ok;
}

struct BaselineOptions {
    std::string train;
    std::string test;
    std::string out;
    std::string ontology;
    std::string prior_out;
    double smoothing = 1.0;
};

int cmd_baseline(const BaselineOptions& opt) {
    std::vector<std::string> predicates;
    if (!opt.ontology.empty()) {
        for (const auto& p : load_ontology(opt.ontology).predicates()) {
            predicates.push_back(p.name);
        }
    }
    const FrequencyPrior prior = fit_prior(load_dataset(opt.train), opt.smoothing, predicates);
    ScoresByImage scores;
    for (const auto& g : load_dataset(opt.test)) {
        scores[g.image_id] = score_image(prior, g);
    }
    write_text_file(opt.out, serialize_scores(scores));
    if (!opt.prior_out.empty()) {
        write_text_file(opt.prior_out, to_json(prior).dump(2) + "\n");
    }
    std::cout << "scored " << scores.size() << " images over " << prior.predicates().size() << " predicates\n";
    return exit_ok;
}

struct PostprocessOptions {
    std::string scores;
    std::string dataset;
    std::string ontology;
    std::string out_dir;
    std::string emit = "json";
    std::size_t top_k = 16;
    std::size_t graph_constraint = 1;
    bool no_tensor = false;
    bool no_axioms = false;
    bool expand_implicit = false;
};

int cmd_postprocess(const PostprocessOptions& opt) {
    const Ontology onto = load_ontology(opt.ontology);
    const ConstraintTensor tensor = build_constraint_tensor(onto);
    const auto graphs = load_dataset(opt.dataset);
    std::map<std::string, const SceneGraph*> index;
    for (const auto& g : graphs) {
        index[g.image_id] = &g;
    }
    const ScoresByImage scores = load_scores(opt.scores);
    const SelectionConfig config{opt.top_k, opt.graph_constraint, !opt.no_tensor, !opt.no_axioms,
                                 opt.expand_implicit};

    std::string selections;
    std::map<std::string, std::string> documents;
    for (const auto& [id, proposals] : scores) {
        const SceneGraph& g = graph_for(index, id);
        SelectionResult r;
        if (config.apply_tensor_filter) {
            FilterResult known = partition_known_classes(proposals, tensor, g.classes());
            r = select_top(known.kept, config, onto, tensor, g.classes());
            r.pruned.insert(r.pruned.end(), known.pruned.begin(), known.pruned.end());
        } else {
            r = select_top(proposals, config, onto, tensor, g.classes());
        }
        selections += to_json(r, id).dump() + "\n";
        if (opt.emit != "json") {
            documents[id] = emit_graph(r, g, opt.emit == "dot" ? EmitFormat::dot : EmitFormat::text);
        }
    }

    if (opt.out_dir.empty()) {
        if (opt.emit == "json") {
            std::cout << selections;
        }
        for (const auto& [id, doc] : documents) {
            if (opt.emit == "text") {
                std::cout << "# " << id << "\n";
            }
            std::cout << doc;
        }
        return exit_ok;
    }
    const fs::path out(opt.out_dir);
    fs::create_directories(out);
    write_text_file(out / "selection.jsonl", selections);
    for (const auto& [id, doc] : documents) {
        write_text_file(out / (id + (opt.emit == "dot" ? ".dot" : ".txt")), doc);
    }
    std::cout << "wrote " << scores.size() << " selections to " << out.string() << "\n";
    return exit_ok;
}

struct EvaluateOptions {
    std::string gt;
    std::string scores;
    std::string ontology;
    std::string registry;
    std::string out;
    std::string aggregation = "per_image_mean";
    std::vector<std::size_t> k_values{20, 50, 100};
    std::vector<std::size_t> graph_constraints{1, 8};
    bool restrict_labeled = false;
    bool post = false;
    bool no_tensor = false;
    bool no_axioms = false;
    bool include_implicit = false;
};

int cmd_evaluate(const EvaluateOptions& opt) {
    const auto gt = load_dataset(opt.gt);
    const ScoresByImage scores = load_scores(opt.scores);
    MetricsConfig config;
    config.k_values = opt.k_values;
    config.graph_constraints = opt.graph_constraints;
    config.aggregation = opt.aggregation == "dataset_micro" ? Aggregation::dataset_micro : Aggregation::per_image_mean;
    config.restrict_to_labeled_pairs = opt.restrict_labeled;
    if (!opt.registry.empty()) {
        config.zero_shot_registry = parse_registry(read_text_file(opt.registry));
    }
    const std::optional<Ontology> onto =
        opt.ontology.empty() ? std::nullopt : std::optional<Ontology>(load_ontology(opt.ontology));
    if (onto) {
        config.tie_order = RankOrder(*onto);
    }

    const MetricsReport plain = evaluate(gt, scores, config);
    if (!opt.post) {
        std::cout << format_report(plain);
        if (!opt.out.empty()) {
            write_text_file(opt.out, to_json(plain).dump(2) + "\n");
        }
        return exit_ok;
    }

    if (!onto) {
        throw std::invalid_argument("--post needs --ontology");
    }
    const ConstraintTensor tensor = build_constraint_tensor(*onto);
    ScoresByImage processed;
    for (const auto& g : gt) {
        auto it = scores.find(g.image_id);
        if (it == scores.end()) {
            continue; // reported by evaluate below
        }
        const auto& proposals =
            opt.no_tensor ? it->second : partition_known_classes(it->second, tensor, g.classes()).kept;
        processed[g.image_id] = postprocess_proposals(proposals, *onto, tensor, g.classes(), !opt.no_tensor,
                                                      !opt.no_axioms, opt.include_implicit);
    }
    const MetricsReport post = evaluate(gt, processed, config);
    std::cout << "without post-processing\n" << format_report(plain) << "\nwith post-processing\n"
              << format_report(post);
    if (!opt.out.empty()) {
        write_text_file(opt.out, Json{{"without_post", to_json(plain)}, {"with_post", to_json(post)}}.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_tensor_dump(const std::string& ontology_path) {
    const Ontology onto = load_ontology(ontology_path);
    const ConstraintTensor tensor = build_constraint_tensor(onto);
    std::cout << "subject_class,object_class,predicate,allowed\n";
    for (std::size_t a = 0; a < tensor.num_classes(); ++a) {
        for (std::size_t b = 0; b < tensor.num_classes(); ++b) {
            for (std::size_t p = 0; p < tensor.num_predicates(); ++p) {
                std::cout << csv_field(tensor.class_names()[a]) << ',' << csv_field(tensor.class_names()[b]) << ','
                          << csv_field(tensor.predicate_names()[p]) << ',' << (tensor.at(a, b, p) ? 1 : 0) << '\n';
            }
        }
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ontology-guided scene graph tooling"};
    app.require_subcommand(1);
    std::function<int()> run;

    std::string ontology_path;
    auto* validate = app.add_subcommand("validate", "Parse and check an ontology");
    validate->add_option("ontology", ontology_path, "Ontology JSON")->required()->check(CLI::ExistingFile);
    validate->callback([&] { run = [&] { return cmd_validate(ontology_path); }; });

    ConvertOptions conv;
    auto* convert = app.add_subcommand("convert", "Filter, map, augment and split a dataset");
    convert->add_option("--dataset", conv.dataset, "Input dataset (JSONL)")->required()->check(CLI::ExistingFile);
    convert->add_option("--map", conv.map, "Predicate map JSON")->required()->check(CLI::ExistingFile);
    convert->add_option("--ontology", conv.ontology, "Ontology JSON")->check(CLI::ExistingFile);
    convert->add_option("--filter-tag", conv.filter_tag, "Keep only images carrying this tag");
    convert->add_flag("--augment", conv.augment, "Add inferred triplets");
    convert->add_option("--split", conv.split, "Validation fraction")->capture_default_str();
    convert->add_option("--seed", conv.seed, "Split seed")->capture_default_str();
    convert->add_option("--out", conv.out_dir, "Output directory")->required();
    convert->callback([&] { run = [&] { return cmd_convert(conv); }; });

    std::string stats_dataset, stats_out;
    auto* stats = app.add_subcommand("stats", "Dataset statistics");
    stats->add_option("dataset", stats_dataset, "Dataset (JSONL)")->required()->check(CLI::ExistingFile);
    stats->add_option("--json", stats_out, "Write JSON here instead of stdout");
    stats->callback([&] { run = [&] { return cmd_stats(stats_dataset, stats_out); }; });

    BaselineOptions base;
    auto* baseline = app.add_subcommand("baseline", "Fit the frequency prior and score a dataset");
    baseline->add_option("--train", base.train, "Training dataset")->required()->check(CLI::ExistingFile);
    baseline->add_option("--test", base.test, "Dataset to score")->required()->check(CLI::ExistingFile);
    baseline->add_option("--out", base.out, "Scores file (JSONL)")->required();
    baseline->add_option("--ontology", base.ontology, "Take the predicate list from this ontology")
        ->check(CLI::ExistingFile);
    baseline->add_option("--smoothing", base.smoothing, "Additive smoothing")->capture_default_str();
    baseline->add_option("--prior-out", base.prior_out, "Also write the fitted prior");
    baseline->callback([&] { run = [&] { return cmd_baseline(base); }; });

    PostprocessOptions post;
    auto* postprocess = app.add_subcommand("postprocess", "Filter, prune and select proposals");
    postprocess->add_option("--scores", post.scores, "Scores file")->required()->check(CLI::ExistingFile);
    postprocess->add_option("--dataset", post.dataset, "Dataset with the scored objects")
        ->required()
        ->check(CLI::ExistingFile);
    postprocess->add_option("--ontology", post.ontology, "Ontology JSON")->required()->check(CLI::ExistingFile);
    postprocess->add_option("--top-k", post.top_k, "K")->capture_default_str()->check(CLI::PositiveNumber);
    postprocess->add_option("--graph-constraint", post.graph_constraint, "k")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    postprocess->add_flag("--no-tensor", post.no_tensor, "Skip domain/range filtering");
    postprocess->add_flag("--no-axioms", post.no_axioms, "Skip axiom pruning");
    postprocess->add_flag("--expand-implicit", post.expand_implicit, "Add entailed triplets");
    postprocess->add_option("--emit", post.emit, "json, dot or text")
        ->capture_default_str()
        ->check(CLI::IsMember({"json", "dot", "text"}));
    postprocess->add_option("--out", post.out_dir, "Output directory (default: stdout)");
    postprocess->callback([&] { run = [&] { return cmd_postprocess(post); }; });

    EvaluateOptions ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Recall metrics over a (K, k) grid");
    evaluate_cmd->add_option("--gt", ev.gt, "Ground-truth dataset")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--scores", ev.scores, "Scores file")->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--K", ev.k_values, "K cutoffs")->delimiter(',')->capture_default_str();
    evaluate_cmd->add_option("--k", ev.graph_constraints, "Graph constraints")->delimiter(',')->capture_default_str();
    evaluate_cmd->add_option("--aggregation", ev.aggregation, "per_image_mean or dataset_micro")
        ->capture_default_str()
        ->check(CLI::IsMember({"per_image_mean", "dataset_micro"}));
    evaluate_cmd->add_option("--registry", ev.registry, "Seen-triplet registry for zR@K")->check(CLI::ExistingFile);
    evaluate_cmd->add_flag("--restrict-labeled", ev.restrict_labeled, "Rank only labeled object pairs");
    evaluate_cmd->add_flag("--post", ev.post, "Also report after post-processing");
    evaluate_cmd->add_option("--ontology", ev.ontology, "Ontology for --post; also sets predicate tie order")->check(CLI::ExistingFile);
    evaluate_cmd->add_flag("--no-tensor", ev.no_tensor, "Post-processing without domain/range filtering");
    evaluate_cmd->add_flag("--no-axioms", ev.no_axioms, "Post-processing without axiom pruning");
    evaluate_cmd->add_flag("--include-implicit", ev.include_implicit, "Score entailed triplets too");
    evaluate_cmd->add_option("--out", ev.out, "Write the JSON report here");
    evaluate_cmd->callback([&] { run = [&] { return cmd_evaluate(ev); }; });

    std::string tensor_ontology;
    auto* tensor = app.add_subcommand("tensor", "Constraint tensor tools");
    tensor->require_subcommand(1);
    auto* dump = tensor->add_subcommand("dump", "Print the tensor as CSV");
    dump->add_option("ontology", tensor_ontology, "Ontology JSON")->required()->check(CLI::ExistingFile);
    dump->callback([&] { run = [&] { return cmd_tensor_dump(tensor_ontology); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_format;
    }

    try {
        return run();
    } catch (const ValidationFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return exit_format;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return exit_format;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return exit_format;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_format;
    }
}
