#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccoov/attention_export.hpp"
#include "ccoov/checkpoint.hpp"
#include "ccoov/evaluation.hpp"
#include "ccoov/synthetic.hpp"
#include "ccoov/training.hpp"

namespace ccoov {

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Bad option values that are only detectable after parsing (exit 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

CLI::Validator strategy_validator(bool allow_list) {
    return {[allow_list](std::string& text) -> std::string {
                const auto items = allow_list ? split_list(text) : std::vector<std::string>{text};
                if (items.empty()) return "expected at least one strategy";
                for (const auto& s : items) {
                    try {
                        parse_oov_kind(s);
                    } catch (const Error&) {
                        return "unknown strategy '" + s + "' (predictor, random, unk)";
                    }
                }
                return {};
            },
            "STRATEGY", "strategy"};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("write failed for " + path.string());
}

struct TrainArgs {
    std::string train, dev, embeddings, config, out, log;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

struct ModelArgs {
    std::string checkpoint, corpus, embeddings;
};

int run_train(const TrainArgs& a, std::ostream& out) {
    TrainConfig config = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
    for (const auto& kv : a.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
        set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.seed) config.seed = *a.seed;
    try {
        config.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    const Corpus training = read_conllu(a.train);
    std::optional<Corpus> dev;
    if (!a.dev.empty()) dev = read_conllu(a.dev);
    const EmbeddingTable table = EmbeddingTable::load(a.embeddings, config.model.predictor.word_dim);

    ProgressCallback progress;
    if (!a.quiet) {
        progress = [&out](const EpochLog& e) {
            out << "epoch " << e.epoch << "  loss " << std::fixed << std::setprecision(4) << e.train_loss;
            if (e.dev) out << "  dev " << std::setprecision(2) << 100.0 * selection_score(*e.dev);
            if (e.clipped_batches) out << "  clipped " << e.clipped_batches;
            if (e.best) out << "  *";
            out << '\n' << std::flush;
        };
    }
    TrainResult result = train(training, dev ? &*dev : nullptr, table, config, progress);
    save_checkpoint(result.model, config, a.out);
    const std::string log_path = a.log.empty() ? a.out + ".log.json" : a.log;
    nlohmann::json log = {{"best_epoch", result.best_epoch}, {"epochs", training_log_json(result.log)}};
    write_text(log_path, log.dump(2) + "\n");
    if (!a.quiet) out << "saved " << a.out << " (best epoch " << result.best_epoch << ")\n";
    return 0;
}

struct Loaded {
    Checkpoint checkpoint;
    Corpus corpus;
    EmbeddingTable table;
};

Loaded load_inputs(const ModelArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    Corpus corpus = read_conllu(a.corpus);
    EmbeddingTable table = EmbeddingTable::load(a.embeddings, ck.config.model.predictor.word_dim);
    return {std::move(ck), std::move(corpus), std::move(table)};
}

int run_compare(const ModelArgs& a, const std::vector<std::string>& strategies, const std::string& json_path,
                std::ostream& out) {
    Loaded in = load_inputs(a);
    std::vector<OovKind> kinds;
    for (const auto& s : strategies) kinds.push_back(parse_oov_kind(s));
    const RandomEmbeddings random = make_random_embeddings(in.table, in.checkpoint.config.seed);
    const auto reports = compare_strategies(in.checkpoint.model, in.corpus, in.table, kinds, random);
    out << format_reports(reports);
    if (!json_path.empty()) write_text(json_path, reports_to_json(reports).dump(2) + "\n");
    return 0;
}

int run_predict(const ModelArgs& a, const std::string& strategy, const std::string& output, std::ostream& out) {
    Loaded in = load_inputs(a);
    const OovKind kind = parse_oov_kind(strategy);
    const RandomEmbeddings random = make_random_embeddings(in.table, in.checkpoint.config.seed);
    Corpus tagged;
    for (const auto& s : in.corpus.sentences) {
        if (s.tokens.empty()) {
            tagged.sentences.push_back(s);
            continue;
        }
        const auto prediction = predict_sentence(in.checkpoint.model, s, in.table, kind, random);
        tagged.sentences.push_back(apply_predictions(in.checkpoint.model, s, prediction));
    }
    if (output.empty() || output == "-")
        write_conllu(out, tagged);
    else
        write_text(output, to_conllu(tagged));
    return 0;
}

int run_export(const ModelArgs& a, const std::string& prefix, double temperature, const std::string& targets,
               std::ostream& out) {
    Loaded in = load_inputs(a);
    const auto list = split_list(targets);
    const WordSet target_set(list.begin(), list.end());
    const RandomEmbeddings random = make_random_embeddings(in.table, in.checkpoint.config.seed);
    const ExportPaths paths =
        export_attention(in.checkpoint.model, in.corpus, in.table, random, target_set, prefix, temperature);
    out << "wrote " << paths.json.string() << " and " << paths.html.string() << '\n';
    return 0;
}

int run_analyze(const std::string& corpus_path, const std::string& embeddings, std::size_t dim, bool no_lowercase,
                bool as_json, std::ostream& out) {
    Corpus corpus = read_conllu(corpus_path);
    const EmbeddingTable table = EmbeddingTable::load(embeddings, dim);
    const OovStats stats = mark_oov(corpus, table, !no_lowercase);
    if (as_json) {
        out << nlohmann::json{{"tokens", stats.tokens},
                              {"oov_tokens", stats.oov_tokens},
                              {"token_rate", stats.token_rate()},
                              {"types", stats.types},
                              {"oov_types", stats.oov_types},
                              {"type_rate", stats.type_rate()}}
                   .dump(2)
            << '\n';
        return 0;
    }
    out << std::fixed << std::setprecision(1) << "OOV tokens: " << stats.oov_tokens << " / " << stats.tokens << " ("
        << 100.0 * stats.token_rate() << "%)\n"
        << "OOV types:  " << stats.oov_types << " / " << stats.types << " (" << 100.0 * stats.type_rate() << "%)\n";
    return 0;
}

int run_synth(const std::string& dir, const SyntheticConfig& config, std::ostream& out) {
    std::filesystem::create_directories(dir);
    const SyntheticData data = generate_suffix_language(config);
    const std::filesystem::path root(dir);
    write_text(root / "train.conllu", to_conllu(data.train));
    write_text(root / "dev.conllu", to_conllu(data.dev));
    write_text(root / "test.conllu", to_conllu(data.test));
    data.table.save(root / "embeddings.vec");
    out << "wrote " << (root / "{train,dev,test}.conllu").string() << " and " << (root / "embeddings.vec").string()
        << '\n';
    return 0;
}

void add_model_options(CLI::App* cmd, ModelArgs& a, const std::string& corpus_flag) {
    cmd->add_option("--checkpoint,-m", a.checkpoint, "Trained checkpoint")->required();
    cmd->add_option(corpus_flag, a.corpus, "CoNLL-U corpus")->required();
    cmd->add_option("--embeddings,-e", a.embeddings, "Embedding table (text format)")->required();
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Contextual-compositional OOV embeddings for BiLSTM POS and morphology tagging", "ccoov"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a tagger and OOV predictor");
    train_cmd->add_option("--train", train_args.train, "Training corpus (CoNLL-U)")->required();
    train_cmd->add_option("--dev", train_args.dev, "Development corpus for model selection (CoNLL-U)");
    train_cmd->add_option("--embeddings,-e", train_args.embeddings, "Embedding table (text format)")->required();
    train_cmd->add_option("--config,-c", train_args.config, "key = value configuration file");
    train_cmd->add_option("--set", train_args.overrides, "Override a configuration key (key=value)");
    train_cmd->add_option("--out,-o", train_args.out, "Checkpoint path")->required();
    train_cmd->add_option("--log", train_args.log, "Metrics log path (default: <out>.log.json)");
    train_cmd->add_option("--seed", train_args.seed, "Random seed (overrides the config)");
    train_cmd->add_flag("--quiet,-q", train_args.quiet, "No per-epoch output");

    ModelArgs eval_args;
    std::string eval_strategy = "predictor", eval_json;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a corpus with one OOV strategy");
    add_model_options(eval_cmd, eval_args, "--test,-t");
    eval_cmd->add_option("--strategy", eval_strategy, "predictor, random or unk")
        ->capture_default_str()
        ->check(strategy_validator(false));
    eval_cmd->add_option("--json", eval_json, "Also write the report as JSON");

    ModelArgs compare_args;
    std::string compare_strategies_text = "predictor,random,unk", compare_json;
    auto* compare_cmd = app.add_subcommand("compare", "Score one trained model under several OOV strategies");
    add_model_options(compare_cmd, compare_args, "--test,-t");
    compare_cmd->add_option("--strategies", compare_strategies_text, "Comma-separated strategies")
        ->capture_default_str()
        ->check(strategy_validator(true));
    compare_cmd->add_option("--json", compare_json, "Also write the reports as JSON");

    ModelArgs predict_args;
    std::string predict_strategy = "predictor", predict_output;
    auto* predict_cmd = app.add_subcommand("predict", "Tag a corpus and write CoNLL-U");
    add_model_options(predict_cmd, predict_args, "--input,-i");
    predict_cmd->add_option("--strategy", predict_strategy, "predictor, random or unk")
        ->capture_default_str()
        ->check(strategy_validator(false));
    predict_cmd->add_option("--output,-o", predict_output, "Output path (default: stdout)");

    ModelArgs export_args;
    std::string export_prefix, export_targets;
    double temperature = 1.0;
    auto* export_cmd = app.add_subcommand("export-attention", "Write attention weights as JSON and an HTML heatmap");
    add_model_options(export_cmd, export_args, "--input,-i");
    export_cmd->add_option("--out,-o", export_prefix, "Output prefix (writes <prefix>.json and <prefix>.html)")
        ->required();
    export_cmd->add_option("--temperature,-T", temperature, "Display softmax temperature")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    export_cmd->add_option("--targets", export_targets,
                           "Comma-separated in-vocabulary words to route through the predictor as well");

    std::string analyze_corpus, analyze_embeddings;
    std::size_t analyze_dim = EmbeddingTable::kDefaultDim;
    bool no_lowercase = false, analyze_json = false;
    auto* analyze_cmd = app.add_subcommand("analyze-oov", "Report the OOV rate of a corpus against a table");
    analyze_cmd->add_option("--corpus,-i", analyze_corpus, "CoNLL-U corpus")->required();
    analyze_cmd->add_option("--embeddings,-e", analyze_embeddings, "Embedding table (text format)")->required();
    analyze_cmd->add_option("--dim", analyze_dim, "Embedding dimension")->capture_default_str();
    analyze_cmd->add_flag("--no-lowercase", no_lowercase, "Disable the lowercase lookup fallback");
    analyze_cmd->add_flag("--json", analyze_json, "Print JSON");

    std::string synth_dir;
    SyntheticConfig synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic suffix-morphology dataset");
    synth_cmd->add_option("--out-dir,-o", synth_dir, "Output directory")->required();
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
    synth_cmd->add_option("--train-sentences", synth.train_sentences)->capture_default_str();
    synth_cmd->add_option("--dev-sentences", synth.dev_sentences)->capture_default_str();
    synth_cmd->add_option("--test-sentences", synth.test_sentences)->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 1;
    }

    try {
        if (train_cmd->parsed()) return run_train(train_args, out);
        if (eval_cmd->parsed()) {
            return run_compare(eval_args, {eval_strategy}, eval_json, out);
        }
        if (compare_cmd->parsed()) return run_compare(compare_args, split_list(compare_strategies_text), compare_json, out);
        if (predict_cmd->parsed()) return run_predict(predict_args, predict_strategy, predict_output, out);
        if (export_cmd->parsed()) return run_export(export_args, export_prefix, temperature, export_targets, out);
        if (analyze_cmd->parsed())
            return run_analyze(analyze_corpus, analyze_embeddings, analyze_dim, no_lowercase, analyze_json, out);
        if (synth_cmd->parsed()) return run_synth(synth_dir, synth, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

}  // namespace ccoov
