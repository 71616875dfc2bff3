#include "ccoov/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

namespace ccoov {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError("config key '" + std::string(key) + "': bad value '" + std::string(text) + "'");
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ParseError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(text) + "'");
}

std::string number_text(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

// ---------------------------------------------------------------------------
// config

void TrainConfig::validate() const {
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (!(dropout_fraction >= 0.0 && dropout_fraction < 1.0)) throw Error("dropout_fraction must be in [0, 1)");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
    const auto& p = model.predictor;
    if (p.word_dim == 0 || p.char_dim == 0 || p.hidden == 0 || p.fuse_dim == 0 || model.tagger_hidden == 0)
        throw Error("model dimensions must be positive");
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
    if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "dropout_fraction") c.dropout_fraction = parse_number<double>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "beta1") c.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") c.beta2 = parse_number<double>(key, value);
    else if (key == "epsilon") c.epsilon = parse_number<double>(key, value);
    else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
    else if (key == "patience") c.patience = parse_number<std::size_t>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "clip_norm") c.clip_norm = parse_number<double>(key, value);
    else if (key == "train_strategy") c.train_strategy = parse_oov_kind(value);
    else if (key == "task") c.model.task = parse_task_mode(value);
    else if (key == "tagger_hidden") c.model.tagger_hidden = parse_number<std::size_t>(key, value);
    else if (key == "lowercase_fallback") c.model.lowercase_fallback = parse_bool(key, value);
    else if (key == "word_dim") c.model.predictor.word_dim = parse_number<std::size_t>(key, value);
    else if (key == "char_dim") c.model.predictor.char_dim = parse_number<std::size_t>(key, value);
    else if (key == "predictor_hidden") c.model.predictor.hidden = parse_number<std::size_t>(key, value);
    else if (key == "fuse_dim") c.model.predictor.fuse_dim = parse_number<std::size_t>(key, value);
    else if (key == "max_context") c.model.predictor.max_context = parse_number<std::size_t>(key, value);
    else throw ParseError("unknown config key '" + std::string(key) + "'");
}

std::map<std::string, std::string> config_key_values(const TrainConfig& c) {
    return {{"batch_size", std::to_string(c.batch_size)},
            {"dropout_fraction", number_text(c.dropout_fraction)},
            {"learning_rate", number_text(c.learning_rate)},
            {"beta1", number_text(c.beta1)},
            {"beta2", number_text(c.beta2)},
            {"epsilon", number_text(c.epsilon)},
            {"epochs", std::to_string(c.epochs)},
            {"patience", std::to_string(c.patience)},
            {"seed", std::to_string(c.seed)},
            {"clip_norm", number_text(c.clip_norm)},
            {"train_strategy", to_string(c.train_strategy)},
            {"task", to_string(c.model.task)},
            {"tagger_hidden", std::to_string(c.model.tagger_hidden)},
            {"lowercase_fallback", c.model.lowercase_fallback ? "true" : "false"},
            {"word_dim", std::to_string(c.model.predictor.word_dim)},
            {"char_dim", std::to_string(c.model.predictor.char_dim)},
            {"predictor_hidden", std::to_string(c.model.predictor.hidden)},
            {"fuse_dim", std::to_string(c.model.predictor.fuse_dim)},
            {"max_context", std::to_string(c.model.predictor.max_context)}};
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        set_config_value(base, trim(std::string_view(content).substr(0, eq)),
                         trim(std::string_view(content).substr(eq + 1)));
    }
    base.validate();
    return base;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_train_config(in, std::move(base));
}

// ---------------------------------------------------------------------------
// word dropout

std::size_t dropout_count(std::size_t vocabulary_size, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("dropout fraction must be in [0, 1)");
    // 0.15 * 100 must give 15, not 16 through representation error.
    const double k = std::ceil(fraction * static_cast<double>(vocabulary_size) - 1e-9);
    return std::min(vocabulary_size, static_cast<std::size_t>(std::max(k, 0.0)));
}

std::vector<std::string> sample_word_dropout(std::span<const std::string> vocabulary, double fraction, Rng& rng) {
    const std::size_t k = dropout_count(vocabulary.size(), fraction);
    std::vector<std::string> out;
    out.reserve(k);
    std::sample(vocabulary.begin(), vocabulary.end(), std::back_inserter(out), k, rng);
    return out;
}

std::vector<std::string> dropout_vocabulary(const Corpus& training, const EmbeddingTable& table,
                                            bool lowercase_fallback) {
    std::vector<std::string> out;
    for (auto& form : training_vocabulary(training))
        if (table.find(form, lowercase_fallback)) out.push_back(std::move(form));
    return out;
}

// ---------------------------------------------------------------------------
// optimization

void adam_step(std::span<const std::pair<std::string, ad::Tensor*>> params, AdamState& state,
               const AdamConfig& config) {
    if (state.step == 0 && state.m.empty()) {
        for (const auto& [name, t] : params) {
            state.m.emplace_back(t->size(), 0.0);
            state.v.emplace_back(t->size(), 0.0);
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeMismatch("Adam state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                            std::to_string(params.size()));
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& [name, t] = params[p];
        if (t->grad().size() != t->size() || state.m[p].size() != t->size() || state.v[p].size() != t->size())
            throw ShapeMismatch("Adam: gradient/state shape differs for " + name);
        for (double g : t->grad())
            if (!std::isfinite(g)) throw NonFinite("Adam: gradient of " + name);
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        ad::Tensor& tensor = *params[p].second;
        auto values = tensor.values();
        auto grad = tensor.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < values.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

double clip_gradients(std::span<const std::pair<std::string, ad::Tensor*>> params, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, t] : params)
        for (double g : t->grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (const auto& [name, t] : params)
            for (double& g : t->grad()) g *= factor;
    }
    return norm;
}

// ---------------------------------------------------------------------------
// logs

nlohmann::json to_json(const EpochLog& log) {
    return {{"epoch", log.epoch},
            {"train_loss", log.train_loss},
            {"clipped_batches", log.clipped_batches},
            {"dev", log.dev ? to_json(*log.dev) : nlohmann::json()},
            {"best", log.best}};
}

nlohmann::json training_log_json(std::span<const EpochLog> log) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : log) arr.push_back(to_json(e));
    return arr;
}

double selection_score(const EvalReport& report) {
    double total = 0.0;
    int n = 0;
    if (report.pos_accuracy_all) {
        total += *report.pos_accuracy_all;
        ++n;
    }
    if (report.morph_micro_f1_all) {
        total += *report.morph_micro_f1_all;
        ++n;
    }
    return n ? total / n : 0.0;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const NamedTensors& params) {
    Snapshot s;
    for (const auto& [name, t] : params) s.emplace_back(t->values().begin(), t->values().end());
    return s;
}

void restore(const NamedTensors& params, const Snapshot& s) {
    for (std::size_t i = 0; i < params.size(); ++i) std::copy(s[i].begin(), s[i].end(), params[i].second->values().begin());
}

}  // namespace

TrainResult train(const Corpus& training, const Corpus* dev, const EmbeddingTable& table, const TrainConfig& config,
                  const ProgressCallback& progress) {
    config.validate();
    if (training.token_count() == 0) throw EmptyCorpus("training corpus has no tokens");
    if (table.dim() != config.model.predictor.word_dim)
        throw DimensionMismatch("embedding table has dimension " + std::to_string(table.dim()) + ", model expects " +
                                std::to_string(config.model.predictor.word_dim));

    Rng rng(config.seed);
    TrainResult result;
    result.model = Model::init(config.model, Schema::build(training), training_vocabulary(training), rng);
    Model& model = result.model;
    const RandomEmbeddings random = make_random_embeddings(table, config.seed);
    const OovStrategy strategy = make_strategy(model, config.train_strategy, random);
    const std::vector<std::string> droppable = dropout_vocabulary(training, table, config.model.lowercase_fallback);

    std::vector<const Sentence*> sentences;
    std::vector<std::vector<EncodedToken>> gold;
    for (const auto& s : training.sentences) {
        if (s.tokens.empty()) continue;
        sentences.push_back(&s);
        gold.push_back(model.schema.encode(s));
    }

    const NamedTensors params = model.named_parameters();
    AdamState adam;
    const AdamConfig adam_config{config.learning_rate, config.beta1, config.beta2, config.epsilon};

    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);
    std::optional<double> best_score;
    Snapshot best;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochLog log;
        log.epoch = epoch;
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const auto sampled = sample_word_dropout(droppable, config.dropout_fraction, rng);
            const WordSet dropped(sampled.begin(), sampled.end());
            for (const auto& [name, t] : params) t->zero_grad();

            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t idx = order[k];
                const auto slots = make_word_slots(model, *sentences[idx], table, &dropped);
                ad::Tape tape;
                double value = 0.0;
                try {
                    const EmbeddedSentence embedded = embed_sentence(tape, slots, table, strategy);
                    const auto outputs = tag_forward(tape, model.tagger, embedded.embeddings);
                    const ad::Var loss = compute_loss(tape, outputs, gold[idx], config.model.task);
                    value = tape.scalar(loss);
                    tape.backward(loss);
                } catch (const NonFinite& e) {
                    throw DivergedLoss("epoch " + std::to_string(epoch) + ", batch starting at " +
                                       std::to_string(start) + ", sentence " + std::to_string(idx) + ": " + e.what());
                }
                loss_sum += value;
            }

            const double inv = 1.0 / static_cast<double>(stop - start);
            for (const auto& [name, t] : params)
                for (double& g : t->grad()) g *= inv;
            const double norm = clip_gradients(params, config.clip_norm);
            if (!std::isfinite(norm))
                throw DivergedLoss("epoch " + std::to_string(epoch) + ": non-finite gradient norm");
            if (config.clip_norm > 0.0 && norm > config.clip_norm) ++log.clipped_batches;
            adam_step(params, adam, adam_config);
        }
        log.train_loss = loss_sum / static_cast<double>(sentences.size());
        if (!std::isfinite(log.train_loss)) throw DivergedLoss("epoch " + std::to_string(epoch) + ": loss is not finite");

        if (dev && dev->token_count() > 0) {
            log.dev = evaluate(model, *dev, table, config.train_strategy, random);
            const double score = selection_score(*log.dev);
            if (!best_score || score > *best_score) {
                best_score = score;
                best = snapshot(params);
                result.best_epoch = epoch;
                log.best = true;
                stale = 0;
            } else {
                ++stale;
            }
        } else {
            result.best_epoch = epoch;
            log.best = true;
        }
        result.log.push_back(log);
        if (progress) progress(log);
        if (dev && stale >= config.patience && config.patience > 0) break;
    }
    if (!best.empty()) restore(params, best);
    for (const auto& [name, t] : params) t->zero_grad();
    return result;
}

}  // namespace ccoov
