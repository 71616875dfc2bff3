#include "ccoov/attention_export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ccoov {

namespace {

std::string html_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void span_cell(std::ostringstream& out, const std::string& text, double weight, bool bold) {
    out << "<span title=\"" << std::fixed << std::setprecision(4) << weight << "\" style=\"background:rgba(220,30,30,"
        << std::setprecision(3) << std::clamp(weight, 0.0, 1.0) << ");padding:1px 2px;"
        << (bold ? "font-weight:bold;" : "") << "\">" << html_escape(text) << "</span>";
}

}  // namespace

std::vector<double> temperature_softmax(std::span<const double> scores, double temperature) {
    if (!(temperature > 0.0)) throw Error("temperature must be positive");
    if (scores.empty()) return {};
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - mx) / temperature);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

std::vector<AttentionRecord> collect_attention(Model& model, const Corpus& corpus, const EmbeddingTable& table,
                                               const RandomEmbeddings& random, const WordSet& targets,
                                               double temperature) {
    if (!(temperature > 0.0)) throw Error("temperature must be positive");
    std::vector<AttentionRecord> records;
    for (const auto& sentence : corpus.sentences) {
        if (sentence.tokens.empty()) continue;
        const SentencePrediction pred =
            predict_sentence(model, sentence, table, OovKind::predictor, random, targets.empty() ? nullptr : &targets);
        std::vector<std::string> forms;
        for (const auto& t : sentence.tokens) forms.push_back(t.form);
        for (const auto& a : pred.attention) {
            AttentionRecord r;
            r.forms = forms;
            r.oov_index = a.position;
            r.chars = utf8_chars(forms[a.position]);
            for (std::size_t i = a.window.begin; i < a.window.end; ++i)
                if (i != a.window.target) r.context_positions.push_back(i);
            r.char_alphas = a.char_alphas;
            r.context_alphas = a.context_alphas;
            r.temperature = temperature;
            if (temperature == 1.0) {
                r.display_char_alphas = a.char_alphas;
                r.display_context_alphas = a.context_alphas;
            } else {
                r.display_char_alphas = temperature_softmax(a.char_scores, temperature);
                r.display_context_alphas = temperature_softmax(a.context_scores, temperature);
            }
            const auto pos = pred.tokens[a.position].pos;
            r.predicted_tag = pos == kUnknownId ? "_" : model.schema.tags()[static_cast<std::size_t>(pos)];
            r.gold_tag = sentence.tokens[a.position].upos;
            records.push_back(std::move(r));
        }
    }
    return records;
}

nlohmann::json attention_to_json(std::span<const AttentionRecord> records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        arr.push_back({{"forms", r.forms},
                       {"oov_index", r.oov_index},
                       {"chars", r.chars},
                       {"context_positions", r.context_positions},
                       {"char_alphas", r.char_alphas},
                       {"context_alphas", r.context_alphas},
                       {"display_char_alphas", r.display_char_alphas},
                       {"display_context_alphas", r.display_context_alphas},
                       {"predicted_tag", r.predicted_tag},
                       {"gold_tag", r.gold_tag},
                       {"temperature", r.temperature}});
    }
    return arr;
}

std::string attention_html(std::span<const AttentionRecord> records) {
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>OOV attention</title></head>\n"
        << "<body style=\"font-family:sans-serif;line-height:2\">\n";
    for (const auto& r : records) {
        out << "<p>";
        for (std::size_t i = 0; i < r.forms.size(); ++i) {
            if (i) out << ' ';
            if (i == r.oov_index) {
                out << "<b>[";
                for (std::size_t c = 0; c < r.chars.size(); ++c)
                    span_cell(out, r.chars[c], c < r.display_char_alphas.size() ? r.display_char_alphas[c] : 0.0, true);
                out << "]</b>";
                continue;
            }
            const auto it = std::find(r.context_positions.begin(), r.context_positions.end(), i);
            const double w = it == r.context_positions.end()
                                 ? 0.0
                                 : r.display_context_alphas[static_cast<std::size_t>(it - r.context_positions.begin())];
            span_cell(out, r.forms[i], w, false);
        }
        out << " <small>(predicted " << html_escape(r.predicted_tag) << ", gold " << html_escape(r.gold_tag)
            << ", T=" << r.temperature << ")</small></p>\n";
    }
    out << "</body></html>\n";
    return out.str();
}

ExportPaths export_attention(Model& model, const Corpus& corpus, const EmbeddingTable& table,
                             const RandomEmbeddings& random, const WordSet& targets,
                             const std::filesystem::path& prefix, double temperature) {
    const auto records = collect_attention(model, corpus, table, random, targets, temperature);
    if (records.empty()) throw NoOovTargets("no OOV or designated target words in the input");
    ExportPaths paths{prefix.string() + ".json", prefix.string() + ".html"};
    std::ofstream json(paths.json);
    std::ofstream html(paths.html);
    if (!json || !html) throw IoError("cannot write attention export to " + prefix.string());
    json << attention_to_json(records).dump(2) << '\n';
    html << attention_html(records);
    if (!json || !html) throw IoError("write failed for " + prefix.string());
    return paths;
}

}  // namespace ccoov
