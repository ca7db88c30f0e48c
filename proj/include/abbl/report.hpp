#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "abbl/io.hpp"

namespace abbl {

struct PosteriorSummary {
    std::string parameter;
    double mode = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q95 = 0.0;
};

inline PosteriorSummary summarize(const Posterior& p)
{
    return {p.parameter.name, p.mode(), p.mean(), std::sqrt(p.variance()), p.quantile(0.05), p.quantile(0.95)};
}

// Plain-text table with left-aligned columns.
class Table {
  public:
    explicit Table(std::vector<std::string> header) : rows_{std::move(header)} {}

    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string str() const
    {
        std::vector<std::size_t> width;
        for (const auto& row : rows_)
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (width.size() <= c)
                    width.push_back(0);
                width[c] = std::max(width[c], row[c].size());
            }
        std::string out;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            std::string line;
            for (std::size_t c = 0; c < rows_[r].size(); ++c) {
                line += rows_[r][c];
                if (c + 1 < rows_[r].size())
                    line += std::string(width[c] - rows_[r][c].size() + 2, ' ');
            }
            out += line + "\n";
            if (r == 0) {
                std::size_t total = 0;
                for (std::size_t c = 0; c < width.size(); ++c)
                    total += width[c] + (c + 1 < width.size() ? 2 : 0);
                out += std::string(total, '-') + "\n";
            }
        }
        return out;
    }

  private:
    std::vector<std::vector<std::string>> rows_;
};

inline std::string fixed(double x, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

inline std::string posterior_table(const std::vector<Posterior>& posts)
{
    Table t({"parameter", "mode", "mean", "sd", "5%", "95%"});
    for (const auto& p : posts) {
        const auto s = summarize(p);
        t.add({s.parameter, fixed(s.mode), fixed(s.mean), fixed(s.sd), fixed(s.q05), fixed(s.q95)});
    }
    return t.str();
}

inline std::string posterior_plot_csv(const Posterior& p)
{
    std::string out = "center,mass\n";
    for (std::size_t b = 0; b < p.size(); ++b)
        out += format_number(p.center(b)) + "," + format_number(p.bins[b]) + "\n";
    return out;
}

inline std::string score_tables(const ScoreReport& r)
{
    std::string out = "model score " + fixed(r.model_score) + " (" + std::to_string(r.n_runs) + " runs";
    if (!r.scenario.empty())
        out += ", scenario " + r.scenario;
    out += ")\n";
    Table entities({"entity", "score"});
    for (const auto& [e, s] : r.per_entity)
        entities.add({e, fixed(s)});
    out += entities.str();
    Table attrs({"attribute", "score"});
    for (const auto& [a, s] : r.per_attribute)
        attrs.add({a, fixed(s)});
    out += attrs.str();
    if (!r.undefined_entities.empty()) {
        out += "no comparable data:";
        for (const auto& e : r.undefined_entities)
            out += " " + e;
        out += "\n";
    }
    if (r.off_grid || r.out_of_horizon)
        out += "skipped observations: " + std::to_string(r.off_grid) + " off-grid, " +
               std::to_string(r.out_of_horizon) + " beyond the horizon\n";
    return out;
}

struct ReportOutput {
    std::string text;
    std::vector<std::pair<std::string, std::string>> plots; // file name, CSV body
};

/*!
 * Human-readable summary of result files. Posterior files (anything with a
 * "bins" array) get summary statistics; other files are dispatched on their
 * "kind" field. With plots enabled each posterior also yields a CSV of bin
 * centers and masses.
 */
inline ReportOutput report(const std::vector<std::filesystem::path>& files, bool plots = false)
{
    if (files.empty())
        fail(ErrorCode::MissingResult, "no result files to report on");
    ReportOutput out;
    auto add_posteriors = [&](const std::string& stem, const std::vector<Posterior>& posts) {
        out.text += posterior_table(posts);
        if (plots)
            for (const auto& p : posts)
                out.plots.emplace_back(stem + "." + p.parameter.name + ".csv", posterior_plot_csv(p));
    };
    for (const auto& path : files) {
        if (!std::filesystem::exists(path))
            fail(ErrorCode::MissingResult, "no result file '" + path.string() + "'");
        const auto j = io::read_json_file(path.string());
        const std::string stem = path.stem().string();
        out.text += "== " + path.filename().string() + "\n";
        if (j.is_object() && j.contains("bins")) {
            add_posteriors(stem, {io::posterior_from_json(j)});
        } else if (!j.is_object() || !j.contains("kind")) {
            out.text += "(unrecognized result file)\n";
        } else if (const auto kind = j["kind"].get<std::string>(); kind == "score") {
            out.text += score_tables(io::score_report_from_json(j));
        } else if (kind == "fit") {
            std::vector<Posterior> overall;
            for (const auto& p : j.at("overall"))
                overall.push_back(io::posterior_from_json(p));
            out.text += "overall posterior over " + std::to_string(j.at("per_model").size()) + " model(s)\n";
            add_posteriors(stem, overall);
            Table t({"model", "parameter", "mode", "zero evidence"});
            for (const auto& m : j.at("per_model"))
                for (const auto& p : m.at("posteriors")) {
                    const auto post = io::posterior_from_json(p);
                    t.add({m.at("scenario").get<std::string>(), post.parameter.name, fixed(post.mode()),
                           m.at("zero_evidence").get<bool>() ? "yes" : "no"});
                }
            out.text += t.str();
        } else if (kind == "improvement") {
            out.text += "rule " + j.at("rule").get<std::string>() + "\n";
            out.text += "delta " + fixed(j.at("delta").get<double>(), 6) + "\n";
            Table t({"model", "without", "with", "delta"});
            const auto& models = j.at("models");
            for (const auto& m : models) {
                const double w = m.at("with_rule").get<double>();
                const double wo = m.at("without_rule").get<double>();
                t.add({m.at("scenario").get<std::string>(), fixed(wo), fixed(w), fixed(w - wo, 6)});
            }
            out.text += t.str();
            if (j.contains("fitted"))
                for (const auto& [name, v] : j["fitted"].items())
                    out.text += "fitted " + name + " = " + fixed(v.get<double>()) + "\n";
        } else if (kind == "worldview_score") {
            out.text += "worldview " + j.at("worldview").get<std::string>() + " score " +
                        fixed(j.at("score").get<double>()) + "\n";
            Table t({"scenario", "score"});
            for (const auto& r : j.at("reports"))
                t.add({r.at("scenario").get<std::string>(), fixed(r.at("model_score").get<double>())});
            out.text += t.str();
        } else if (kind == "prediction") {
            Table t({"slot", "attribute", "step", "5%", "50%", "95%"});
            for (const auto& o : j.at("outcomes"))
                if (o.contains("quantiles")) {
                    const auto& q = o["quantiles"];
                    t.add({o.at("slot").get<std::string>(), o.at("attribute").get<std::string>(),
                           std::to_string(o.at("step").get<std::size_t>()), fixed(q.at("q05").get<double>()),
                           fixed(q.at("q50").get<double>()), fixed(q.at("q95").get<double>())});
                }
            out.text += std::to_string(j.at("n_runs").get<std::size_t>()) + " runs\n" + t.str();
        } else {
            out.text += "(no summary for kind '" + kind + "')\n";
        }
        out.text += "\n";
    }
    return out;
}

} // namespace abbl
