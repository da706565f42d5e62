#include "popfrac/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "popfrac/error.hpp"
#include "popfrac/experiments.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/random.hpp"

namespace popfrac {

namespace {

LevelReport make_level(std::string level, std::vector<std::string> ids, std::vector<double> fractions,
                       std::vector<double> grades, ThresholdMode mode, int runs, std::uint64_t seed, int folds) {
    LevelReport out;
    out.level = std::move(level);
    out.evaluation = evaluate_level(fractions, grades, mode, runs, seed, folds);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.points.push_back({ids[i], fractions[i], grades[i], out.evaluation.truth[i], out.evaluation.predicted[i]});
    }
    return out;
}

nlohmann::json to_json(const LevelReport& level) {
    nlohmann::json j = to_json(level.evaluation);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : level.points) {
        points.push_back({{"id", p.id},
                          {"fraction", p.fraction},
                          {"human_score", p.human_score},
                          {"truth", to_string(p.truth)},
                          {"predicted", to_string(p.predicted)}});
    }
    j["points"] = points;
    return j;
}

std::string num(double v, int decimals = 2) { return format_number(v, decimals); }

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
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

// Markdown cells cannot contain raw pipes.
std::string md_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += ' ';
        else out += c;
    }
    return out;
}

std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) out += static_cast<char>(std::tolower(u));
        else if (!out.empty() && out.back() != '_') out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "unnamed" : out;
}

class Svg {
public:
    Svg(int width, int height) : width_(width), height_(height) {}

    void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none") {
        body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
              << num(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#333333",
              double width = 1) {
        body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
              << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
    }
    void circle(double cx, double cy, double r, std::string_view fill) {
        body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r) << "\" fill=\""
              << fill << "\" fill-opacity=\"0.75\"/>\n";
    }
    void polyline(std::span<const std::pair<double, double>> pts, std::string_view stroke) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ << ' ';
            body_ << num(pts[i].first) << ',' << num(pts[i].second);
        }
        body_ << "\"/>\n";
    }
    void text(double x, double y, std::string_view s, int size = 12, std::string_view anchor = "middle",
              std::string_view fill = "#000000", double rotate = 0) {
        body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
              << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill << "\"";
        if (rotate != 0) body_ << " transform=\"rotate(" << num(rotate) << ' ' << num(x) << ' ' << num(y) << ")\"";
        body_ << '>' << xml_escape(s) << "</text>\n";
    }

    std::string str() const {
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_
            << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\" font-family=\"sans-serif\">\n";
        out << "<rect x=\"0\" y=\"0\" width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"#ffffff\"/>\n";
        out << body_.str() << "</svg>\n";
        return out.str();
    }

private:
    int width_;
    int height_;
    std::ostringstream body_;
};

// White to dark blue.
std::string heat_colour(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(247 + (8 - 247) * t));
    const int g = static_cast<int>(std::lround(251 + (81 - 251) * t));
    const int b = static_cast<int>(std::lround(255 + (156 - 255) * t));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

// Plot frame with ticks; maps data to pixels.
struct Axes {
    double left, top, width, height;
    double x0, x1, y0, y1;
    bool log_x = false;

    double px(double x) const {
        double t = log_x ? (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0))
                         : (x - x0) / (x1 - x0);
        return left + t * width;
    }
    double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }

    void draw(Svg& svg, std::span<const double> xticks, std::span<const double> yticks, int xdecimals,
              int ydecimals, std::string_view xlabel, std::string_view ylabel) const {
        svg.rect(left, top, width, height, "none", "#333333");
        for (double t : xticks) {
            svg.line(px(t), top + height, px(t), top + height + 4);
            svg.text(px(t), top + height + 16, num(t, xdecimals), 10);
        }
        for (double t : yticks) {
            svg.line(left - 4, py(t), left, py(t));
            svg.line(left, py(t), left + width, py(t), "#dddddd", 0.5);
            svg.text(left - 6, py(t) + 3, num(t, ydecimals), 10, "end");
        }
        svg.text(left + width / 2, top + height + 32, xlabel, 11);
        svg.text(left - 34, top + height / 2, ylabel, 11, "middle", "#000000", -90);
    }
};

std::vector<double> ticks(double lo, double hi, int n) {
    std::vector<double> out;
    for (int i = 0; i <= n; ++i) out.push_back(lo + (hi - lo) * i / n);
    return out;
}

std::string cell(const nlohmann::json& v, int decimals = 2) {
    if (v.is_null()) return "NA";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number()) return num(v.get<double>(), decimals);
    if (v.is_string()) return md_escape(v.get<std::string>());
    if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
    return md_escape(v.dump());
}

void table_header(std::ostream& out, const std::vector<std::string>& columns) {
    out << '|';
    for (const auto& c : columns) out << ' ' << c << " |";
    out << "\n|";
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i == 0 ? " :--- |" : " ---: |");
    out << '\n';
}

void table_row(std::ostream& out, const std::vector<std::string>& cells) {
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
}

class ReportBuilder {
public:
    void add(const nlohmann::json& artifact) {
        try {
            const auto kind = artifact.at("kind").get<std::string>();
            if (kind == "evaluation") evaluation(artifact);
            else if (kind == "sparsity") sparsity(artifact);
            else if (kind == "cross_context") cross(artifact);
            else if (kind == "grid") grid(artifact);
            else if (kind == "metrics_table") metrics_table(artifact);
            else fail(ErrorKind::data, "unknown artifact kind '" + kind + "'");
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::data, std::string("malformed report artifact: ") + e.what());
        }
    }

    std::vector<RenderedFile> finish() {
        std::vector<RenderedFile> out;
        out.push_back({"report.md", "# Populism report\n" + md_.str()});
        for (auto& f : figures_) out.push_back(std::move(f));
        return out;
    }

private:
    std::string figure(std::string base, std::string content) {
        std::string name = base + ".svg";
        for (int k = 2; used_.count(name); ++k) name = base + "_" + std::to_string(k) + ".svg";
        used_.insert(name);
        figures_.push_back({name, std::move(content)});
        return name;
    }

    static ConfusionMatrix cm_of(const nlohmann::json& j) {
        return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("fn").get<std::size_t>(),
                j.at("tn").get<std::size_t>()};
    }

    void evaluation(const nlohmann::json& a) {
        const auto corpus = a.at("corpus").get<std::string>();
        md_ << "\n## Evaluation: " << md_escape(corpus) << "\n\n";
        md_ << "Threshold mode " << a.at("threshold_mode").get<std::string>() << ", "
            << a.at("stump_runs").get<int>() << " stump runs. " << a.at("n_populist_sentences").get<std::size_t>()
            << " of " << a.at("n_sentences").get<std::size_t>() << " sentences classified populist ("
            << num(a.at("populist_percentage").get<double>(), 1) << "%).\n\n";
        table_header(md_, {"Level", "N", "Accuracy", "Precision", "Recall", "F1", "F2", "AuROC", "MCC", "r²",
                           "Threshold"});
        for (const char* level : {"speeches", "speakers"}) {
            const auto& l = a.at(level);
            table_row(md_, {level, cell(l.at("n")), cell(l.at("accuracy")), cell(l.at("precision")),
                            cell(l.at("recall")), cell(l.at("f1")), cell(l.at("f2")), cell(l.at("auroc")),
                            cell(l.at("mcc")), cell(l.at("r_squared")), cell(l.at("stump").at("threshold"), 4)});
        }
        md_ << '\n';
        const std::string base = slug(corpus);
        for (const char* level : {"speeches", "speakers"}) {
            const auto& l = a.at(level);
            const std::string title = corpus + " " + level;
            const auto cm_file = figure("confusion_" + base + "_" + level, confusion_svg(title, cm_of(l)));
            std::vector<std::pair<double, double>> pts;
            for (const auto& p : l.at("points")) {
                pts.emplace_back(p.at("fraction").get<double>(), p.at("human_score").get<double>());
            }
            std::optional<double> r2;
            if (!l.at("r_squared").is_null()) r2 = l.at("r_squared").get<double>();
            const auto sc_file = figure("scatter_" + base + "_" + level, scatter_svg(title, pts, r2));
            md_ << "![Confusion matrix, " << level << "](" << cm_file << ")\n";
            md_ << "![Populist fraction vs human score, " << level << "](" << sc_file << ")\n";
        }
        std::vector<double> scores;
        for (const auto& p : a.at("speeches").at("points")) scores.push_back(p.at("human_score").get<double>());
        const auto h_file = figure("histogram_" + base, histogram_svg(corpus + " human scores", scores));
        md_ << "![Human score histogram](" << h_file << ")\n";
    }

    void sparsity(const nlohmann::json& a) {
        md_ << "\n## Sentences per category\n\n";
        table_header(md_, {"Sentences", "Accuracy", "Precision", "Recall", "F1", "MCC"});
        std::vector<CurvePoint> curve;
        for (const auto& r : a.at("rows")) {
            table_row(md_, {cell(r.at("count")), cell(r.at("accuracy")), cell(r.at("precision")),
                            cell(r.at("recall")), cell(r.at("f1")), cell(r.at("mcc"))});
            curve.push_back({r.at("count").get<int>(), r.at("accuracy").get<double>(), r.at("f1").get<double>(),
                             r.at("mcc").get<double>()});
        }
        md_ << "\n![Sparsity curves](" << figure("sparsity_curves", sparsity_svg(curve)) << ")\n";
    }

    void cross(const nlohmann::json& a) {
        md_ << "\n## Cross-context results\n\n";
        table_header(md_, {"Data", "N", "Accuracy", "Precision", "Recall", "F1", "F2", "AuROC", "MCC",
                           "Populist sentences"});
        for (const auto& r : a.at("rows")) {
            std::string data = r.at("train_corpus").get<std::string>() + " training; " +
                               r.at("test_corpus").get<std::string>();
            if (!r.at("speech_type").is_null()) data += " " + r.at("speech_type").get<std::string>();
            data += " testing";
            const auto& e = r.at("evaluation");
            table_row(md_, {md_escape(data), cell(r.at("n_speeches")), cell(e.at("accuracy")),
                            cell(e.at("precision")), cell(e.at("recall")), cell(e.at("f1")), cell(e.at("f2")),
                            cell(e.at("auroc")), cell(e.at("mcc")),
                            num(r.at("populist_percentage").get<double>(), 1) + "%"});
        }
    }

    void grid(const nlohmann::json& a) {
        md_ << "\n## Hyperparameter grid\n\n";
        const char* metrics[] = {"accuracy", "precision", "recall", "f1", "mcc"};
        table_header(md_, {"Model", "Runs", "Accuracy (std)", "Precision (std)", "Recall (std)", "F1 (std)",
                           "MCC (std)"});
        for (const auto& r : a.at("rows")) {
            std::vector<std::string> cells = {md_escape(r.at("label").get<std::string>()), cell(r.at("repetitions"))};
            for (auto m : metrics) {
                cells.push_back(num(r.at("mean").at(m).get<double>()) + " (" + num(r.at("std").at(m).get<double>()) +
                                ")");
            }
            table_row(md_, cells);
        }
    }

    void metrics_table(const nlohmann::json& a) {
        md_ << "\n## " << md_escape(a.at("title").get<std::string>()) << "\n\n";
        const auto columns = a.at("columns").get<std::vector<std::string>>();
        std::vector<std::string> header = {"Data"};
        header.insert(header.end(), columns.begin(), columns.end());
        table_header(md_, header);
        std::vector<std::string> notes;
        for (const auto& r : a.at("rows")) {
            std::vector<std::string> cells = {md_escape(r.at("label").get<std::string>())};
            const auto& values = r.at("values");
            for (const auto& c : columns) cells.push_back(values.contains(c) ? cell(values.at(c)) : "");
            if (r.contains("note")) {
                notes.push_back(r.at("label").get<std::string>() + ": " + r.at("note").get<std::string>());
                cells.front() += " *";
            }
            table_row(md_, cells);
            if (values.contains("tp")) {
                const auto name = figure("confusion_" + slug(r.at("label").get<std::string>()),
                                         confusion_svg(r.at("label").get<std::string>(), cm_of(values)));
                figure_refs_.push_back(name);
            }
        }
        if (!notes.empty()) {
            md_ << '\n';
            for (const auto& n : notes) md_ << "* " << md_escape(n) << '\n';
        }
        if (!figure_refs_.empty()) {
            md_ << '\n';
            for (const auto& f : figure_refs_) md_ << "![Confusion matrix](" << f << ")\n";
            figure_refs_.clear();
        }
    }

    std::ostringstream md_;
    std::vector<RenderedFile> figures_;
    std::set<std::string> used_;
    std::vector<std::string> figure_refs_;
};

}  // namespace

EvaluationReport evaluate_predictions(const PipelineResult& result, ThresholdMode mode, int runs,
                                      std::uint64_t seed, int folds) {
    require(!result.speeches.empty(), "predictions contain no speeches");
    EvaluationReport r;
    r.corpus_name = result.corpus_name;
    r.mode = mode;
    r.stump_runs = runs;
    r.seed = seed;

    std::vector<std::string> ids;
    std::vector<double> fractions, grades;
    for (const auto& s : result.speeches) {
        r.n_sentences += s.n_sentences;
        r.n_populist_sentences += s.count(Category::populist);
        ids.push_back(s.speech_id);
        fractions.push_back(s.populist_fraction);
        grades.push_back(s.human_score);
    }
    r.populist_percentage = r.n_sentences == 0 ? 0.0
                                               : 100.0 * static_cast<double>(r.n_populist_sentences) /
                                                     static_cast<double>(r.n_sentences);
    r.speeches = make_level("speeches", ids, fractions, grades, mode, runs, mix_seed(seed, 1), folds);

    ids.clear();
    fractions.clear();
    grades.clear();
    for (const auto& s : result.speakers) {
        ids.push_back(s.speaker_id);
        fractions.push_back(s.populist_fraction);
        grades.push_back(s.mean_human_score);
    }
    r.speakers = make_level("speakers", ids, fractions, grades, mode, runs, mix_seed(seed, 2), folds);
    return r;
}

nlohmann::json to_json(const EvaluationReport& r) {
    return {
        {"kind", "evaluation"},
        {"corpus", r.corpus_name},
        {"threshold_mode", to_string(r.mode)},
        {"stump_runs", r.stump_runs},
        {"seed", r.seed},
        {"n_sentences", r.n_sentences},
        {"n_populist_sentences", r.n_populist_sentences},
        {"populist_percentage", r.populist_percentage},
        {"speeches", to_json(r.speeches)},
        {"speakers", to_json(r.speakers)},
    };
}

std::string confusion_svg(const std::string& title, const ConfusionMatrix& cm) {
    Svg svg(340, 320);
    svg.text(170, 24, title, 14);
    const double left = 110, top = 60, size = 100;
    const std::size_t cells[2][2] = {{cm.tp, cm.fn}, {cm.fp, cm.tn}};  // [actual][predicted]
    const std::size_t peak = std::max({cm.tp, cm.fn, cm.fp, cm.tn, std::size_t{1}});
    const char* names[] = {"populist", "non-populist"};
    for (int a = 0; a < 2; ++a) {
        for (int p = 0; p < 2; ++p) {
            const double t = static_cast<double>(cells[a][p]) / static_cast<double>(peak);
            svg.rect(left + p * size, top + a * size, size, size, heat_colour(t), "#ffffff");
            svg.text(left + p * size + size / 2, top + a * size + size / 2 + 7, std::to_string(cells[a][p]), 20,
                     "middle", t > 0.5 ? "#ffffff" : "#000000");
        }
        svg.text(left + a * size + size / 2, top + 2 * size + 18, names[a], 11);
        svg.text(left - 8, top + a * size + size / 2 + 4, names[a], 11, "end");
    }
    svg.text(left + size, top + 2 * size + 38, "Predicted", 12);
    svg.text(24, top + size, "Actual", 12, "middle", "#000000", -90);
    return svg.str();
}

std::string scatter_svg(const std::string& title, std::span<const std::pair<double, double>> points,
                        std::optional<double> r_squared) {
    Svg svg(420, 360);
    svg.text(210, 22, title, 14);
    svg.text(210, 40, r_squared ? "r² = " + num(*r_squared) : std::string("r² undefined"), 12);
    double x_max = 0.0;
    for (const auto& p : points) x_max = std::max(x_max, p.first);
    x_max = x_max <= 0.5 ? 0.5 : 1.0;
    const Axes ax{60, 56, 330, 250, 0.0, x_max, 0.0, 2.0};
    ax.draw(svg, ticks(0, x_max, 5), ticks(0, 2, 4), 1, 1, "Populist sentence fraction", "Human score");
    svg.line(ax.left, ax.py(0.5), ax.left + ax.width, ax.py(0.5), "#d62728", 0.75);
    for (const auto& p : points) svg.circle(ax.px(p.first), ax.py(p.second), 3.5, "#1f77b4");
    return svg.str();
}

std::string histogram_svg(const std::string& title, std::span<const double> scores) {
    // Grades have one decimal on [0, 2]: one bar per tenth.
    std::array<int, 21> bins{};
    for (double s : scores) {
        const long t = std::lround(s * 10.0);
        require(t >= 0 && t <= 20, "histogram: score outside [0, 2]");
        ++bins[static_cast<std::size_t>(t)];
    }
    const int peak = std::max(1, *std::max_element(bins.begin(), bins.end()));
    const int y_max = static_cast<int>(std::ceil(peak / 5.0)) * 5;
    Svg svg(460, 340);
    svg.text(230, 24, title, 14);
    const Axes ax{60, 44, 370, 240, -0.05, 2.05, 0.0, static_cast<double>(y_max)};
    ax.draw(svg, ticks(0, 2, 4), ticks(0, y_max, 5), 1, 0, "Human score", "Speeches");
    const double w = ax.px(0.1) - ax.px(0.0);
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i] == 0) continue;
        const double x = ax.px(static_cast<double>(i) / 10.0) - w / 2;
        svg.rect(x + 1, ax.py(bins[i]), w - 2, ax.py(0) - ax.py(bins[i]), "#4c72b0");
    }
    return svg.str();
}

std::string sparsity_svg(std::span<const CurvePoint> curve) {
    std::vector<CurvePoint> sorted(curve.begin(), curve.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.count < b.count; });
    Svg svg(960, 320);
    svg.text(480, 22, "Performance by sentences per category", 14);
    const char* names[] = {"Accuracy", "F1", "MCC"};
    double lo = 1, hi = 10;
    if (!sorted.empty()) {
        lo = sorted.front().count;
        hi = sorted.back().count;
    }
    if (lo == hi) {
        lo /= 2;
        hi *= 2;
    }
    std::vector<double> xticks;
    for (const auto& p : sorted) xticks.push_back(p.count);
    if (xticks.size() > 6) {
        // keep the ends and a few evenly spaced interior labels
        std::vector<double> keep;
        for (std::size_t i = 0; i < xticks.size(); i += (xticks.size() + 4) / 5) keep.push_back(xticks[i]);
        if (keep.back() != xticks.back()) keep.push_back(xticks.back());
        xticks = keep;
    }
    for (int panel = 0; panel < 3; ++panel) {
        const double y_lo = panel == 2 ? -1.0 : 0.0;
        const Axes ax{60.0 + panel * 310.0, 50, 240, 220, lo, hi, y_lo, 1.0, true};
        ax.draw(svg, xticks, ticks(y_lo, 1, 4), 0, 2, "Sentences per category", names[panel]);
        svg.text(ax.left + ax.width / 2, 44, names[panel], 12);
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : sorted) {
            const double v = panel == 0 ? p.accuracy : panel == 1 ? p.f1 : p.mcc;
            pts.emplace_back(ax.px(p.count), ax.py(v));
        }
        svg.polyline(pts, "#1f77b4");
        for (const auto& [x, y] : pts) svg.circle(x, y, 3, "#1f77b4");
    }
    return svg.str();
}

std::vector<RenderedFile> render_report(std::span<const nlohmann::json> artifacts) {
    require(!artifacts.empty(), "report needs at least one artifact");
    ReportBuilder builder;
    for (const auto& a : artifacts) builder.add(a);
    return builder.finish();
}

void write_report(std::span<const nlohmann::json> artifacts, const std::filesystem::path& out_dir) {
    const auto files = render_report(artifacts);
    std::filesystem::create_directories(out_dir);
    for (const auto& f : files) {
        std::ofstream out(out_dir / f.name, std::ios::binary);
        if (!out) fail(ErrorKind::io, "cannot write '" + (out_dir / f.name).string() + "'");
        out << f.content;
    }
}

}  // namespace popfrac
