#include "tard/report.hpp"

#include "tard/checkpoint.hpp"
#include "tard/random.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

namespace tard {

namespace {

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, int line)
{
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError("csv line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep))
        out.push_back(cur);
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

std::string xml_escape(const std::string& s)
{
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

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

double mean_constraint_after(const EvalResult& eval)
{
    double total = 0;
    for (const auto& r : eval.records)
        total += r.constraint_after;
    return total / static_cast<double>(eval.records.size());
}

} // namespace

std::string config_fingerprint(const nlohmann::json& resolved_config)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(resolved_config.dump())));
    return buf;
}

nlohmann::json to_json(const MetricsReport& m)
{
    return {
        {"accuracy", m.accuracy},
        {"macro_f1", m.macro_f1},
        {"per_class_f1", m.per_class_f1},
        {"degenerate_classes", m.degenerate_classes},
        {"confusion", m.confusion.counts},
        {"count", m.confusion.total()},
        {"config_fingerprint", m.config_fingerprint},
        {"seed", m.seed},
    };
}

AblationResult run_ablation(std::span<const LabeledGraph> test_set, const TrainedModel& model,
                            const TrainConfig& config)
{
    AblationResult out;
    out.model = model;
    TrainConfig no_constraint = config;
    no_constraint.alpha2 = 0.0;
    TrainConfig no_ttt = config;
    no_ttt.ttt_steps = 0;
    for (const auto& [name, cfg] : {std::pair{kVariantFull, config}, std::pair{kVariantNoConstraint, no_constraint},
                                    std::pair{kVariantNoTtt, no_ttt}}) {
        VariantResult v;
        v.variant = name;
        v.config = cfg;
        v.eval = evaluate(test_set, model, cfg);
        v.mean_constraint_after = mean_constraint_after(v.eval);
        out.variants.push_back(std::move(v));
    }
    return out;
}

AblationResult run_ablation(std::span<const LabeledGraph> train_set, std::span<const LabeledGraph> test_set,
                            const TrainConfig& config)
{
    return run_ablation(test_set, train_phase(train_set, config), config);
}

std::string to_string(SweepTarget which)
{
    return which == SweepTarget::alpha1 ? "alpha1" : "alpha2";
}

SweepTarget sweep_target_from_string(const std::string& s)
{
    if (s == "alpha1")
        return SweepTarget::alpha1;
    if (s == "alpha2")
        return SweepTarget::alpha2;
    throw std::invalid_argument("unknown sweep target '" + s + "' (expected alpha1 or alpha2)");
}

std::vector<SweepRow> run_sensitivity(std::span<const LabeledGraph> train_set, std::span<const LabeledGraph> test_set,
                                      const TrainConfig& base_config, SweepTarget which)
{
    std::vector<SweepRow> rows;
    if (which == SweepTarget::alpha2) {
        const auto model = train_phase(train_set, base_config);
        for (double v : kSensitivityGrid) {
            TrainConfig cfg = base_config;
            cfg.alpha2 = v;
            rows.push_back({v, evaluate(test_set, model, cfg).metrics});
        }
    } else {
        for (double v : kSensitivityGrid) {
            TrainConfig cfg = base_config;
            cfg.alpha1 = v;
            const auto model = train_phase(train_set, cfg);
            rows.push_back({v, evaluate(test_set, model, cfg).metrics});
        }
    }
    return rows;
}

ReportRow make_row(const std::string& variant, const MetricsReport& m)
{
    return {variant, m.seed, m.accuracy, m.macro_f1, m.per_class_f1};
}

std::string to_csv(const ReportTable& t)
{
    std::size_t classes = 2;
    for (const auto& r : t.rows)
        classes = std::max(classes, r.per_class_f1.size());
    std::string out;
    if (!t.title.empty())
        out += "# title: " + t.title + "\n";
    out += "# config_fingerprint: " + t.fingerprint + "\n";
    if (t.x_label != "variant")
        out += "# x_label: " + t.x_label + "\n";
    for (const auto& n : t.notes)
        out += "# note: " + n + "\n";
    out += "variant,seed,accuracy,macro_f1";
    for (std::size_t k = 0; k < classes; ++k)
        out += ",f1_class" + std::to_string(k);
    out += "\n";
    for (const auto& r : t.rows) {
        if (r.variant.find_first_of(",\n") != std::string::npos)
            throw std::invalid_argument("report variant names cannot contain commas or newlines");
        out += r.variant + "," + std::to_string(r.seed) + "," + format_double(r.accuracy) + "," +
               format_double(r.macro_f1);
        for (std::size_t k = 0; k < classes; ++k)
            out += "," + format_double(k < r.per_class_f1.size() ? r.per_class_f1[k] : 0.0);
        out += "\n";
    }
    return out;
}

ReportTable table_from_csv(const std::string& text)
{
    ReportTable t;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    std::size_t columns = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty())
            continue;
        if (line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos)
                continue;
            const auto key = line.substr(2, colon - 2);
            const auto value = line.substr(colon + 2);
            if (key == "title") t.title = value;
            else if (key == "config_fingerprint") t.fingerprint = value;
            else if (key == "note") t.notes.push_back(value);
            else if (key == "x_label") t.x_label = value;
            continue;
        }
        const auto cells = split(line, ',');
        if (!header_seen) {
            if (cells.size() < 4 || cells[0] != "variant" || cells[1] != "seed" || cells[2] != "accuracy" ||
                cells[3] != "macro_f1")
                throw FormatError("csv line " + std::to_string(line_no) + ": unexpected header");
            columns = cells.size();
            header_seen = true;
            continue;
        }
        if (cells.size() != columns)
            throw FormatError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                              " cells, found " + std::to_string(cells.size()));
        ReportRow r;
        r.variant = cells[0];
        r.seed = std::stoull(cells[1]);
        r.accuracy = parse_double(cells[2], line_no);
        r.macro_f1 = parse_double(cells[3], line_no);
        for (std::size_t k = 4; k < cells.size(); ++k)
            r.per_class_f1.push_back(parse_double(cells[k], line_no));
        t.rows.push_back(std::move(r));
    }
    if (!header_seen)
        throw FormatError("csv: missing header");
    return t;
}

nlohmann::json to_json(const ReportTable& t)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"variant", r.variant},
                        {"seed", r.seed},
                        {"accuracy", r.accuracy},
                        {"macro_f1", r.macro_f1},
                        {"per_class_f1", r.per_class_f1}});
    return {{"title", t.title}, {"config_fingerprint", t.fingerprint}, {"notes", t.notes},
            {"x_label", t.x_label}, {"rows", rows}};
}

std::string to_svg(const ReportTable& t)
{
    // Mean per variant, in first-appearance order.
    std::vector<std::string> names;
    std::map<std::string, std::array<double, 3>> sums; // accuracy, macro_f1, count
    for (const auto& r : t.rows) {
        if (!sums.count(r.variant)) {
            names.push_back(r.variant);
            sums[r.variant] = {0, 0, 0};
        }
        auto& s = sums[r.variant];
        s[0] += r.accuracy;
        s[1] += r.macro_f1;
        s[2] += 1;
    }
    const double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 70;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    auto x_at = [&](std::size_t i) {
        return names.size() <= 1 ? left + plot_w / 2
                                 : left + plot_w * (static_cast<double>(i) / static_cast<double>(names.size() - 1));
    };
    auto y_at = [&](double v) { return top + plot_h * (1.0 - v); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<desc>config_fingerprint " << xml_escape(t.fingerprint) << "</desc>\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(t.title)
       << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
       << top + plot_h << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        os << "<text x=\"" << left - 8 << "\" y=\"" << y_at(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
           << fixed(v, 2) << "</text>\n";
    }
    for (std::size_t i = 0; i < names.size(); ++i)
        os << "<text x=\"" << x_at(i) << "\" y=\"" << top + plot_h + 18
           << "\" text-anchor=\"middle\" font-size=\"11\">" << xml_escape(names[i]) << "</text>\n";
    os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << xml_escape(t.x_label) << "</text>\n";
    os << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
       << top + plot_h / 2 << ")\">score</text>\n";

    const std::array<std::pair<const char*, const char*>, 2> series = {std::pair{"accuracy", "#1f77b4"},
                                                                      std::pair{"macro-F1", "#d62728"}};
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string points;
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto& v = sums[names[i]];
            points += fixed(x_at(i), 2) + "," + fixed(y_at(v[s] / v[2]), 2) + " ";
        }
        os << "<polyline fill=\"none\" stroke=\"" << series[s].second << "\" stroke-width=\"2\" points=\"" << points
           << "\"/>\n";
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto& v = sums[names[i]];
            os << "<circle cx=\"" << fixed(x_at(i), 2) << "\" cy=\"" << fixed(y_at(v[s] / v[2]), 2)
               << "\" r=\"3\" fill=\"" << series[s].second << "\"/>\n";
        }
        os << "<text x=\"" << left + 10 + 110 * static_cast<double>(s) << "\" y=\"" << top - 6 << "\" font-size=\"11\" fill=\""
           << series[s].second << "\">" << series[s].first << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(const ReportTable& table, const std::filesystem::path& path, ReportFormat format)
{
    if (table.rows.empty())
        throw std::invalid_argument("emit_report: no rows");
    switch (format) {
    case ReportFormat::csv: write_text_file(path, to_csv(table)); break;
    case ReportFormat::json: write_text_file(path, to_json(table).dump(2) + "\n"); break;
    case ReportFormat::svg: write_text_file(path, to_svg(table)); break;
    }
}

} // namespace tard
