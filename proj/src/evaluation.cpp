#include "salient/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "salient/error.hpp"

namespace salient {

using nlohmann::json;
using nlohmann::ordered_json;

const ImageResult* EvaluationReport::find(const std::string& id) const {
    for (const auto& r : images)
        if (r.id == id)
            return &r;
    return nullptr;
}

ModelScore EvaluationReport::score() const {
    ModelScore s{accuracy, false_positives, false_negatives, 0, total};
    for (const auto& r : images)
        if (r.role == Role::test && r.scored && r.true_class == ImageClass::positive)
            ++s.positives;
    return s;
}

EvaluationReport build_report(std::string model_id, std::vector<ImageResult> images) {
    EvaluationReport report;
    report.model_id = std::move(model_id);
    report.images = std::move(images);
    for (const auto& r : report.images) {
        if (r.role != Role::test || !r.scored)
            continue;
        ++report.total;
        const bool positive = r.true_class == ImageClass::positive;
        if (positive && r.predicted == Verdict::comparative)
            ++report.false_negatives;
        else if (!positive && r.predicted == Verdict::positive)
            ++report.false_positives;
        else
            ++report.correct;
    }
    if (report.total == 0)
        throw data_error("evaluation needs at least one scored test image");
    report.accuracy = static_cast<double>(report.correct) / report.total;
    return report;
}

EvaluationReport evaluate(const TrainedModel& model, const Manifest& manifest,
                          const std::vector<ManifestEntry>& test_entries, const TileSpec& spec,
                          const std::vector<ManifestEntry>& externals) {
    if (test_entries.empty())
        throw data_error("evaluation test set is empty");
    std::vector<ImageResult> results;
    auto score_entry = [&](const ManifestEntry& e, Role role) {
        ImageResult r{e.id, e.image_class, role, e.quality_flag, false, 0.0, Verdict::comparative, {}};
        try {
            CanvasImage img = read_image(manifest.resolve(e));
            img.set_source_id(e.id);
            img.set_density(img.width() / e.canvas_width_cm);
            r.overall_prob = image_probability(model, img, spec);
            r.predicted = classify_image(r.overall_prob);
            r.scored = true;
            if (e.quality_flag == QualityFlag::degraded)
                r.note = "degraded source image; score not otherwise meaningful";
        } catch (const Error& ex) {
            r.note = std::string("excluded: ") + ex.what();
        }
        results.push_back(std::move(r));
    };
    for (const auto& e : test_entries)
        score_entry(e, Role::test);
    for (const auto& e : externals)
        score_entry(e, Role::external);
    return build_report(model.id(), std::move(results));
}

// ---------------------------------------------------------------------------

void write_report(const EvaluationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot write report '" + path.string() + "'");
    for (const auto& r : report.images) {
        ordered_json j{{"record", "image"},
                       {"id", r.id},
                       {"class", to_string(r.true_class)},
                       {"role", to_string(r.role)},
                       {"quality_flag", to_string(r.quality)},
                       {"scored", r.scored},
                       {"overall_prob", r.overall_prob},
                       {"predicted", r.predicted == Verdict::positive ? "positive" : "comparative"},
                       {"note", r.note}};
        out << j.dump() << '\n';
    }
    ordered_json summary{{"record", "summary"},
                         {"model", report.model_id},
                         {"total", report.total},
                         {"correct", report.correct},
                         {"accuracy", report.accuracy},
                         {"false_negatives", report.false_negatives},
                         {"false_positives", report.false_positives}};
    out << summary.dump() << '\n';
}

EvaluationReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("report not found: '" + path.string() + "'");
    EvaluationReport report;
    bool have_summary = false;
    std::string line;
    int row = 0;
    try {
        while (std::getline(in, line)) {
            ++row;
            if (line.empty())
                continue;
            const json j = json::parse(line);
            const auto kind = j.at("record").get<std::string>();
            if (kind == "image") {
                ImageResult r;
                r.id = j.at("id").get<std::string>();
                r.true_class = image_class_from_string(j.at("class").get<std::string>());
                r.role = role_from_string(j.at("role").get<std::string>());
                r.quality = quality_flag_from_string(j.at("quality_flag").get<std::string>());
                r.scored = j.at("scored").get<bool>();
                r.overall_prob = j.at("overall_prob").get<double>();
                r.predicted = j.at("predicted").get<std::string>() == "positive"
                                  ? Verdict::positive
                                  : Verdict::comparative;
                r.note = j.at("note").get<std::string>();
                report.images.push_back(std::move(r));
            } else if (kind == "summary") {
                report.model_id = j.at("model").get<std::string>();
                report.total = j.at("total").get<int>();
                report.correct = j.at("correct").get<int>();
                report.accuracy = j.at("accuracy").get<double>();
                report.false_negatives = j.at("false_negatives").get<int>();
                report.false_positives = j.at("false_positives").get<int>();
                have_summary = true;
            }
        }
    } catch (const json::exception& ex) {
        throw data_error(path.string() + ":" + std::to_string(row) + ": " + ex.what());
    }
    if (!have_summary)
        throw data_error("report '" + path.string() + "' has no summary record");
    return report;
}

std::string format_model_table(const std::vector<EvaluationReport>& reports,
                               const std::string& target_id) {
    std::ostringstream os;
    os << std::left << std::setw(32) << "model" << std::right << std::setw(10) << "accuracy"
       << std::setw(8) << "FN" << std::setw(8) << "FP";
    if (!target_id.empty())
        os << "  " << target_id;
    os << '\n';
    for (const auto& r : reports) {
        os << std::left << std::setw(32) << r.model_id << std::right << std::fixed
           << std::setprecision(2) << std::setw(10) << r.accuracy << std::setw(8)
           << r.false_negatives << std::setw(8) << r.false_positives;
        if (!target_id.empty()) {
            const ImageResult* t = r.find(target_id);
            os << "  ";
            if (t && t->scored)
                os << t->overall_prob;
            else
                os << "n/a";
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

RegressionResult linear_fit(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2)
        throw data_error("linear fit needs at least two points");
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0)
        throw data_error("linear fit is degenerate: all x values are equal");
    RegressionResult r;
    r.n_points = static_cast<int>(points.size());
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.r_squared = syy == 0.0 ? 0.0 : std::min(1.0, (sxy * sxy) / (sxx * syy));
    return r;
}

std::vector<std::pair<double, double>> read_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("points file not found: '" + path.string() + "'");
    std::vector<std::pair<double, double>> points;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        for (char& c : line)
            if (c == ',' || c == '\t')
                c = ' ';
        std::istringstream fields(line);
        double x = 0.0, y = 0.0;
        if (!(fields >> x)) {
            if (line.find_first_not_of(' ') == std::string::npos)
                continue;
            throw data_error(path.string() + ":" + std::to_string(row) + ": expected 'x y'");
        }
        std::string extra;
        if (!(fields >> y) || (fields >> extra))
            throw data_error(path.string() + ":" + std::to_string(row) + ": expected 'x y'");
        points.emplace_back(x, y);
    }
    return points;
}

void write_points(const std::vector<std::pair<double, double>>& points,
                  const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot write points '" + path.string() + "'");
    out.precision(17);
    out << "# x y\n";
    for (const auto& [x, y] : points)
        out << x << ' ' << y << '\n';
}

// ---------------------------------------------------------------------------

std::vector<std::string> OrderingReport::violations() const {
    std::vector<std::string> out;
    for (const auto& p : pairs)
        if (p.discordant > 0)
            out.push_back(p.first + " / " + p.second + ": " + std::to_string(p.discordant) +
                          " discordant model pair(s)");
    return out;
}

OrderingReport corroborate(std::vector<std::string> model_ids, std::vector<std::string> image_ids,
                           const Eigen::MatrixXd& probabilities) {
    if (probabilities.rows() != static_cast<Eigen::Index>(model_ids.size()) ||
        probabilities.cols() != static_cast<Eigen::Index>(image_ids.size()))
        throw data_error("probability matrix must be models x images");
    if (model_ids.size() < 2 || image_ids.size() < 2)
        throw data_error("corroboration needs at least two models and two images");
    OrderingReport report{std::move(model_ids), std::move(image_ids), probabilities, {}, 0, 0, 0};
    const Eigen::Index m = probabilities.rows(), k = probabilities.cols();
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = a + 1; b < k; ++b) {
            PairOrdering pair{report.image_ids[a], report.image_ids[b], 0, 0, 0};
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = i + 1; j < m; ++j) {
                    const double s = (probabilities(j, a) - probabilities(i, a)) *
                                     (probabilities(j, b) - probabilities(i, b));
                    if (s > 0.0)
                        ++pair.concordant;
                    else if (s < 0.0)
                        ++pair.discordant;
                    else
                        ++pair.ties;
                }
            report.concordant += pair.concordant;
            report.discordant += pair.discordant;
            report.ties += pair.ties;
            report.pairs.push_back(std::move(pair));
        }
    return report;
}

OrderingReport corroborate(const std::vector<TrainedModel>& models, const Manifest& manifest,
                           const std::vector<ManifestEntry>& external_entries,
                           const TileSpec& spec) {
    std::vector<std::string> model_ids, image_ids;
    for (const auto& m : models)
        model_ids.push_back(m.id());
    std::vector<CanvasImage> images;
    for (const auto& e : external_entries) {
        CanvasImage img = read_image(manifest.resolve(e));
        img.set_source_id(e.id);
        img.set_density(img.width() / e.canvas_width_cm);
        images.push_back(std::move(img));
        image_ids.push_back(e.id);
    }
    Eigen::MatrixXd probs(static_cast<Eigen::Index>(models.size()),
                          static_cast<Eigen::Index>(images.size()));
    for (std::size_t i = 0; i < models.size(); ++i)
        for (std::size_t j = 0; j < images.size(); ++j)
            probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                image_probability(models[i], images[j], spec);
    return corroborate(std::move(model_ids), std::move(image_ids), probs);
}

std::string format_ordering(const OrderingReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "probabilities (rows = models)\n";
    for (std::size_t i = 0; i < report.model_ids.size(); ++i) {
        os << "  " << report.model_ids[i];
        for (Eigen::Index j = 0; j < report.probabilities.cols(); ++j)
            os << ' ' << report.probabilities(static_cast<Eigen::Index>(i), j);
        os << '\n';
    }
    os << "pairs\n";
    for (const auto& p : report.pairs)
        os << "  " << p.first << " / " << p.second << ": concordant " << p.concordant
           << ", discordant " << p.discordant << ", ties " << p.ties << '\n';
    os << "total: concordant " << report.concordant << ", discordant " << report.discordant
       << ", ties " << report.ties << '\n';
    for (const auto& v : report.violations())
        os << "violation: " << v << '\n';
    return os.str();
}

}  // namespace salient
