#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "salient/dataset.hpp"
#include "salient/inference_maps.hpp"
#include "salient/trainer.hpp"

namespace salient {

struct ImageResult {
    std::string id;
    ImageClass true_class = ImageClass::comparative;
    Role role = Role::test;
    QualityFlag quality = QualityFlag::ok;
    bool scored = false;         // false when the image could not be analysed
    double overall_prob = 0.0;   // meaningful only when scored
    Verdict predicted = Verdict::comparative;
    std::string note;            // failure reason or quality annotation

    bool operator==(const ImageResult&) const = default;
};

/// Image-level metrics over the scored test-role images. External images
/// are carried along for reference but never counted.
struct EvaluationReport {
    std::string model_id;
    std::vector<ImageResult> images;
    int total = 0;
    int correct = 0;
    int false_positives = 0;
    int false_negatives = 0;
    double accuracy = 0.0;

    const ImageResult* find(const std::string& id) const;
    ModelScore score() const;

    bool operator==(const EvaluationReport&) const = default;
};

/// Fills the counts from `images`. Throws if no test image was scored.
EvaluationReport build_report(std::string model_id, std::vector<ImageResult> images);

/// Scores every test entry (and any external entries) with the model's
/// tiling. Unreadable images are reported with a note and excluded.
EvaluationReport evaluate(const TrainedModel& model, const Manifest& manifest,
                          const std::vector<ManifestEntry>& test_entries, const TileSpec& spec,
                          const std::vector<ManifestEntry>& externals = {});

// One JSON object per line: image records, then a summary record.
void write_report(const EvaluationReport& report, const std::filesystem::path& path);
EvaluationReport read_report(const std::filesystem::path& path);

/// Per-model listing: model, accuracy, FN, FP and an optional image's
/// overall probability.
std::string format_model_table(const std::vector<EvaluationReport>& reports,
                               const std::string& target_id = "");

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
};

/// Ordinary least squares y = slope * x + intercept, R^2 = Sxy^2 / (Sxx Syy).
/// A constant y yields R^2 = 0.
RegressionResult linear_fit(const std::vector<std::pair<double, double>>& points);

/// Whitespace or comma separated "x y" pairs, '#' comments allowed.
std::vector<std::pair<double, double>> read_points(const std::filesystem::path& path);
void write_points(const std::vector<std::pair<double, double>>& points,
                  const std::filesystem::path& path);

struct PairOrdering {
    std::string first;
    std::string second;
    int concordant = 0;
    int discordant = 0;
    int ties = 0;
};

/// For every image pair, counts model pairs whose probability changes for
/// the two images share a sign (concordant) or not (discordant).
struct OrderingReport {
    std::vector<std::string> model_ids;
    std::vector<std::string> image_ids;
    Eigen::MatrixXd probabilities;  // rows = models, cols = images
    std::vector<PairOrdering> pairs;
    int concordant = 0;
    int discordant = 0;
    int ties = 0;

    std::vector<std::string> violations() const;
};

OrderingReport corroborate(std::vector<std::string> model_ids, std::vector<std::string> image_ids,
                           const Eigen::MatrixXd& probabilities);

OrderingReport corroborate(const std::vector<TrainedModel>& models, const Manifest& manifest,
                           const std::vector<ManifestEntry>& external_entries,
                           const TileSpec& spec);

std::string format_ordering(const OrderingReport& report);

}  // namespace salient
