#include <gtest/gtest.h>

#include "salient/error.hpp"
#include "salient/inference_maps.hpp"
#include "test_util.hpp"

using namespace salient;
using salient::testing::constant_image;
using salient::testing::half_busy_image;
using salient::testing::noise_image;
using salient::testing::scratch_dir;

namespace {

TrainedModel random_model(std::uint64_t seed) {
    TrainedModel m;
    m.spec = cnn::ArchitectureSpec::five_layer(80);
    m.params = cnn::init_parameters<float>(m.spec, seed);
    m.hyper.seed = seed;
    m.provenance.tiles = TileConfig{25.0, 100, 0.5, 0.5};
    return m;
}

TrainedModel neutral_model() {
    auto m = random_model(1);
    m.params[m.params.size() - 2].values.setZero();
    m.params[m.params.size() - 1].values.setZero();
    return m;
}

// Independent oracle: per-pixel average over covering tiles, brute force.
ProbGrid brute_force_map(int w, int h, const std::vector<Tile>& tiles,
                         const std::vector<double>& probs) {
    ProbGrid out = ProbGrid::Zero(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sum = 0;
            int n = 0;
            for (std::size_t i = 0; i < tiles.size(); ++i) {
                const auto& t = tiles[i];
                if (x >= t.x && x < t.x + t.side && y >= t.y && y < t.y + t.side) {
                    sum += probs[i];
                    ++n;
                }
            }
            out(y, x) = n ? sum / n : 0.0;
        }
    return out;
}

}  // namespace

TEST(Scoring, NeutralModelGivesOneHalfEverywhere) {
    const auto model = neutral_model();
    const auto img = constant_image(300, 200, 90);
    const TileSpec spec(100, 0.5);
    EXPECT_DOUBLE_EQ(image_probability(model, img, spec), 0.5);
    const auto map = probability_map(model, img, spec);
    for (Eigen::Index i = 0; i < map.mean_prob.size(); ++i)
        if (map.coverage(i) > 0)
            EXPECT_DOUBLE_EQ(map.mean_prob(i), 0.5);
    // a constant image keeps every grid tile: 5 x 3 at stride 50
    EXPECT_EQ(score_salient_tiles(model, img, spec).tiles.size(), 15u);
}

TEST(Scoring, OverallIsMeanOfTileProbabilities) {
    EXPECT_DOUBLE_EQ(mean_probability({0.8, 0.2}), 0.5);
    EXPECT_DOUBLE_EQ(mean_probability({0.9}), 0.9);
    EXPECT_THROW(mean_probability({}), Error);
    EXPECT_DOUBLE_EQ(fraction_positive({0.8, 0.5, 0.2, 0.51}), 0.5);

    const auto model = random_model(2);
    const auto img = half_busy_image(260, 180, 3, 3);
    const TileSpec spec(100, 0.6);
    const auto scored = score_salient_tiles(model, img, spec);
    ASSERT_FALSE(scored.tiles.empty());
    double sum = 0;
    for (double p : scored.probabilities) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        sum += p;
    }
    EXPECT_NEAR(image_probability(model, img, spec), sum / scored.probabilities.size(), 1e-12);
}

TEST(Scoring, UnanalyzableImageIsReported) {
    // no tile fits inside the image
    EXPECT_THROW(score_salient_tiles(random_model(1), noise_image(50, 50, 1), TileSpec(100, 0.5)),
                 Error);
}

TEST(Map, HalfOverlapTwoTiles) {
    const std::vector<Tile> tiles{{0, 0, 2, 0, "a", TileLabel::unlabeled},
                                  {1, 0, 2, 0, "a", TileLabel::unlabeled}};
    const auto map = accumulate_map(3, 3, tiles, {0.2, 0.6});
    EXPECT_DOUBLE_EQ(map.mean_prob(0, 0), 0.2);
    EXPECT_DOUBLE_EQ(map.mean_prob(0, 1), 0.4);
    EXPECT_DOUBLE_EQ(map.mean_prob(1, 2), 0.6);
    EXPECT_EQ(map.coverage(1, 1), 2);
    EXPECT_EQ(map.coverage(2, 0), 0);
    EXPECT_NEAR(map.weighted_mean(), 0.4, 1e-12);
    EXPECT_THROW(accumulate_map(3, 3, tiles, {0.2}), Error);
}

TEST(Map, MatchesBruteForceOracle) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pos(0, 30), side(3, 12);
    std::uniform_real_distribution<double> prob(0, 1);
    std::vector<Tile> tiles;
    std::vector<double> probs;
    for (int i = 0; i < 25; ++i) {
        const int s = side(rng);
        tiles.push_back({std::min(pos(rng), 40 - s), std::min(pos(rng), 35 - s), s, 0, "x",
                         TileLabel::unlabeled});
        probs.push_back(prob(rng));
    }
    const auto map = accumulate_map(40, 35, tiles, probs);
    const auto want = brute_force_map(40, 35, tiles, probs);
    EXPECT_LT((map.mean_prob - want).abs().maxCoeff(), 1e-12);
}

TEST(Map, WeightedMeanEqualsImageProbability) {
    for (std::uint64_t seed : {6, 7, 8}) {
        const auto model = random_model(seed);
        const auto img = half_busy_image(310, 240, seed, 3);
        const TileSpec spec(100, 0.7);
        const auto map = probability_map(model, img, spec);
        EXPECT_NEAR(map.weighted_mean(), image_probability(model, img, spec), 1e-6);
        EXPECT_EQ(map.model_id, model.id());
    }
}

TEST(Map, BinsAndColours) {
    EXPECT_EQ(probability_bin(0.65), ProbabilityBin::red);
    EXPECT_EQ(probability_bin(0.649), ProbabilityBin::gold);
    EXPECT_EQ(probability_bin(0.5), ProbabilityBin::gold);
    EXPECT_EQ(probability_bin(0.499), ProbabilityBin::green);
    EXPECT_EQ(probability_bin(0.351), ProbabilityBin::green);
    EXPECT_EQ(probability_bin(0.35), ProbabilityBin::blue);
    EXPECT_EQ(probability_bin(0.0), ProbabilityBin::blue);
    EXPECT_EQ(probability_bin(1.0), ProbabilityBin::red);
    EXPECT_NE(bin_color(ProbabilityBin::red), bin_color(ProbabilityBin::blue));
}

TEST(Map, RenderLeavesUncoveredPixelsTransparent) {
    const std::vector<Tile> tiles{{0, 0, 2, 0, "a", TileLabel::unlabeled}};
    const auto map = accumulate_map(3, 2, tiles, {0.9});
    const auto rgba = render_map(map);
    ASSERT_EQ(rgba.size(), 3u * 2u * 4u);
    const auto red = bin_color(ProbabilityBin::red);
    for (int i : {0, 1, 3, 4})
        for (int c = 0; c < 4; ++c)
            EXPECT_EQ(rgba[i * 4 + c], red[c]);
    EXPECT_EQ(rgba[2 * 4 + 3], 0);
    EXPECT_EQ(rgba[5 * 4 + 3], 0);

    const auto up = upsample_nearest(rgba, 3, 2, 6, 4);
    ASSERT_EQ(up.size(), 6u * 4u * 4u);
    EXPECT_EQ(up[(3 * 6 + 3) * 4], red[0]);  // (3,3) maps to (1,1)
    EXPECT_EQ(up[(0 * 6 + 5) * 4 + 3], 0);   // (5,0) maps to (2,0)

    const auto base = constant_image(3, 2, 100, 3);
    const auto blended = composite(base, rgba);
    EXPECT_EQ(blended.at(2, 0, 0), 100);  // transparent: unchanged
    EXPECT_NE(blended.at(0, 0, 0), 100);
}

TEST(Verdict, StrictThreshold) {
    EXPECT_EQ(classify_image(0.5), Verdict::comparative);
    EXPECT_EQ(classify_image(0.5000001), Verdict::positive);
    EXPECT_EQ(classify_image(0.7, 0.7), Verdict::comparative);
    EXPECT_EQ(classify_image(0.2, 0.1), Verdict::positive);
}

TEST(MapDump, RoundTrip) {
    const auto model = random_model(9);
    const auto map = probability_map(model, half_busy_image(240, 200, 10), TileSpec(100, 0.5));
    const auto dir = scratch_dir("map_dump");
    write_map_dump(map, dir / "m.map");
    const auto back = read_map_dump(dir / "m.map");
    EXPECT_TRUE((back.mean_prob == map.mean_prob).all());
    EXPECT_TRUE((back.coverage == map.coverage).all());
    EXPECT_EQ(back.tile, map.tile);
    EXPECT_EQ(back.model_id, map.model_id);
    EXPECT_DOUBLE_EQ(back.density, map.density);
    EXPECT_THROW(read_map_dump(dir / "missing.map"), Error);
}
