// salient: command-line pipeline over a painting corpus.
//
//   salient synth        write a synthetic corpus (manifest.jsonl + images/)
//   salient tile         split the manifest and write entropy-gated tile sets
//   salient train        train one model per seed on the training tiles
//   salient evaluate     score test images, write reports, rank models
//   salient map          probability map for one image
//   salient regress      false positives vs. a target's probability, OLS fit
//   salient corroborate  cross-model ordering check on external images
//
// Every stage reads a JSON run config (--config) whose keys can be overridden
// one-to-one by flags, and writes only into the run directory (`out`).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "run_config.hpp"
#include "salient/dataset.hpp"
#include "salient/entropy_tiler.hpp"
#include "salient/error.hpp"
#include "salient/evaluation.hpp"
#include "salient/imaging.hpp"
#include "salient/inference_maps.hpp"
#include "salient/synth.hpp"
#include "salient/trainer.hpp"

namespace fs = std::filesystem;
using namespace salient;
using salient::cli::RunConfig;

namespace {

// Stage inputs produced by earlier stages, relative to the run directory.
const fs::path kTrainTiles = fs::path("tiles") / "train";
const fs::path kTestTiles = fs::path("tiles") / "test";
const fs::path kSplitFile = "split.json";
const fs::path kTileConfig = "tile.config.json";
const fs::path kModelsDir = "models";
const fs::path kReportsDir = "reports";
const fs::path kMapsDir = "maps";

struct StageArgs {
    std::vector<std::string> models;   // model bundles (default: run's models/)
    std::vector<std::string> reports;  // report files or directories
    std::string points;
    std::string target;
    std::string image;
    double canvas_width_cm = 0.0;
    std::string entry;
    std::string name;
};

fs::path run_dir(const RunConfig& c) {
    return fs::path(c.out);
}

void require_file(const fs::path& path, const std::string& how_to_make) {
    if (!fs::exists(path))
        throw data_error("missing input '" + path.string() + "': " + how_to_make);
}

Manifest require_manifest(const RunConfig& c) {
    if (c.manifest.empty())
        throw config_error("no manifest given: set \"manifest\" in the config or pass --manifest");
    require_file(c.manifest, "check the manifest path");
    return load_manifest(c.manifest);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot write '" + path.string() + "'");
    out << text;
}

void snapshot(const RunConfig& c, const std::string& stage) {
    fs::create_directories(run_dir(c));
    cli::save_config(c, run_dir(c) / (stage + ".config.json"));
}

/// Manifest entries with roles rewritten by the run's split, if one exists.
std::vector<ManifestEntry> split_entries(const RunConfig& c, const Manifest& m) {
    const auto split_path = run_dir(c) / kSplitFile;
    if (!fs::exists(split_path))
        return m.entries;
    return apply_split(m.entries, split_from_json(slurp(split_path)));
}

std::vector<ManifestEntry> with_role(const std::vector<ManifestEntry>& entries, Role role) {
    std::vector<ManifestEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [role](const ManifestEntry& e) { return e.role == role; });
    return out;
}

CanvasImage load_entry_image(const Manifest& m, const ManifestEntry& e) {
    CanvasImage img = read_image(m.resolve(e));
    img.set_source_id(e.id);
    img.set_density(img.width() / e.canvas_width_cm);
    return img;
}

std::vector<TrainedModel> load_models(const RunConfig& c, const StageArgs& args) {
    std::vector<fs::path> paths(args.models.begin(), args.models.end());
    if (paths.empty()) {
        const auto dir = run_dir(c) / kModelsDir;
        require_file(dir, "run `salient train` first or pass --model");
        for (const auto& f : fs::directory_iterator(dir))
            if (f.path().extension() == ".model")
                paths.push_back(f.path());
        std::sort(paths.begin(), paths.end());
        if (paths.empty())
            throw data_error("no model bundles in '" + dir.string() +
                             "': run `salient train` first or pass --model");
    }
    std::vector<TrainedModel> models;
    for (const auto& p : paths)
        models.push_back(load_model(p));
    return models;
}

TileSpec eval_spec(const TrainedModel& model) {
    return TileSpec(model.provenance.tiles.side, model.provenance.tiles.neg_overlap);
}

// ---------------------------------------------------------------------------

int run_synth(RunConfig c) {
    const auto config = c.synth_config();
    const auto corpus = synth::generate_corpus(config);
    synth::write_corpus(corpus, run_dir(c));
    if (c.synth_composite) {
        synth::Layout layout;
        layout.background = ImageClass::positive;
        const int side = config.image_side_px;
        layout.regions.push_back({side * 9 / 32, side * 9 / 32, side * 7 / 16, side * 7 / 16,
                                  ImageClass::comparative});
        const auto comp = synth::generate_composite(config, layout, synth::derive_seed(c.seed, 1u << 20));
        write_png(comp.image, run_dir(c) / "composite.png");
        write_png(comp.mask, run_dir(c) / "composite_mask.png");
        std::cout << "composite: " << (run_dir(c) / "composite.png").string() << " (canvas width "
                  << side / config.native_density << " cm)\n";
    }
    c.manifest = (run_dir(c) / "manifest.jsonl").string();
    snapshot(c, "synth");
    std::cout << "wrote " << corpus.manifest.entries.size() << " images and " << c.manifest << '\n';
    return 0;
}

int run_tile(RunConfig c) {
    const Manifest m = require_manifest(c);
    const SplitPlan plan = c.split == "random"
                               ? random_split(m.entries, static_cast<std::size_t>(c.split_train),
                                              static_cast<std::size_t>(c.split_test), c.seed)
                               : curated_split(m.entries);
    const auto entries = apply_split(m.entries, plan);

    std::vector<AnalysisImage> images;
    for (const auto& e : entries)
        if (e.role != Role::external)
            images.push_back(prepare_image(m, e, c.density));
    if (c.balance) {
        c.pos_overlap = balance_overlaps(images, c.tile_side, c.neg_overlap);
        std::cout << "balanced positive overlap: " << c.pos_overlap << '\n';
    }
    const auto sets = build_tilesets(images, c.tile_side, c.pos_overlap, c.neg_overlap);
    for (const auto& w : sets.warnings)
        std::cerr << "warning: " << w << '\n';

    std::vector<const CanvasImage*> grays;
    for (const auto& img : images)
        grays.push_back(&img.gray);
    fs::remove_all(run_dir(c) / "tiles");
    write_tileset(run_dir(c) / kTrainTiles, sets.train_tiles, grays);
    write_tileset(run_dir(c) / kTestTiles, sets.test_tiles, grays);
    write_text(run_dir(c) / kSplitFile, split_to_json(plan) + "\n");

    nlohmann::ordered_json summary{
        {"train_positive", sets.train_counts.positive},
        {"train_comparative", sets.train_counts.comparative},
        {"test_positive", sets.test_counts.positive},
        {"test_comparative", sets.test_counts.comparative},
        {"pos_overlap", c.pos_overlap},
        {"neg_overlap", c.neg_overlap},
        {"warnings", sets.warnings}};
    write_text(run_dir(c) / "tiles" / "summary.json", summary.dump(2) + "\n");
    snapshot(c, "tile");
    std::cout << "training tiles: " << sets.train_counts.positive << " positive, "
              << sets.train_counts.comparative << " comparative (ratio "
              << sets.train_counts.ratio() << ")\n"
              << "test tiles: " << sets.test_counts.positive << " positive, "
              << sets.test_counts.comparative << " comparative\n";
    return 0;
}

int run_train(RunConfig c) {
    const auto index = run_dir(c) / kTrainTiles / "index.tsv";
    require_file(index, "run `salient tile` first");
    require_file(run_dir(c) / kTileConfig, "run `salient tile` first");
    // Tiling parameters come from the tile stage that produced the data.
    const RunConfig tiled = cli::load_config(run_dir(c) / kTileConfig);
    c.density = tiled.density;
    c.tile_side = tiled.tile_side;
    c.pos_overlap = tiled.pos_overlap;
    c.neg_overlap = tiled.neg_overlap;

    const auto spec = c.architecture();
    const auto tiles = read_tile_index(index);
    // Each tile PNG becomes its own image; the tile then covers it exactly.
    std::vector<CanvasImage> crops;
    crops.reserve(tiles.size());
    std::vector<Tile> local;
    for (const auto& t : tiles) {
        const auto name = tile_filename(t);
        crops.push_back(read_image(run_dir(c) / kTrainTiles / name));
        crops.back().set_source_id(name);
        local.push_back({0, 0, t.side, t.entropy_bits, name, t.label});
    }
    std::map<std::string, const CanvasImage*> by_id;
    for (const auto& img : crops)
        by_id[img.source_id()] = &img;
    const auto data = make_training_set(local, by_id, spec.input_side);

    std::string split_id = "curated";
    if (const auto split_path = run_dir(c) / kSplitFile; fs::exists(split_path)) {
        const auto plan = split_from_json(slurp(split_path));
        if (plan.kind == SplitKind::random)
            split_id = "random" + std::to_string(plan.seed.value_or(0));
    }
    const Provenance prov{split_id, c.tile_config(), fingerprint(tiles, data)};
    const auto models =
        train_ensemble(spec, data, c.hyperparams(), c.model_seeds(), prov, c.threads);

    fs::create_directories(run_dir(c) / kModelsDir);
    for (const auto& m : models) {
        save_model(m, run_dir(c) / kModelsDir / (m.id() + ".model"));
        std::ostringstream metrics;
        metrics << "epoch\tloss\taccuracy\n";
        metrics.precision(9);
        for (const auto& h : m.history)
            metrics << h.epoch << '\t' << h.loss << '\t' << h.accuracy << '\n';
        write_text(run_dir(c) / kModelsDir / (m.id() + ".metrics.tsv"), metrics.str());
        std::cout << m.id() << ": final loss " << m.history.back().loss << ", tile accuracy "
                  << m.history.back().accuracy << '\n';
    }
    write_text(run_dir(c) / kModelsDir / "fingerprint.txt", prov.tileset_fingerprint + "\n");
    snapshot(c, "train");
    return 0;
}

int run_evaluate(RunConfig c, const StageArgs& args) {
    const Manifest m = require_manifest(c);
    const auto entries = split_entries(c, m);
    const auto test = with_role(entries, Role::test);
    const auto externals = with_role(entries, Role::external);
    const auto models = load_models(c, args);

    fs::create_directories(run_dir(c) / kReportsDir);
    std::vector<EvaluationReport> reports;
    for (const auto& model : models) {
        reports.push_back(evaluate(model, m, test, eval_spec(model), externals));
        write_report(reports.back(), run_dir(c) / kReportsDir / (model.id() + ".report.jsonl"));
        for (const auto& r : reports.back().images)
            if (!r.note.empty())
                std::cerr << "note: " << model.id() << " / " << r.id << ": " << r.note << '\n';
    }
    const auto table = format_model_table(reports, args.target);
    std::cout << table;

    const auto sel = select_successful(models, [&](const TrainedModel& model) {
        for (std::size_t i = 0; i < models.size(); ++i)
            if (&models[i] == &model)
                return reports[i].score();
        throw data_error("unknown model");
    });
    std::ostringstream ranking;
    ranking << "successful models (zero false negatives), best first:\n";
    for (const auto& r : sel.ranked)
        ranking << "  " << models[r.index].id() << "  accuracy " << r.score.accuracy << "  FP "
                << r.score.false_positives << '\n';
    for (const auto& d : sel.diagnostics)
        ranking << "  " << d << '\n';
    std::cout << ranking.str();
    write_text(run_dir(c) / kReportsDir / "models.txt", table + ranking.str());
    snapshot(c, "evaluate");
    return 0;
}

int run_map(RunConfig c, const StageArgs& args) {
    if (args.models.size() != 1)
        throw config_error("map needs exactly one --model");
    const TrainedModel model = load_model(args.models.front());
    CanvasImage img;
    std::string name = args.name;
    if (!args.entry.empty()) {
        const Manifest m = require_manifest(c);
        img = load_entry_image(m, m.find(args.entry));
        if (name.empty())
            name = args.entry;
    } else {
        if (args.image.empty())
            throw config_error("map needs --image (with --canvas-width-cm) or --entry");
        if (!(args.canvas_width_cm > 0.0))
            throw config_error("map needs a positive --canvas-width-cm for '" + args.image + "'");
        require_file(args.image, "check the image path");
        img = read_image(args.image);
        img.set_density(img.width() / args.canvas_width_cm);
        if (name.empty())
            name = fs::path(args.image).stem().string();
        img.set_source_id(name);
    }

    const auto spec = eval_spec(model);
    const auto map = probability_map(model, img, spec);
    const double overall = image_probability(model, img, spec);
    const auto dir = run_dir(c) / kMapsDir;
    fs::create_directories(dir);
    const auto rgba = render_map(map);
    write_map_dump(map, dir / (name + ".map"));
    write_png_rgba(rgba, map.width(), map.height(), dir / (name + "_map.png"));
    write_png(composite(resample_to_density(img, map.density), rgba), dir / (name + "_overlay.png"));
    snapshot(c, "map");
    std::cout << name << ": overall probability " << overall << " ("
              << (classify_image(overall) == Verdict::positive ? "positive" : "comparative")
              << "), map mean " << map.weighted_mean() << '\n'
              << "wrote " << (dir / (name + "_overlay.png")).string() << '\n';
    return 0;
}

int run_regress(RunConfig c, const StageArgs& args) {
    std::vector<std::pair<double, double>> points;
    if (!args.points.empty()) {
        points = read_points(args.points);
    } else {
        if (args.target.empty())
            throw config_error("regress needs --points, or --reports with --target");
        std::vector<fs::path> files;
        std::vector<std::string> sources = args.reports;
        if (sources.empty())
            sources.push_back((run_dir(c) / kReportsDir).string());
        for (const auto& s : sources) {
            require_file(s, "run `salient evaluate` first or pass --points");
            if (fs::is_directory(s)) {
                for (const auto& f : fs::directory_iterator(s))
                    if (f.path().string().ends_with(".report.jsonl"))
                        files.push_back(f.path());
            } else {
                files.emplace_back(s);
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto report = read_report(f);
            const auto* r = report.find(args.target);
            if (!r || !r->scored)
                throw data_error("report '" + f.string() + "' has no score for '" + args.target + "'");
            points.emplace_back(report.false_positives, r->overall_prob);
        }
    }
    const auto fit = linear_fit(points);
    std::ostringstream os;
    os << "points " << fit.n_points << "\nslope " << fit.slope << "\nintercept " << fit.intercept
       << "\nr_squared " << fit.r_squared << '\n';
    std::cout << os.str();
    fs::create_directories(run_dir(c));
    write_text(run_dir(c) / "regression.txt", os.str());
    write_points(points, run_dir(c) / "regression_points.tsv");
    snapshot(c, "regress");
    return 0;
}

int run_corroborate(RunConfig c, const StageArgs& args) {
    const Manifest m = require_manifest(c);
    const auto externals = with_role(split_entries(c, m), Role::external);
    const auto models = load_models(c, args);
    const auto report = corroborate(models, m, externals, eval_spec(models.front()));
    const auto text = format_ordering(report);
    std::cout << text;
    fs::create_directories(run_dir(c));
    write_text(run_dir(c) / "corroboration.txt", text);
    snapshot(c, "corroborate");
    return 0;
}

// ---------------------------------------------------------------------------

/// Finds --config before the real parse so file values become the defaults
/// that flags then override.
std::string prescan_config(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            return argv[i + 1];
        if (a.rfind("--config=", 0) == 0)
            return a.substr(9);
    }
    return {};
}

void add_config_options(CLI::App* sub, RunConfig& c) {
    sub->add_option("--config", "JSON run config; flags override its keys");
    sub->add_option("--manifest", c.manifest, "Corpus manifest (JSON lines)");
    sub->add_option("--out", c.out, "Run directory");
    sub->add_option("--density", c.density, "Analysis density, px per canvas cm");
    sub->add_option("--tile-side", c.tile_side, "Tile side in analysis pixels");
    sub->add_option("--pos-overlap", c.pos_overlap, "Positive-class tile overlap");
    sub->add_option("--neg-overlap", c.neg_overlap, "Comparative-class tile overlap");
    sub->add_option("--balance", c.balance, "Derive pos-overlap from tile populations");
    sub->add_option("--split", c.split, "curated | random");
    sub->add_option("--split-train", c.split_train, "Comparative training images (random split)");
    sub->add_option("--split-test", c.split_test, "Comparative test images (random split)");
    sub->add_option("--variant", c.variant, "five_layer | eight_layer");
    sub->add_option("--input-side", c.input_side, "Network input side");
    sub->add_option("--epochs", c.epochs);
    sub->add_option("--batch-size", c.batch_size);
    sub->add_option("--learning-rate", c.learning_rate);
    sub->add_option("--momentum", c.momentum);
    sub->add_option("--shuffle", c.shuffle);
    sub->add_option("--seed", c.seed, "Top-level seed; model k uses seed + k");
    sub->add_option("--models", c.models, "Models (seeds) to train");
    sub->add_option("--threads", c.threads, "Concurrent model trainings");
    sub->add_option("--synth-positive", c.synth_positive);
    sub->add_option("--synth-comparative", c.synth_comparative);
    sub->add_option("--synth-positive-test", c.synth_positive_test);
    sub->add_option("--synth-comparative-test", c.synth_comparative_test);
    sub->add_option("--synth-external", c.synth_external);
    sub->add_option("--synth-side", c.synth_side, "Synthetic image side, native px");
    sub->add_option("--synth-native-density", c.synth_native_density);
    sub->add_option("--synth-contrast", c.synth_contrast, "Class texture amplitude in [0, 1]");
    sub->add_option("--synth-composite", c.synth_composite);
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig config;
    StageArgs args;
    try {
        if (const auto path = prescan_config(argc, argv); !path.empty())
            config = cli::load_config(path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    }

    CLI::App app{"Entropy-gated tile classifier pipeline"};
    app.require_subcommand(1);
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus");
    auto* tile = app.add_subcommand("tile", "Split the corpus and write salient tile sets");
    auto* train = app.add_subcommand("train", "Train one model per seed");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score test images and rank models");
    auto* map = app.add_subcommand("map", "Probability map for one image");
    auto* regress = app.add_subcommand("regress", "Fit false positives against a target's probability");
    auto* corroborate_cmd = app.add_subcommand("corroborate", "Cross-model ordering on external images");
    for (auto* sub : {synth, tile, train, evaluate_cmd, map, regress, corroborate_cmd})
        add_config_options(sub, config);
    for (auto* sub : {evaluate_cmd, map, corroborate_cmd})
        sub->add_option("--model", args.models, "Model bundle(s); default: the run's models/");
    evaluate_cmd->add_option("--target", args.target, "Image id whose probability to tabulate");
    map->add_option("--image", args.image, "Image file");
    map->add_option("--canvas-width-cm", args.canvas_width_cm, "Physical width of --image");
    map->add_option("--entry", args.entry, "Manifest entry id instead of --image");
    map->add_option("--name", args.name, "Output basename");
    regress->add_option("--points", args.points, "File of 'x y' pairs");
    regress->add_option("--reports", args.reports, "Report files or directories");
    regress->add_option("--target", args.target, "Image id for the y values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
    }

    try {
        config.validate();
        if (*synth)
            return run_synth(config);
        if (*tile)
            return run_tile(config);
        if (*train)
            return run_train(config);
        if (*evaluate_cmd)
            return run_evaluate(config, args);
        if (*map)
            return run_map(config, args);
        if (*regress)
            return run_regress(config, args);
        return run_corroborate(config, args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
