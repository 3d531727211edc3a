// msd: masked signal decomposition for text extraction.
// Subcommands: extract, synth, eval, sweep (and a hidden oracle debug mode).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msd/basis.hpp"
#include "msd/eval.hpp"
#include "msd/imaging.hpp"
#include "msd/oracle.hpp"
#include "msd/pipeline.hpp"
#include "msd/solver.hpp"
#include "msd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

std::string strategy_name(msd::BinarizeStrategy s) {
    return s == msd::BinarizeStrategy::AtEnd ? "at-end" : "per-iter";
}

msd::BinarizeStrategy parse_strategy(const std::string& s) {
    if (s == "at-end") return msd::BinarizeStrategy::AtEnd;
    if (s == "per-iter") return msd::BinarizeStrategy::PerIteration;
    throw std::invalid_argument("unknown strategy: " + s);
}

json config_to_json(const msd::RunConfig& cfg) {
    json j;
    j["lambda"] = cfg.solver.lambda;
    j["kmax"] = cfg.solver.k_max;
    j["k1"] = cfg.solver.k1;
    j["k2"] = cfg.solver.k2;
    j["strategy"] = strategy_name(cfg.solver.strategy);
    j["threshold"] = cfg.solver.threshold;
    if (cfg.solver.ridge) j["ridge"] = *cfg.solver.ridge;
    else j["ridge"] = "auto";
    j["seed"] = cfg.solver.seed;
    j["block_side"] = cfg.block_side;
    j["m1"] = cfg.m1;
    j["m2"] = cfg.m2;
    j["emit_relaxed"] = cfg.emit_relaxed;
    j["threads"] = cfg.threads;
    return j;
}

void config_from_json(const json& j, msd::RunConfig& cfg) {
    if (j.contains("lambda")) cfg.solver.lambda = j["lambda"].get<double>();
    if (j.contains("kmax")) cfg.solver.k_max = j["kmax"].get<std::size_t>();
    if (j.contains("k1")) cfg.solver.k1 = j["k1"].get<std::size_t>();
    if (j.contains("k2")) cfg.solver.k2 = j["k2"].get<std::size_t>();
    if (j.contains("strategy"))
        cfg.solver.strategy = parse_strategy(j["strategy"].get<std::string>());
    if (j.contains("threshold")) cfg.solver.threshold = j["threshold"].get<double>();
    if (j.contains("ridge") && j["ridge"].is_number())
        cfg.solver.ridge = j["ridge"].get<double>();
    if (j.contains("seed")) cfg.solver.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("block_side")) cfg.block_side = j["block_side"].get<std::size_t>();
    if (j.contains("m1")) cfg.m1 = j["m1"].get<std::size_t>();
    if (j.contains("m2")) cfg.m2 = j["m2"].get<std::size_t>();
    if (j.contains("emit_relaxed")) cfg.emit_relaxed = j["emit_relaxed"].get<bool>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<std::size_t>();
}

// Shared solver/pipeline flags. Values land in cfg only when the user set
// them, so a --config file can supply defaults first.
struct CommonFlags {
    double lambda = 0;
    std::size_t kmax = 0, k1 = 0, k2 = 0, block_side = 0, m1 = 0, m2 = 0,
                threads = 0;
    double threshold = 0, ridge = 0;
    std::string strategy;
    std::uint64_t seed = 0;
    std::string config_path;

    CLI::Option *o_lambda, *o_kmax, *o_k1, *o_k2, *o_block, *o_m1, *o_m2,
        *o_threads, *o_threshold, *o_ridge, *o_strategy, *o_seed;

    void add_to(CLI::App* app) {
        o_lambda = app->add_option("--lambda", lambda, "Mask sparsity weight");
        o_kmax = app->add_option("--kmax", kmax, "Outer iterations");
        o_k1 = app->add_option("--k1", k1, "Background coefficient sparsity");
        o_k2 = app->add_option("--k2", k2, "Foreground coefficient sparsity");
        o_block = app->add_option("--block-side", block_side, "Block side in pixels");
        o_m1 = app->add_option("--m1", m1, "Background subspace dimension");
        o_m2 = app->add_option("--m2", m2, "Foreground subspace dimension");
        o_threshold = app->add_option("--threshold", threshold, "Binarization threshold");
        o_strategy = app->add_option("--strategy", strategy,
                                     "Binarization strategy: at-end | per-iter");
        o_ridge = app->add_option("--ridge", ridge, "Normal-equation ridge (default auto)");
        o_seed = app->add_option("--seed", seed, "Mask initialization seed");
        o_threads = app->add_option("--threads", threads, "Worker threads");
        app->add_option("--config", config_path, "JSON config file (flags override)");
    }

    void apply(msd::RunConfig& cfg) const {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw msd::IoError("cannot open config " + config_path);
            json j;
            in >> j;
            config_from_json(j, cfg);
        }
        if (o_lambda->count()) cfg.solver.lambda = lambda;
        if (o_kmax->count()) cfg.solver.k_max = kmax;
        if (o_k1->count()) cfg.solver.k1 = k1;
        if (o_k2->count()) cfg.solver.k2 = k2;
        if (o_block->count()) cfg.block_side = block_side;
        if (o_m1->count()) cfg.m1 = m1;
        if (o_m2->count()) cfg.m2 = m2;
        if (o_threshold->count()) cfg.solver.threshold = threshold;
        if (o_strategy->count()) cfg.solver.strategy = parse_strategy(strategy);
        if (o_ridge->count()) cfg.solver.ridge = ridge;
        if (o_seed->count()) cfg.solver.seed = seed;
        if (o_threads->count()) cfg.threads = threads;
    }
};

void echo_config(const msd::RunConfig& cfg, const std::string& beside) {
    std::ofstream out(beside + ".config.json");
    if (!out) throw msd::IoError("cannot write config echo beside " + beside);
    out << config_to_json(cfg).dump(2) << "\n";
}

int run_extract(const std::string& input, const std::string& output,
                msd::RunConfig cfg, const CommonFlags& flags, bool emit_relaxed) {
    flags.apply(cfg);
    cfg.emit_relaxed = emit_relaxed;
    cfg.solver.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const msd::GrayImage img = msd::load_image(input);
    const msd::ExtractResult res = msd::extract_image(img, cfg);
    msd::save_mask(res.mask, output);
    if (cfg.emit_relaxed) {
        const fs::path p(output);
        const std::string relaxed_path =
            (p.parent_path() / (p.stem().string() + "_relaxed" + p.extension().string()))
                .string();
        msd::save_mask(res.relaxed, relaxed_path);
    }
    echo_config(cfg, output);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    std::cout << "extract: " << res.blocks << " blocks";
    if (res.failed_blocks)
        std::cout << " (" << res.failed_blocks << " numerically degenerate, marked background)";
    std::cout << ", " << secs << " s\n";
    return kExitOk;
}

int run_synth(const std::string& outdir, msd::SynthSpec spec, std::size_t count,
              std::uint64_t seed) {
    std::vector<msd::SynthSpec> specs;
    const auto blocks = msd::generate_corpus(spec, count, seed, &specs);
    msd::write_corpus(outdir, blocks, specs);
    std::cout << "synth: wrote " << count << " block/mask pairs to " << outdir << "\n";
    return kExitOk;
}

struct MaskPair {
    std::string id;
    std::string pred_path;
    std::string truth_path;
};

std::vector<MaskPair> pair_directories(const std::string& pred_dir,
                                       const std::string& truth_dir,
                                       std::vector<std::string>& unpaired) {
    std::vector<MaskPair> pairs;
    std::vector<std::string> truth_files;
    for (const auto& e : fs::directory_iterator(truth_dir)) {
        const std::string name = e.path().filename().string();
        const std::string ext = e.path().extension().string();
        if (ext != ".pgm" && ext != ".png") continue;
        truth_files.push_back(name);
    }
    std::sort(truth_files.begin(), truth_files.end());
    // a corpus directory holds both images and _gt masks; when any _gt file
    // is present only those count as truth
    bool has_gt = false;
    for (const auto& name : truth_files) {
        const std::string stem = fs::path(name).stem().string();
        if (stem.size() > 3 && stem.substr(stem.size() - 3) == "_gt") has_gt = true;
    }
    for (const auto& name : truth_files) {
        const fs::path p(name);
        std::string stem = p.stem().string();
        const bool is_gt = stem.size() > 3 && stem.substr(stem.size() - 3) == "_gt";
        if (has_gt && !is_gt) continue;
        if (is_gt) stem = stem.substr(0, stem.size() - 3);
        std::string found;
        for (const char* ext : {".pgm", ".png"}) {
            const fs::path cand = fs::path(pred_dir) / (stem + ext);
            if (fs::exists(cand)) { found = cand.string(); break; }
        }
        if (found.empty()) {
            unpaired.push_back(name);
            continue;
        }
        pairs.push_back({stem, found, (fs::path(truth_dir) / name).string()});
    }
    return pairs;
}

json summary_json(const msd::CorpusEvalReport& rep) {
    json j;
    j["macro"] = {{"precision", rep.macro.precision},
                  {"recall", rep.macro.recall},
                  {"f1", rep.macro.f1}};
    j["micro"] = {{"precision", rep.micro.precision},
                  {"recall", rep.micro.recall},
                  {"f1", rep.micro.f1}};
    j["blocks"] = rep.rows.size();
    return j;
}

int run_eval(const std::string& pred_dir, const std::string& truth_dir,
             const std::string& out_dir) {
    std::vector<std::string> unpaired;
    const auto pairs = pair_directories(pred_dir, truth_dir, unpaired);
    if (!unpaired.empty()) {
        std::cerr << "eval: unpaired truth files:\n";
        for (const auto& u : unpaired) std::cerr << "  " << u << "\n";
        return kExitIo;
    }
    if (pairs.empty()) {
        std::cerr << "eval: no mask pairs found\n";
        return kExitIo;
    }
    std::vector<std::string> ids;
    std::vector<msd::MaskVector> preds, truths;
    for (const auto& p : pairs) {
        ids.push_back(p.id);
        preds.push_back(msd::mask_from_image(msd::load_image(p.pred_path)));
        truths.push_back(msd::mask_from_image(msd::load_image(p.truth_path)));
    }
    const auto rep = msd::evaluate_mask_pairs(ids, preds, truths);
    fs::create_directories(out_dir);
    msd::write_metrics_csv(rep, (fs::path(out_dir) / "metrics.csv").string());
    std::ofstream js(fs::path(out_dir) / "summary.json");
    js << summary_json(rep).dump(2) << "\n";
    std::cout << "macro precision " << rep.macro.precision << " recall "
              << rep.macro.recall << " f1 " << rep.macro.f1 << "\n";
    return kExitOk;
}

// One full extract+eval pass over an on-disk corpus with a given config.
msd::CorpusEvalReport run_corpus(const std::string& corpus_dir,
                                 const msd::RunConfig& cfg, double* mean_objective) {
    std::vector<std::string> unpaired;
    const auto pairs = pair_directories(corpus_dir, corpus_dir, unpaired);
    if (pairs.empty()) throw msd::IoError("no blocks in corpus " + corpus_dir);
    const msd::Subspace p1 = msd::make_dct_subspace(cfg.block_side, cfg.m1);
    const msd::Subspace p2 = msd::make_hadamard_subspace(cfg.block_side, cfg.m2);
    std::vector<std::string> ids;
    std::vector<msd::MaskVector> preds, truths;
    double obj_sum = 0.0;
    std::size_t obj_count = 0;
    for (const auto& p : pairs) {
        const msd::GrayImage img = msd::load_image(p.pred_path);
        const msd::ExtractResult res = msd::extract_image(img, cfg, p1, p2);
        ids.push_back(p.id);
        preds.push_back(msd::mask_from_image(res.mask));
        truths.push_back(msd::mask_from_image(msd::load_image(p.truth_path)));
        for (const auto& tr : res.traces)
            if (!tr.empty()) { obj_sum += tr.back(); ++obj_count; }
    }
    if (mean_objective)
        *mean_objective = obj_count ? obj_sum / obj_count : 0.0;
    return msd::evaluate_mask_pairs(ids, preds, truths);
}

int run_sweep(const std::string& corpus_dir, msd::RunConfig base,
              const CommonFlags& flags, std::vector<double> lambdas,
              std::vector<double> thresholds, std::vector<std::string> strategies,
              const std::string& out_csv) {
    flags.apply(base);
    if (lambdas.empty()) lambdas = {base.solver.lambda};
    if (thresholds.empty()) thresholds = {base.solver.threshold};
    if (strategies.empty()) strategies = {strategy_name(base.solver.strategy)};
    std::ofstream out(out_csv);
    if (!out) throw msd::IoError("cannot write " + out_csv);
    out << "lambda,threshold,strategy,precision,recall,f1,mean_objective\n";
    out << std::setprecision(17);
    double best_f1 = -1.0;
    std::string best_desc;
    for (double lam : lambdas)
        for (double th : thresholds)
            for (const auto& st : strategies) {
                msd::RunConfig cfg = base;
                cfg.solver.lambda = lam;
                cfg.solver.threshold = th;
                cfg.solver.strategy = parse_strategy(st);
                double mean_obj = 0.0;
                const auto rep = run_corpus(corpus_dir, cfg, &mean_obj);
                out << lam << "," << th << "," << st << ","
                    << rep.macro.precision << "," << rep.macro.recall << ","
                    << rep.macro.f1 << "," << mean_obj << "\n";
                std::cout << "lambda=" << lam << " threshold=" << th
                          << " strategy=" << st << " f1=" << rep.macro.f1 << "\n";
                if (rep.macro.f1 > best_f1) {
                    best_f1 = rep.macro.f1;
                    best_desc = "lambda=" + std::to_string(lam) +
                                " threshold=" + std::to_string(th) +
                                " strategy=" + st;
                }
            }
    std::cout << "best: " << best_desc << " (macro f1 " << best_f1 << ")\n";
    return kExitOk;
}

int run_oracle(std::size_t n_side, std::uint64_t seed, double lambda) {
    // Tiny random instance: compare the exhaustive optimum with the
    // binarized relaxed solution under the unrelaxed objective.
    const std::size_t n = n_side * n_side;
    msd::Subspace p1 = msd::make_dct_subspace(n_side, 2);
    msd::Subspace p2 = msd::make_dct_subspace(n_side, 2);
    // distinct foreground basis: reverse-order atoms
    p2 = msd::make_dct_subspace(n_side, n);
    msd::Subspace p2r;
    p2r.block_side = n_side;
    p2r.kind = msd::SubspaceKind::Custom;
    p2r.basis = msd::Matrix(n, 2);
    for (std::size_t r = 0; r < n; ++r) {
        p2r.basis(r, 0) = p2.basis(r, n - 1);
        p2r.basis(r, 1) = p2.basis(r, n - 2);
    }
    msd::Pcg32 rng(seed);
    msd::Vector f(n);
    for (double& v : f) v = rng.uniform();
    const auto oracle = msd::exhaustive_solve(f, p1, p2r, 2, 2, lambda);
    msd::SolverConfig cfg;
    cfg.lambda = lambda;
    cfg.k1 = cfg.k2 = 2;
    cfg.seed = seed;
    const auto sol = msd::solve_block(f, p1, p2r, cfg);
    const double scored = msd::score_mask(f, p1, p2r, 2, 2, lambda, sol.mask);
    std::cout << "oracle objective " << oracle.best_objective << " over "
              << oracle.evaluated << " masks; relaxed-solver objective "
              << scored << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked signal decomposition: text extraction from textured backgrounds"};
    app.require_subcommand(1);

    // extract
    auto* ext = app.add_subcommand("extract", "Segment text from an image");
    std::string ext_in, ext_out;
    bool ext_relaxed = false;
    ext->add_option("input", ext_in, "Input image (PGM or PNG)")->required();
    ext->add_option("output", ext_out, "Output binary mask (PGM or PNG)")->required();
    ext->add_flag("--emit-relaxed", ext_relaxed, "Also save the continuous mask");
    CommonFlags ext_flags;
    ext_flags.add_to(ext);

    // synth
    auto* syn = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    std::string syn_out = "corpus";
    std::size_t syn_count = 20;
    msd::SynthSpec syn_spec;
    std::uint64_t syn_seed = 7;
    syn->add_option("outdir", syn_out, "Output directory")->required();
    syn->add_option("--count", syn_count, "Number of blocks");
    syn->add_option("--seed", syn_seed, "Corpus seed");
    syn->add_option("--block-side", syn_spec.block_side, "Block side");
    syn->add_option("--text", syn_spec.glyph_text, "Glyph text");
    syn->add_option("--glyph-scale", syn_spec.glyph_scale, "Glyph scale factor");
    syn->add_option("--glyph-intensity", syn_spec.glyph_intensity, "Glyph intensity");
    syn->add_option("--texture-atoms", syn_spec.texture_atoms, "Texture atom count");
    syn->add_option("--atom-start", syn_spec.atom_start,
                    "First texture atom (zigzag index; large = hard mode)");
    syn->add_option("--amplitude", syn_spec.texture_amplitude, "Texture amplitude");

    // eval
    auto* ev = app.add_subcommand("eval", "Score predicted masks against ground truth");
    std::string ev_pred, ev_truth, ev_out;
    ev->add_option("pred", ev_pred, "Directory of predicted masks")->required();
    ev->add_option("truth", ev_truth, "Directory of ground-truth masks")->required();
    ev->add_option("--out", ev_out, "Report directory (default: pred)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Grid search over lambda/threshold/strategy");
    std::string sw_corpus, sw_out = "sweep.csv";
    std::vector<double> sw_lambdas, sw_thresholds;
    std::vector<std::string> sw_strategies;
    sw->add_option("corpus", sw_corpus, "Corpus directory (images + _gt masks)")->required();
    sw->add_option("--lambdas", sw_lambdas, "Lambda grid")->delimiter(',');
    sw->add_option("--thresholds", sw_thresholds, "Threshold grid")->delimiter(',');
    sw->add_option("--strategies", sw_strategies, "Strategy grid")->delimiter(',');
    sw->add_option("--out", sw_out, "Output CSV");
    CommonFlags sw_flags;
    sw_flags.add_to(sw);

    // hidden oracle debug mode
    auto* orc = app.add_subcommand("oracle", "Exhaustive tiny-instance check");
    orc->group(""); // hidden
    std::size_t orc_side = 3;
    std::uint64_t orc_seed = 0;
    double orc_lambda = 0.01;
    orc->add_option("--side", orc_side, "Block side (side^2 <= 16)");
    orc->add_option("--seed", orc_seed, "Instance seed");
    orc->add_option("--lambda", orc_lambda, "Mask penalty");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        msd::RunConfig cfg;
        if (ext->parsed())
            return run_extract(ext_in, ext_out, cfg, ext_flags, ext_relaxed);
        if (syn->parsed()) return run_synth(syn_out, syn_spec, syn_count, syn_seed);
        if (ev->parsed())
            return run_eval(ev_pred, ev_truth, ev_out.empty() ? ev_pred : ev_out);
        if (sw->parsed())
            return run_sweep(sw_corpus, cfg, sw_flags, sw_lambdas, sw_thresholds,
                             sw_strategies, sw_out);
        if (orc->parsed()) return run_oracle(orc_side, orc_seed, orc_lambda);
    } catch (const msd::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const msd::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const msd::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
