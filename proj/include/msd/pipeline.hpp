#ifndef MSD_PIPELINE_HPP
#define MSD_PIPELINE_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "msd/basis.hpp"
#include "msd/eval.hpp"
#include "msd/imaging.hpp"
#include "msd/solver.hpp"
#include "msd/synth.hpp"

namespace msd {

struct RunConfig {
    SolverConfig solver;
    std::size_t block_side = 64;
    std::size_t m1 = 40; // background DCT subspace dimension
    std::size_t m2 = 10; // foreground Hadamard subspace dimension
    bool emit_relaxed = false;
    std::size_t threads = 1;
};

struct BlockOutcome {
    MaskVector mask;
    MaskVector relaxed;
    Vector objective_trace;
    bool failed = false; // numerical failure; block marked all-background
};

// Solves every block with a shared read-only pair of subspaces. Blocks are
// dispatched to `threads` workers; outputs land in a block-indexed vector,
// so the result is independent of scheduling. Per-block seeds are
// solver.seed + block index. A block whose solve throws a numerical error
// is marked all-background instead of aborting the run.
inline std::vector<BlockOutcome> solve_blocks(const std::vector<Vector>& blocks,
                                              const Subspace& p1, const Subspace& p2,
                                              const SolverConfig& solver_cfg,
                                              std::size_t threads) {
    std::vector<BlockOutcome> out(blocks.size());
    if (threads < 1) threads = 1;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= blocks.size()) return;
            SolverConfig cfg = solver_cfg;
            cfg.seed = solver_cfg.seed + i;
            try {
                SolveResult r = solve_block(blocks[i], p1, p2, cfg);
                out[i].mask = std::move(r.mask);
                out[i].relaxed = std::move(r.relaxed_mask);
                out[i].objective_trace = std::move(r.objective_trace);
            } catch (const NumericalError&) {
                out[i].failed = true;
                out[i].mask.binary = true;
                out[i].mask.w.assign(blocks[i].size(), 0.0);
                out[i].relaxed = out[i].mask;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

struct ExtractResult {
    GrayImage mask;
    GrayImage relaxed;
    std::size_t blocks = 0;
    std::size_t failed_blocks = 0;
    std::vector<Vector> traces;
};

inline ExtractResult extract_image(const GrayImage& img, const RunConfig& cfg,
                                   const Subspace& p1, const Subspace& p2) {
    const BlockGrid grid = tile(img, cfg.block_side);
    const auto outcomes = solve_blocks(grid.blocks, p1, p2, cfg.solver, cfg.threads);
    ExtractResult res;
    res.blocks = outcomes.size();
    std::vector<MaskVector> masks, relaxed;
    masks.reserve(outcomes.size());
    relaxed.reserve(outcomes.size());
    for (const auto& o : outcomes) {
        if (o.failed) ++res.failed_blocks;
        masks.push_back(o.mask);
        relaxed.push_back(o.relaxed);
        res.traces.push_back(o.objective_trace);
    }
    res.mask = reassemble(grid, masks);
    if (cfg.emit_relaxed) res.relaxed = reassemble(grid, relaxed);
    return res;
}

inline ExtractResult extract_image(const GrayImage& img, const RunConfig& cfg) {
    const Subspace p1 = make_dct_subspace(cfg.block_side, cfg.m1);
    const Subspace p2 = make_hadamard_subspace(cfg.block_side, cfg.m2);
    return extract_image(img, cfg, p1, p2);
}

// ---- corpus files --------------------------------------------------------

inline std::string block_filename(std::size_t i, bool truth) {
    std::ostringstream os;
    os << "block_" << std::setw(4) << std::setfill('0') << i
       << (truth ? "_gt" : "") << ".pgm";
    return os.str();
}

inline void write_corpus(const std::string& dir, const std::vector<LabeledBlock>& blocks,
                         const std::vector<SynthSpec>& specs) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw IoError("cannot write manifest in " + dir);
    manifest << "# id seed block_side text scale intensity texture_atoms "
                "atom_start amplitude coverage\n";
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        const auto& s = specs[i];
        GrayImage img(s.block_side, s.block_side);
        img.pixels = b.image;
        save_mask(img, (fs::path(dir) / block_filename(i, false)).string());
        GrayImage gt(s.block_side, s.block_side);
        gt.pixels = b.truth_mask.w;
        save_mask(gt, (fs::path(dir) / block_filename(i, true)).string());
        double on = 0.0;
        for (double v : b.truth_mask.w) on += v;
        manifest << i << " " << s.seed << " " << s.block_side << " "
                 << s.glyph_text << " " << s.glyph_scale << " "
                 << s.glyph_intensity << " " << s.texture_atoms << " "
                 << s.atom_start << " " << s.texture_amplitude << " "
                 << on / static_cast<double>(b.truth_mask.w.size()) << "\n";
    }
}

inline MaskVector mask_from_image(const GrayImage& img) {
    MaskVector m;
    m.binary = true;
    m.w.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        m.w[i] = img.pixels[i] >= 0.5 ? 1.0 : 0.0;
    return m;
}

struct CorpusEvalRow {
    std::string id;
    ConfusionCounts counts;
    SegMetrics metrics;
};

struct CorpusEvalReport {
    std::vector<CorpusEvalRow> rows;
    SegMetrics macro;
    SegMetrics micro;
};

inline CorpusEvalReport evaluate_mask_pairs(const std::vector<std::string>& ids,
                                            const std::vector<MaskVector>& predicted,
                                            const std::vector<MaskVector>& truth) {
    CorpusEvalReport rep;
    std::vector<SegMetrics> per_block;
    std::vector<ConfusionCounts> per_counts;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        CorpusEvalRow row;
        row.id = ids[i];
        row.counts = confusion(predicted[i], truth[i]);
        row.metrics = metrics(row.counts);
        per_block.push_back(row.metrics);
        per_counts.push_back(row.counts);
        rep.rows.push_back(std::move(row));
    }
    rep.macro = aggregate(per_block);
    rep.micro = aggregate_micro(per_counts);
    return rep;
}

inline void write_metrics_csv(const CorpusEvalReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "block_id,tp,fp,fn,tn,precision,recall,f1\n";
    out << std::setprecision(17);
    for (const auto& r : rep.rows)
        out << r.id << "," << r.counts.tp << "," << r.counts.fp << ","
            << r.counts.fn << "," << r.counts.tn << "," << r.metrics.precision
            << "," << r.metrics.recall << "," << r.metrics.f1 << "\n";
}

} // namespace msd

#endif
