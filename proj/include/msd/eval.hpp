#ifndef MSD_EVAL_HPP
#define MSD_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "msd/solver.hpp"

namespace msd {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
};

struct SegMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Positive = text (mask value 1).
inline ConfusionCounts confusion(const MaskVector& predicted, const MaskVector& truth) {
    if (predicted.w.size() != truth.w.size())
        throw std::invalid_argument("confusion: length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.w.size(); ++i) {
        const double p = predicted.w[i];
        const double t = truth.w[i];
        if ((p != 0.0 && p != 1.0) || (t != 0.0 && t != 1.0))
            throw std::invalid_argument("confusion: non-binary mask");
        if (p == 1.0)
            t == 1.0 ? ++c.tp : ++c.fp;
        else
            t == 1.0 ? ++c.fn : ++c.tn;
    }
    return c;
}

// Precision/recall/F1 with the 0/0 -> 0 convention throughout.
inline SegMetrics metrics(const ConfusionCounts& c) {
    SegMetrics m;
    if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
    if (m.precision + m.recall > 0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

// Macro average: unweighted mean of per-block metrics.
inline SegMetrics aggregate(const std::vector<SegMetrics>& per_block) {
    if (per_block.empty())
        throw std::invalid_argument("aggregate: empty sequence");
    SegMetrics m;
    for (const auto& b : per_block) {
        m.precision += b.precision;
        m.recall += b.recall;
        m.f1 += b.f1;
    }
    const double n = static_cast<double>(per_block.size());
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
    return m;
}

// Micro average: pool pixel counts first.
inline SegMetrics aggregate_micro(const std::vector<ConfusionCounts>& per_block) {
    if (per_block.empty())
        throw std::invalid_argument("aggregate_micro: empty sequence");
    ConfusionCounts total;
    for (const auto& c : per_block) {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
        total.tn += c.tn;
    }
    return metrics(total);
}

} // namespace msd

#endif
