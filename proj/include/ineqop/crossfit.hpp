#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/folds.hpp"
#include "ineqop/learners.hpp"

namespace ineqop {

// ---------------------------------------------------------------------------
// Pair blocks
// ---------------------------------------------------------------------------
//
// The pairwise estimator sums over unordered observation pairs. Pairs are
// grouped into one block per unordered fold pair (k1 <= k2); the block's
// model trains on the rows outside both folds, so its fitted values are
// independent of every pair it covers. Off-diagonal blocks therefore need
// K >= 3; diagonal blocks only need K >= 2.

struct PairBlock {
    int k1 = 0, k2 = 0;                    // fold pair, k1 <= k2
    std::vector<std::size_t> train_rows;   // complement of folds k1 and k2
};

struct PairBlocks {
    int K = 0;
    std::vector<PairBlock> blocks;  // lexicographic: (0,0),(0,1),...,(K-1,K-1)
};

inline PairBlocks make_pair_blocks(const FoldAssignment& folds) {
    folds.validate();
    PairBlocks pb;
    pb.K = folds.K;
    for (int k1 = 0; k1 < folds.K; ++k1) {
        for (int k2 = k1; k2 < folds.K; ++k2) {
            PairBlock block;
            block.k1 = k1;
            block.k2 = k2;
            block.train_rows = k1 == k2 ? folds.complement(k1) : folds.complement(k1, k2);
            if (block.train_rows.empty())
                throw ConfigError("pair blocks: block (" + std::to_string(k1 + 1) + "," +
                                  std::to_string(k2 + 1) +
                                  ") has an empty training complement; pair-block mode needs K >= 3");
            pb.blocks.push_back(std::move(block));
        }
    }
    return pb;
}

// ---------------------------------------------------------------------------
// Cross-fitted fitted values
// ---------------------------------------------------------------------------

enum class CrossFitMode { fold, pair_block };

inline const char* to_string(CrossFitMode m) {
    return m == CrossFitMode::fold ? "fold" : "pair_block";
}

inline CrossFitMode crossfit_mode_from(const std::string& s) {
    if (s == "fold") return CrossFitMode::fold;
    if (s == "pair_block") return CrossFitMode::pair_block;
    throw ConfigError("unknown cross-fit mode '" + s + "'");
}

struct CrossFitFV {
    CrossFitMode mode = CrossFitMode::fold;
    FoldAssignment folds;
    std::string learner;  // spec label, or "injected" for externally supplied values

    // fold mode: one value per row (trained on the row's fold complement)
    std::vector<double> values;

    // pair_block mode: per block, the evaluated rows (fold k1, then fold k2
    // for off-diagonal blocks) and that block's fitted values for them
    PairBlocks blocks;
    std::vector<std::vector<std::size_t>> block_rows;
    std::vector<std::vector<double>> block_values;

    std::size_t n() const { return folds.n(); }
};

inline CrossFitFV crossfit_fitted_values(const FeatureView& view, const LearnerSpec& spec,
                                         const FoldAssignment& folds, CrossFitMode mode) {
    const Dataset& d = view.data();
    if (folds.n() != d.n()) throw ConfigError("cross-fit: fold assignment does not match the dataset");
    folds.validate();

    CrossFitFV cf;
    cf.mode = mode;
    cf.folds = folds;
    cf.learner = spec.name();

    // With no circumstances the conditional mean is the unconditional mean;
    // use the full-sample weighted mean so a circumstance-free estimate is
    // exactly zero.
    if (!view.has_circumstances()) {
        const double mean = weighted_mean(d.y, d.w);
        cf.values.assign(d.n(), mean);
        if (mode == CrossFitMode::pair_block) {
            cf.blocks = make_pair_blocks(folds);
            for (const auto& block : cf.blocks.blocks) {
                std::vector<std::size_t> rows = folds.rows_of[static_cast<std::size_t>(block.k1)];
                if (block.k2 != block.k1) {
                    const auto& r2 = folds.rows_of[static_cast<std::size_t>(block.k2)];
                    rows.insert(rows.end(), r2.begin(), r2.end());
                }
                cf.block_values.emplace_back(rows.size(), mean);
                cf.block_rows.push_back(std::move(rows));
            }
        }
        return cf;
    }

    if (mode == CrossFitMode::fold) {
        cf.values = fold_fit_values(view, spec, folds);
        return cf;
    }

    cf.blocks = make_pair_blocks(folds);
    for (std::size_t b = 0; b < cf.blocks.blocks.size(); ++b) {
        const auto& block = cf.blocks.blocks[b];
        std::vector<std::size_t> rows = folds.rows_of[static_cast<std::size_t>(block.k1)];
        if (block.k2 != block.k1) {
            const auto& r2 = folds.rows_of[static_cast<std::size_t>(block.k2)];
            rows.insert(rows.end(), r2.begin(), r2.end());
        }
        LearnerSpec block_spec = spec;
        block_spec.seed = derive_seed(spec.seed, 101 + b);
        try {
            const FittedModel m = fit_model(block_spec, view, block.train_rows);
            cf.block_values.push_back(m.predict(view, rows));
        } catch (const std::exception& e) {
            throw NumericError("cross-fit block (" + std::to_string(block.k1 + 1) + "," +
                               std::to_string(block.k2 + 1) + "): " + e.what());
        }
        cf.block_rows.push_back(std::move(rows));
    }
    return cf;
}

// Wraps externally computed per-row fitted values (oracle values, stress
// fixtures) as a fold-mode CrossFitFV.
inline CrossFitFV injected_fitted_values(const Dataset& d, std::vector<double> values,
                                         int K = 2, std::uint64_t seed = 0) {
    if (values.size() != d.n()) throw DataError("injected values: length mismatch");
    for (double v : values)
        if (!std::isfinite(v)) throw DataError("injected values: non-finite entry");
    CrossFitFV cf;
    cf.mode = CrossFitMode::fold;
    cf.folds = make_folds(d.n(), K, seed);
    cf.learner = "injected";
    cf.values = std::move(values);
    return cf;
}

}  // namespace ineqop
