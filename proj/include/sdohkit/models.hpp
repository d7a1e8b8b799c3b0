#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdohkit/error.hpp"
#include "sdohkit/features.hpp"
#include "sdohkit/parallel.hpp"
#include "sdohkit/rng.hpp"

namespace sdohkit::models {

// ---------------------------------------------------------------------------
// Complete numeric dataset (post-imputation)
// ---------------------------------------------------------------------------

struct Dataset {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return columns.size(); }
};

inline Dataset from_feature_matrix(const features::FeatureMatrix& matrix) {
    Dataset out;
    out.columns = matrix.column_names;
    out.rows.reserve(matrix.n_rows());
    for (const auto& row : matrix.rows) {
        std::vector<double> r;
        r.reserve(row.size());
        for (const auto& cell : row) {
            if (!cell) throw Error(ErrorKind::Input, "dataset requires complete matrix");
            r.push_back(*cell);
        }
        out.rows.push_back(std::move(r));
    }
    return out;
}

inline Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.columns = data.columns;
    for (const std::size_t i : indices) out.rows.push_back(data.rows.at(i));
    return out;
}

// ---------------------------------------------------------------------------
// Model specs
// ---------------------------------------------------------------------------

enum class ModelKind { Ridge, Lasso, RandomForest, GradientBoosting };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Ridge: return "ridge";
        case ModelKind::Lasso: return "lasso";
        case ModelKind::RandomForest: return "rf";
        case ModelKind::GradientBoosting: return "gbt";
    }
    return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "ridge") return ModelKind::Ridge;
    if (s == "lasso") return ModelKind::Lasso;
    if (s == "rf" || s == "random_forest") return ModelKind::RandomForest;
    if (s == "gbt" || s == "xgb" || s == "gradient_boosting") return ModelKind::GradientBoosting;
    throw Error(ErrorKind::Config, "unknown model kind: " + s);
}

struct ModelSpec {
    ModelKind kind = ModelKind::Ridge;
    double lambda = 1.0;        // ridge/lasso regularization strength
    int n_trees = 100;          // forest
    int max_depth = 0;          // trees; 0 = unbounded
    int min_samples_leaf = 1;   // trees
    int features_per_split = 0; // forest; 0 = all features
    int n_rounds = 100;         // boosting
    double learning_rate = 0.1; // boosting, in (0, 1]
    std::uint64_t seed = 0;

    void validate() const {
        if (lambda < 0) throw Error(ErrorKind::Config, "lambda must be >= 0");
        if (n_trees < 1 || min_samples_leaf < 1)
            throw Error(ErrorKind::Config, "tree counts must be >= 1");
        if (max_depth < 0 || features_per_split < 0 || n_rounds < 0)
            throw Error(ErrorKind::Config, "negative hyperparameter");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw Error(ErrorKind::Config, "learning_rate must lie in (0, 1]");
    }

    std::string describe() const {
        switch (kind) {
            case ModelKind::Ridge:
            case ModelKind::Lasso:
                return std::string(model_kind_name(kind)) + "(lambda=" + format_fixed(lambda, 4) +
                       ")";
            case ModelKind::RandomForest:
                return "rf(trees=" + std::to_string(n_trees) +
                       ",depth=" + std::to_string(max_depth) +
                       ",fps=" + std::to_string(features_per_split) + ")";
            case ModelKind::GradientBoosting:
                return "gbt(rounds=" + std::to_string(n_rounds) +
                       ",lr=" + format_fixed(learning_rate, 2) +
                       ",depth=" + std::to_string(max_depth) + ")";
        }
        return "?";
    }
};

// ---------------------------------------------------------------------------
// Regression trees
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
    // split statistics, kept for impurity importance
    double sse = 0.0;
    int count = 0;

    bool leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const std::vector<double>& row) const {
        int at = 0;
        while (!nodes[static_cast<std::size_t>(at)].leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(at)];
            at = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(at)].value;
    }
};

struct TreeParams {
    int max_depth = 0;  // 0 = unbounded
    int min_samples_leaf = 1;
    int features_per_split = 0;  // 0 = all
};

namespace tree_detail {

struct BestSplit {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double cost = std::numeric_limits<double>::infinity();
};

// Greedy variance-reduction split: candidates are midpoints between
// consecutive distinct sorted values; minimal weighted child SSE wins, exact
// ties to the smallest (feature, threshold).
inline BestSplit best_split(const std::vector<std::vector<double>>& X,
                            const std::vector<double>& y,
                            const std::vector<std::size_t>& rows,
                            const std::vector<std::size_t>& feature_subset,
                            int min_samples_leaf) {
    BestSplit best;
    const std::size_t n = rows.size();
    std::vector<std::pair<double, double>> xy(n);  // (x, y)

    for (const std::size_t j : feature_subset) {
        for (std::size_t i = 0; i < n; ++i)
            xy[i] = {X[rows[i]][j], y[rows[i]]};
        std::sort(xy.begin(), xy.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double total_sum = 0, total_sq = 0;
        for (const auto& [x, yv] : xy) {
            total_sum += yv;
            total_sq += yv * yv;
        }

        double left_sum = 0, left_sq = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += xy[i].second;
            left_sq += xy[i].second * xy[i].second;
            if (xy[i].first == xy[i + 1].first) continue;  // split only between distinct values

            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            if (n_left < static_cast<std::size_t>(min_samples_leaf) ||
                n_right < static_cast<std::size_t>(min_samples_leaf))
                continue;

            const double right_sum = total_sum - left_sum;
            const double right_sq = total_sq - left_sq;
            const double cost =
                (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                (right_sq - right_sum * right_sum / static_cast<double>(n_right));

            double threshold = xy[i].first + (xy[i + 1].first - xy[i].first) / 2.0;
            if (threshold >= xy[i + 1].first) threshold = xy[i].first;  // midpoint rounded up

            if (cost < best.cost ||
                (cost == best.cost &&
                 std::make_pair(j, threshold) < std::make_pair(best.feature, best.threshold))) {
                best.found = true;
                best.cost = cost;
                best.feature = j;
                best.threshold = threshold;
            }
        }
    }
    return best;
}

// Sample `count` distinct feature indices, returned ascending.
inline std::vector<std::size_t> sample_features(std::size_t p, int count, Rng& rng) {
    std::vector<std::size_t> all(p);
    for (std::size_t j = 0; j < p; ++j) all[j] = j;
    if (count <= 0 || static_cast<std::size_t>(count) >= p) return all;
    for (int i = 0; i < count; ++i) {
        const std::size_t j = static_cast<std::size_t>(i) +
                              rng.index(p - static_cast<std::size_t>(i));
        std::swap(all[static_cast<std::size_t>(i)], all[j]);
    }
    all.resize(static_cast<std::size_t>(count));
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace tree_detail

inline Tree fit_tree(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                     const std::vector<std::size_t>& rows, const TreeParams& params, Rng& rng) {
    Tree tree;
    const std::size_t p = X.empty() ? 0 : X[0].size();

    struct Work {
        std::vector<std::size_t> rows;
        int depth;
        int node_index;
    };
    std::vector<Work> stack;

    auto make_node = [&tree](const std::vector<std::size_t>& rows,
                             const std::vector<double>& yv) {
        TreeNode node;
        double sum = 0, sq = 0;
        for (const std::size_t i : rows) {
            sum += yv[i];
            sq += yv[i] * yv[i];
        }
        node.count = static_cast<int>(rows.size());
        node.value = sum / static_cast<double>(rows.size());
        node.sse = std::max(0.0, sq - sum * sum / static_cast<double>(rows.size()));
        tree.nodes.push_back(node);
        return static_cast<int>(tree.nodes.size() - 1);
    };

    stack.push_back({rows, 0, make_node(rows, y)});
    while (!stack.empty()) {
        Work work = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = tree.nodes[static_cast<std::size_t>(work.node_index)];

        const std::size_t n = work.rows.size();
        const bool depth_capped = params.max_depth > 0 && work.depth >= params.max_depth;
        if (n < 2 || n < 2 * static_cast<std::size_t>(params.min_samples_leaf) || depth_capped)
            continue;
        if (node.sse <= 0.0) continue;  // constant target in this node

        const auto subset = tree_detail::sample_features(p, params.features_per_split, rng);
        const auto split =
            tree_detail::best_split(X, y, work.rows, subset, params.min_samples_leaf);
        if (!split.found) continue;

        std::vector<std::size_t> left_rows, right_rows;
        for (const std::size_t i : work.rows) {
            if (X[i][split.feature] <= split.threshold)
                left_rows.push_back(i);
            else
                right_rows.push_back(i);
        }
        if (left_rows.empty() || right_rows.empty()) continue;

        const int left_index = make_node(left_rows, y);
        const int right_index = make_node(right_rows, y);
        // vector may have reallocated; refetch
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(work.node_index)];
        parent.feature = static_cast<int>(split.feature);
        parent.threshold = split.threshold;
        parent.left = left_index;
        parent.right = right_index;

        stack.push_back({std::move(right_rows), work.depth + 1, right_index});
        stack.push_back({std::move(left_rows), work.depth + 1, left_index});
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Fitted models
// ---------------------------------------------------------------------------

struct FittedModel {
    ModelSpec spec;
    std::vector<std::string> columns;
    // linear kinds
    std::vector<double> coefficients;
    double intercept = 0.0;
    bool converged = true;
    bool min_norm_fallback = false;
    // tree kinds
    std::vector<Tree> trees;
    double base_prediction = 0.0;  // boosting F0
};

namespace linear_detail {

struct Centered {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd x_mean;
    double y_mean = 0.0;
};

inline Centered center(const Dataset& data, const std::vector<double>& y) {
    const std::size_t n = data.n_rows();
    const std::size_t p = data.n_cols();
    if (n < 2) throw Error(ErrorKind::Input, "need at least 2 rows");
    if (y.size() != n) throw Error(ErrorKind::Input, "target length mismatch");
    Centered c;
    c.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    c.y.resize(static_cast<Eigen::Index>(n));
    c.x_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
        c.y(static_cast<Eigen::Index>(i)) = y[i];
        for (std::size_t j = 0; j < p; ++j)
            c.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data.rows[i][j];
    }
    c.x_mean = c.X.colwise().mean();
    c.y_mean = c.y.mean();
    c.X.rowwise() -= c.x_mean.transpose();
    c.y.array() -= c.y_mean;
    return c;
}

}  // namespace linear_detail

// Ridge: minimizes ||y - X b - b0||^2 + lambda ||b||^2 with an unpenalized
// intercept, via normal equations on centered data. At lambda = 0 a
// rank-deficient system falls back to the smallest-norm least-squares
// solution (flagged in diagnostics).
inline FittedModel fit_ridge(const Dataset& data, const std::vector<double>& y, double lambda) {
    if (lambda < 0) throw Error(ErrorKind::Config, "lambda must be >= 0");
    const auto c = linear_detail::center(data, y);
    const auto p = static_cast<Eigen::Index>(data.n_cols());

    FittedModel model;
    model.spec.kind = ModelKind::Ridge;
    model.spec.lambda = lambda;
    model.columns = data.columns;

    Eigen::VectorXd beta;
    if (lambda > 0) {
        const Eigen::MatrixXd A =
            c.X.transpose() * c.X + lambda * Eigen::MatrixXd::Identity(p, p);
        beta = A.ldlt().solve(c.X.transpose() * c.y);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(c.X);
        beta = cod.solve(c.y);
        model.min_norm_fallback = cod.rank() < p;
    }
    model.coefficients.assign(beta.data(), beta.data() + beta.size());
    model.intercept = c.y_mean - c.x_mean.dot(beta);
    return model;
}

// Lasso: minimizes (1/2n) ||y - X b - b0||^2 + lambda ||b||_1 by cyclic
// coordinate descent with soft-thresholding; intercept unpenalized.
// Convergence: max coefficient change < 1e-8, capped at 10,000 sweeps.
inline FittedModel fit_lasso(const Dataset& data, const std::vector<double>& y, double lambda) {
    if (lambda < 0) throw Error(ErrorKind::Config, "lambda must be >= 0");
    const auto c = linear_detail::center(data, y);
    const std::size_t n = data.n_rows();
    const std::size_t p = data.n_cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> beta(p, 0.0);
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t j = 0; j < p; ++j)
        col_sq[j] = inv_n * c.X.col(static_cast<Eigen::Index>(j)).squaredNorm();

    Eigen::VectorXd residual = c.y;  // y_c - X_c beta, with beta = 0
    bool converged = false;
    for (int sweep = 0; sweep < 10000 && !converged; ++sweep) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] <= 0.0) continue;  // constant column stays at 0
            const auto col = c.X.col(static_cast<Eigen::Index>(j));
            const double rho = inv_n * col.dot(residual) + col_sq[j] * beta[j];
            const double soft =
                rho > lambda ? rho - lambda : (rho < -lambda ? rho + lambda : 0.0);
            const double updated = soft / col_sq[j];
            const double change = updated - beta[j];
            if (change != 0.0) {
                residual -= change * col;
                beta[j] = updated;
            }
            max_change = std::max(max_change, std::abs(change));
        }
        converged = max_change < 1e-8;
    }

    FittedModel model;
    model.spec.kind = ModelKind::Lasso;
    model.spec.lambda = lambda;
    model.columns = data.columns;
    model.coefficients = beta;
    model.converged = converged;
    double dot = 0;
    for (std::size_t j = 0; j < p; ++j) dot += c.x_mean(static_cast<Eigen::Index>(j)) * beta[j];
    model.intercept = c.y_mean - dot;
    return model;
}

inline FittedModel fit_random_forest(const Dataset& data, const std::vector<double>& y,
                                     ModelSpec spec, int parallel = 1) {
    spec.kind = ModelKind::RandomForest;
    spec.validate();
    const std::size_t n = data.n_rows();
    if (n < 1 || y.size() != n) throw Error(ErrorKind::Input, "bad training shape");

    FittedModel model;
    model.spec = spec;
    model.columns = data.columns;
    model.trees.resize(static_cast<std::size_t>(spec.n_trees));

    const TreeParams params{spec.max_depth, spec.min_samples_leaf, spec.features_per_split};
    parallel_for(static_cast<std::size_t>(spec.n_trees), parallel, [&](std::size_t t) {
        Rng rng = substream(spec.seed, "rf.tree", t);
        std::vector<std::size_t> bootstrap(n);
        for (std::size_t i = 0; i < n; ++i) bootstrap[i] = rng.index(n);
        model.trees[t] = fit_tree(data.rows, y, bootstrap, params, rng);
    });
    return model;
}

// Squared-loss gradient boosting: F0 = mean(y); each round fits a
// depth-bounded tree to the residuals and steps by learning_rate.
inline FittedModel fit_gradient_boosting(const Dataset& data, const std::vector<double>& y,
                                         ModelSpec spec) {
    spec.kind = ModelKind::GradientBoosting;
    spec.validate();
    const std::size_t n = data.n_rows();
    if (n < 1 || y.size() != n) throw Error(ErrorKind::Input, "bad training shape");

    FittedModel model;
    model.spec = spec;
    model.columns = data.columns;

    double mean = 0;
    for (const double v : y) mean += v;
    mean /= static_cast<double>(n);
    model.base_prediction = mean;

    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - mean;

    std::vector<std::size_t> all_rows(n);
    for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;

    const TreeParams params{spec.max_depth, spec.min_samples_leaf, 0};
    for (int round = 0; round < spec.n_rounds; ++round) {
        Rng rng = substream(spec.seed, "gbt.round", static_cast<std::uint64_t>(round));
        Tree tree = fit_tree(data.rows, residual, all_rows, params, rng);
        for (std::size_t i = 0; i < n; ++i)
            residual[i] -= spec.learning_rate * tree.predict_row(data.rows[i]);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline FittedModel fit_model(const Dataset& data, const std::vector<double>& y,
                             const ModelSpec& spec, int parallel = 1) {
    switch (spec.kind) {
        case ModelKind::Ridge: return fit_ridge(data, y, spec.lambda);
        case ModelKind::Lasso: return fit_lasso(data, y, spec.lambda);
        case ModelKind::RandomForest: return fit_random_forest(data, y, spec, parallel);
        case ModelKind::GradientBoosting: return fit_gradient_boosting(data, y, spec);
    }
    throw Error(ErrorKind::Config, "unknown model kind");
}

// ---------------------------------------------------------------------------
// Prediction (schema is name-keyed; column order is irrelevant)
// ---------------------------------------------------------------------------

inline std::vector<double> predict(const FittedModel& model, const Dataset& data) {
    std::vector<std::size_t> source(model.columns.size());
    {
        std::vector<std::string> missing, extra;
        for (std::size_t j = 0; j < model.columns.size(); ++j) {
            const auto it =
                std::find(data.columns.begin(), data.columns.end(), model.columns[j]);
            if (it == data.columns.end())
                missing.push_back(model.columns[j]);
            else
                source[j] = static_cast<std::size_t>(it - data.columns.begin());
        }
        for (const auto& c : data.columns)
            if (std::find(model.columns.begin(), model.columns.end(), c) == model.columns.end())
                extra.push_back(c);
        if (!missing.empty() || !extra.empty()) {
            std::string msg = "schema mismatch;";
            for (const auto& c : missing) msg += " missing:" + c;
            for (const auto& c : extra) msg += " extra:" + c;
            throw Error(ErrorKind::Prediction, msg);
        }
    }

    std::vector<double> out;
    out.reserve(data.n_rows());
    std::vector<double> row(model.columns.size());
    for (const auto& src : data.rows) {
        for (std::size_t j = 0; j < source.size(); ++j) row[j] = src[source[j]];
        double value = 0;
        switch (model.spec.kind) {
            case ModelKind::Ridge:
            case ModelKind::Lasso: {
                value = model.intercept;
                for (std::size_t j = 0; j < row.size(); ++j)
                    value += model.coefficients[j] * row[j];
                break;
            }
            case ModelKind::RandomForest: {
                double sum = 0;
                for (const auto& tree : model.trees) sum += tree.predict_row(row);
                value = sum / static_cast<double>(model.trees.size());
                break;
            }
            case ModelKind::GradientBoosting: {
                value = model.base_prediction;
                for (const auto& tree : model.trees)
                    value += model.spec.learning_rate * tree.predict_row(row);
                break;
            }
        }
        out.push_back(value);
    }
    return out;
}

// ---------------------------------------------------------------------------
// R^2
// ---------------------------------------------------------------------------

inline double r2_score(const std::vector<double>& y, const std::vector<double>& predicted) {
    if (y.size() != predicted.size() || y.size() < 2)
        throw Error(ErrorKind::Input, "r2 needs equal lengths >= 2");
    double mean = 0;
    for (const double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double tss = 0, rss = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        tss += (y[i] - mean) * (y[i] - mean);
        rss += (y[i] - predicted[i]) * (y[i] - predicted[i]);
    }
    if (tss <= 0.0) throw Error(ErrorKind::UndefinedStat, "r2 undefined for constant target");
    return 1.0 - rss / tss;
}

// ---------------------------------------------------------------------------
// Grid-search cross-validation
// ---------------------------------------------------------------------------

struct CVResult {
    ModelSpec best_spec;
    std::vector<double> fold_r2;       // held-out R^2 per fold, best spec
    double mean_cv_r2 = 0.0;           // of the best spec
    double train_r2 = 0.0;             // refit-on-all-train model
    std::vector<double> grid_mean_r2;  // parallel to the input grid
    FittedModel model;                 // the refit best model
};

// Seeded shuffled fold assignment splitting rows as evenly as possible.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int n_folds,
                                                        std::uint64_t seed) {
    if (n_folds < 2) throw Error(ErrorKind::Config, "need at least 2 folds");
    if (n / static_cast<std::size_t>(n_folds) < 2)
        throw Error(ErrorKind::Config, "folds would have fewer than 2 rows");
    Rng rng = substream(seed, "cv.folds");
    const auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(n_folds));
    const std::size_t base = n / static_cast<std::size_t>(n_folds);
    const std::size_t rem = n % static_cast<std::size_t>(n_folds);
    std::size_t at = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::size_t size = base + (f < rem ? 1 : 0);
        folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(at),
                        perm.begin() + static_cast<std::ptrdiff_t>(at + size));
        at += size;
    }
    return folds;
}

inline CVResult grid_search_cv(const Dataset& data, const std::vector<double>& y,
                               const std::vector<ModelSpec>& grid, int n_folds,
                               std::uint64_t seed, int parallel = 1) {
    if (grid.empty()) throw Error(ErrorKind::Config, "empty hyperparameter grid");
    const auto folds = make_folds(data.n_rows(), n_folds, seed);

    CVResult result;
    result.grid_mean_r2.assign(grid.size(), 0.0);

    std::vector<std::vector<double>> fold_scores(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        grid[g].validate();
        std::vector<double> scores(folds.size(), 0.0);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            std::vector<std::size_t> train_rows;
            for (std::size_t other = 0; other < folds.size(); ++other)
                if (other != f)
                    train_rows.insert(train_rows.end(), folds[other].begin(),
                                      folds[other].end());
            const auto model = fit_model(take_rows(data, train_rows),
                                         features::take_values(y, train_rows), grid[g], parallel);
            const auto held_X = take_rows(data, folds[f]);
            const auto held_y = features::take_values(y, folds[f]);
            scores[f] = r2_score(held_y, predict(model, held_X));
        }
        double mean = 0;
        for (const double s : scores) mean += s;
        result.grid_mean_r2[g] = mean / static_cast<double>(scores.size());
        fold_scores[g] = std::move(scores);
    }

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g)
        if (result.grid_mean_r2[g] > result.grid_mean_r2[best]) best = g;  // ties keep first

    result.best_spec = grid[best];
    result.fold_r2 = fold_scores[best];
    result.mean_cv_r2 = result.grid_mean_r2[best];
    result.model = fit_model(data, y, grid[best], parallel);
    result.train_r2 = r2_score(y, predict(result.model, data));
    return result;
}

// Conventional small-data grids; tree grids follow the published setup of
// tuning only the tree models, with linear lambda ladders as an extension.
inline std::vector<ModelSpec> default_grid(ModelKind kind, std::size_t p, std::uint64_t seed) {
    std::vector<ModelSpec> grid;
    switch (kind) {
        case ModelKind::Ridge:
        case ModelKind::Lasso: {
            for (const double lambda : {0.001, 0.01, 0.1, 1.0, 10.0}) {
                ModelSpec s;
                s.kind = kind;
                s.lambda = lambda;
                s.seed = seed;
                grid.push_back(s);
            }
            break;
        }
        case ModelKind::RandomForest: {
            const int sqrt_p = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p))));
            for (const int n_trees : {100, 300})
                for (const int depth : {3, 5, 0})
                    for (const int fps : {sqrt_p, 0}) {
                        ModelSpec s;
                        s.kind = kind;
                        s.n_trees = n_trees;
                        s.max_depth = depth;
                        s.features_per_split = fps;
                        s.seed = seed;
                        grid.push_back(s);
                    }
            break;
        }
        case ModelKind::GradientBoosting: {
            for (const int rounds : {50, 200})
                for (const double lr : {0.05, 0.1})
                    for (const int depth : {2, 3}) {
                        ModelSpec s;
                        s.kind = kind;
                        s.n_rounds = rounds;
                        s.learning_rate = lr;
                        s.max_depth = depth;
                        s.seed = seed;
                        grid.push_back(s);
                    }
            break;
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Impurity (variance-reduction) feature importance
// ---------------------------------------------------------------------------

struct ImportanceReport {
    std::vector<std::string> columns;
    std::vector<double> importance;  // normalized to sum 1, or all zero
    bool all_zero = false;
};

inline ImportanceReport feature_importance(const FittedModel& model) {
    if (model.spec.kind != ModelKind::RandomForest &&
        model.spec.kind != ModelKind::GradientBoosting)
        throw Error(ErrorKind::Input, "importance requires a tree-ensemble model");

    ImportanceReport report;
    report.columns = model.columns;
    report.importance.assign(model.columns.size(), 0.0);

    for (const auto& tree : model.trees) {
        for (const auto& node : tree.nodes) {
            if (node.leaf()) continue;
            const auto& left = tree.nodes[static_cast<std::size_t>(node.left)];
            const auto& right = tree.nodes[static_cast<std::size_t>(node.right)];
            const double credit = std::max(0.0, node.sse - (left.sse + right.sse));
            report.importance[static_cast<std::size_t>(node.feature)] += credit;
        }
    }
    double total = 0;
    for (const double v : report.importance) total += v;
    if (total <= 0.0) {
        report.all_zero = true;
        return report;
    }
    for (double& v : report.importance) v /= total;
    return report;
}

// ---------------------------------------------------------------------------
// Versioned JSON serialization
// ---------------------------------------------------------------------------

inline nlohmann::json spec_to_json(const ModelSpec& spec) {
    return {{"kind", model_kind_name(spec.kind)},
            {"lambda", spec.lambda},
            {"n_trees", spec.n_trees},
            {"max_depth", spec.max_depth},
            {"min_samples_leaf", spec.min_samples_leaf},
            {"features_per_split", spec.features_per_split},
            {"n_rounds", spec.n_rounds},
            {"learning_rate", spec.learning_rate},
            {"seed", spec.seed}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    spec.lambda = j.at("lambda").get<double>();
    spec.n_trees = j.at("n_trees").get<int>();
    spec.max_depth = j.at("max_depth").get<int>();
    spec.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    spec.features_per_split = j.at("features_per_split").get<int>();
    spec.n_rounds = j.at("n_rounds").get<int>();
    spec.learning_rate = j.at("learning_rate").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
}

inline nlohmann::json model_to_json(const FittedModel& model) {
    nlohmann::json j = {{"format_version", 1},
                        {"spec", spec_to_json(model.spec)},
                        {"columns", model.columns}};
    if (model.spec.kind == ModelKind::Ridge || model.spec.kind == ModelKind::Lasso) {
        j["linear"] = {{"coefficients", model.coefficients},
                       {"intercept", model.intercept},
                       {"converged", model.converged},
                       {"min_norm_fallback", model.min_norm_fallback}};
    } else {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& tree : model.trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : tree.nodes)
                nodes.push_back({{"f", n.feature},
                                 {"t", n.threshold},
                                 {"v", n.value},
                                 {"l", n.left},
                                 {"r", n.right},
                                 {"sse", n.sse},
                                 {"n", n.count}});
            trees.push_back({{"nodes", nodes}});
        }
        j["ensemble"] = {{"base_prediction", model.base_prediction}, {"trees", trees}};
    }
    return j;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw Error(ErrorKind::Input, "unsupported model format version");
    FittedModel model;
    model.spec = spec_from_json(j.at("spec"));
    model.columns = j.at("columns").get<std::vector<std::string>>();
    if (j.contains("linear")) {
        const auto& lin = j.at("linear");
        model.coefficients = lin.at("coefficients").get<std::vector<double>>();
        model.intercept = lin.at("intercept").get<double>();
        model.converged = lin.at("converged").get<bool>();
        model.min_norm_fallback = lin.at("min_norm_fallback").get<bool>();
    } else {
        const auto& ens = j.at("ensemble");
        model.base_prediction = ens.at("base_prediction").get<double>();
        for (const auto& tj : ens.at("trees")) {
            Tree tree;
            for (const auto& nj : tj.at("nodes")) {
                TreeNode n;
                n.feature = nj.at("f").get<int>();
                n.threshold = nj.at("t").get<double>();
                n.value = nj.at("v").get<double>();
                n.left = nj.at("l").get<int>();
                n.right = nj.at("r").get<int>();
                n.sse = nj.at("sse").get<double>();
                n.count = nj.at("n").get<int>();
                tree.nodes.push_back(n);
            }
            model.trees.push_back(std::move(tree));
        }
    }
    return model;
}

}  // namespace sdohkit::models
