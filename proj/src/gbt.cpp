#include "fleetci/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace fleetci {

namespace {

constexpr double kProbClip = 1e-9;
// Splits must improve the node score by more than this fraction of the
// node's maximal attainable score (sum g^2/h); keeps roundoff from splitting.
constexpr double kMinRelativeGain = 1e-10;
constexpr double kTieTolerance = 1e-12;

struct NodeStats {
    double g = 0.0, h = 0.0, g2h = 0.0;
    std::size_t count = 0;
};

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct ScanState {
    double g = 0.0, h = 0.0;
    std::size_t count = 0;
    double last = 0.0;
};

void check_inputs(const RealMatrix& x, std::span<const double> y, std::span<const double> w, Objective objective) {
    if (x.rows() == 0) throw InputError("fit_gbt: no training rows");
    if (y.size() != x.rows() || w.size() != x.rows()) throw InputError("fit_gbt: shape mismatch");
    for (double v : x.data())
        if (!std::isfinite(v)) throw InputError("fit_gbt: non-finite feature value");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) throw InputError("fit_gbt: non-finite target");
        if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw InputError("fit_gbt: sample weights must be finite and >= 0");
        if (objective == Objective::Logistic && y[i] != 0.0 && y[i] != 1.0)
            throw InputError("fit_gbt: logistic targets must be 0 or 1");
        total += w[i];
    }
    if (!(total > 0.0)) throw InputError("fit_gbt: total sample weight must be positive");
}

class TreeGrower {
public:
    TreeGrower(const std::vector<std::vector<double>>& columns, const std::vector<std::vector<std::uint32_t>>& sorted,
               const BoostConfig& config)
        : columns_(columns), sorted_(sorted), config_(config) {}

    // node_of[i] = 0 for rows participating in this round, -1 otherwise.
    RegressionTree grow(std::span<const double> g, std::span<const double> h, std::vector<int>& node_of) const {
        RegressionTree tree;
        tree.nodes.emplace_back();
        std::vector<int> frontier{0};
        const std::size_t n_features = columns_.size();
        const std::size_t min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);

        for (int level = 0; level < config_.max_depth && !frontier.empty(); ++level) {
            std::vector<int> slot_of(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < frontier.size(); ++s) slot_of[frontier[s]] = static_cast<int>(s);

            std::vector<NodeStats> totals(frontier.size());
            for (std::size_t i = 0; i < node_of.size(); ++i) {
                const int nd = node_of[i];
                if (nd < 0 || slot_of[nd] < 0) continue;
                auto& t = totals[slot_of[nd]];
                t.g += g[i];
                t.h += h[i];
                if (h[i] > 0.0) t.g2h += g[i] * g[i] / h[i];
                ++t.count;
            }

            std::vector<SplitCandidate> best(frontier.size());
            for (std::size_t s = 0; s < frontier.size(); ++s) best[s].gain = kMinRelativeGain * totals[s].g2h;

            std::vector<ScanState> scan(frontier.size());
            for (std::size_t f = 0; f < n_features; ++f) {
                std::fill(scan.begin(), scan.end(), ScanState{});
                const auto& col = columns_[f];
                for (std::uint32_t i : sorted_[f]) {
                    const int nd = node_of[i];
                    if (nd < 0) continue;
                    const int slot = slot_of[nd];
                    if (slot < 0) continue;
                    auto& st = scan[slot];
                    const double x = col[i];
                    const auto& tot = totals[slot];
                    if (st.count >= min_leaf && tot.count - st.count >= min_leaf && x > st.last) {
                        const double hl = st.h, hr = tot.h - st.h;
                        if (hl > 0.0 && hr > 0.0) {
                            const double gl = st.g, gr = tot.g - st.g;
                            const double gain = gl * gl / hl + gr * gr / hr - tot.g * tot.g / tot.h;
                            auto& b = best[slot];
                            if (gain > b.gain + kTieTolerance * std::abs(b.gain)) {
                                double thr = 0.5 * (st.last + x);
                                if (!(thr < x)) thr = st.last;
                                b = {gain, static_cast<int>(f), thr};
                            }
                        }
                    }
                    st.g += g[i];
                    st.h += h[i];
                    ++st.count;
                    st.last = x;
                }
            }

            std::vector<int> next;
            for (std::size_t s = 0; s < frontier.size(); ++s) {
                if (best[s].feature < 0) continue;
                const int id = frontier[s];
                const int left = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                auto& node = tree.nodes[id];
                node.feature = best[s].feature;
                node.threshold = best[s].threshold;
                node.left = left;
                node.right = left + 1;
                next.push_back(left);
                next.push_back(left + 1);
            }
            if (next.empty()) break;
            for (std::size_t i = 0; i < node_of.size(); ++i) {
                const int nd = node_of[i];
                if (nd < 0) continue;
                if (slot_of[nd] < 0) continue;
                const auto& node = tree.nodes[nd];
                if (node.is_leaf()) continue;
                node_of[i] = columns_[node.feature][i] <= node.threshold ? node.left : node.right;
            }
            frontier = std::move(next);
        }

        std::vector<double> leaf_g(tree.nodes.size(), 0.0), leaf_h(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < node_of.size(); ++i) {
            const int nd = node_of[i];
            if (nd < 0) continue;
            leaf_g[nd] += g[i];
            leaf_h[nd] += h[i];
        }
        for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
            auto& node = tree.nodes[nd];
            if (!node.is_leaf()) continue;
            node.value = leaf_h[nd] > 0.0 ? -config_.learning_rate * leaf_g[nd] / leaf_h[nd] : 0.0;
        }
        return tree;
    }

private:
    const std::vector<std::vector<double>>& columns_;
    const std::vector<std::vector<std::uint32_t>>& sorted_;
    const BoostConfig& config_;
};

} // namespace

std::string to_string(Objective objective) { return objective == Objective::Logistic ? "logistic" : "squared"; }

void BoostConfig::validate() const {
    if (rounds < 0) throw InputError("rounds must be >= 0");
    if (max_depth < 1) throw InputError("max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw InputError("learning_rate must be in (0,1]");
    if (min_samples_leaf < 1) throw InputError("min_samples_leaf must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw InputError("subsample must be in (0,1]");
}

double RegressionTree::predict_row(std::span<const double> row) const {
    int nd = 0;
    while (!nodes[nd].is_leaf()) {
        const auto& node = nodes[nd];
        nd = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[nd].value;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].is_leaf()) {
            best = std::max(best, d[i]);
            continue;
        }
        d[nodes[i].left] = d[i] + 1;
        d[nodes[i].right] = d[i] + 1;
    }
    return best;
}

std::vector<double> TreeEnsemble::predict_margin(const RealMatrix& features) const {
    if (features.cols() != n_features)
        throw InputError("predict: model expects " + std::to_string(n_features) + " features, got " +
                         std::to_string(features.cols()));
    std::vector<double> out(features.rows(), base_score);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        double m = base_score;
        for (const auto& tree : trees) m += tree.predict_row(row);
        out[r] = m;
    }
    return out;
}

std::vector<double> TreeEnsemble::predict(const RealMatrix& features) const {
    auto out = predict_margin(features);
    if (objective == Objective::Logistic)
        for (double& v : out) v = sigmoid(v);
    return out;
}

TreeEnsemble fit_gbt(const RealMatrix& features, std::span<const double> targets,
                     std::span<const double> sample_weights, Objective objective, const BoostConfig& config) {
    config.validate();
    check_inputs(features, targets, sample_weights, objective);
    const std::size_t n = features.rows(), d = features.cols();

    TreeEnsemble model;
    model.objective = objective;
    model.n_features = d;
    double wy = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wy += sample_weights[i] * targets[i];
        wsum += sample_weights[i];
    }
    const double base_mean = wy / wsum;
    model.base_score = objective == Objective::Squared
                           ? base_mean
                           : logit(std::clamp(base_mean, kProbClip, 1.0 - kProbClip));
    if (config.rounds == 0 || d == 0) return model;

    std::vector<std::vector<double>> columns(d, std::vector<double>(n));
    std::vector<std::vector<std::uint32_t>> sorted(d, std::vector<std::uint32_t>(n));
    for (std::size_t f = 0; f < d; ++f) {
        for (std::size_t i = 0; i < n; ++i) columns[f][i] = features(i, f);
        std::iota(sorted[f].begin(), sorted[f].end(), 0u);
        std::stable_sort(sorted[f].begin(), sorted[f].end(),
                         [&](std::uint32_t a, std::uint32_t b) { return columns[f][a] < columns[f][b]; });
    }

    std::vector<double> margin(n, model.base_score), g(n), h(n);
    std::vector<int> node_of(n);
    std::vector<std::uint32_t> perm;
    const TreeGrower grower(columns, sorted, config);
    const auto n_sampled = std::max<std::size_t>(1, static_cast<std::size_t>(config.subsample * static_cast<double>(n)));

    for (int round = 0; round < config.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double w = sample_weights[i];
            if (objective == Objective::Squared) {
                g[i] = w * (margin[i] - targets[i]);
                h[i] = w;
            } else {
                const double p = sigmoid(margin[i]);
                g[i] = w * (p - targets[i]);
                h[i] = w * std::max(p * (1.0 - p), 1e-16);
            }
        }
        if (n_sampled < n) {
            std::fill(node_of.begin(), node_of.end(), -1);
            perm.resize(n);
            std::iota(perm.begin(), perm.end(), 0u);
            std::mt19937_64 rng(mix_seed(config.rng_seed, static_cast<std::uint64_t>(round)));
            for (std::size_t k = 0; k < n_sampled; ++k) {
                std::uniform_int_distribution<std::size_t> pick(k, n - 1);
                std::swap(perm[k], perm[pick(rng)]);
                node_of[perm[k]] = 0;
            }
        } else {
            std::fill(node_of.begin(), node_of.end(), 0);
        }

        RegressionTree tree = grower.grow(g, h, node_of);
        for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict_row(features.row(i));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double weighted_loss(const TreeEnsemble& model, const RealMatrix& features, std::span<const double> targets,
                     std::span<const double> sample_weights) {
    const auto margin = model.predict_margin(features);
    double loss = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < margin.size(); ++i) {
        double l;
        if (model.objective == Objective::Squared) {
            const double r = margin[i] - targets[i];
            l = 0.5 * r * r;
        } else {
            const double p = std::clamp(sigmoid(margin[i]), 1e-15, 1.0 - 1e-15);
            l = -(targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p));
        }
        loss += sample_weights[i] * l;
        wsum += sample_weights[i];
    }
    return loss / wsum;
}

void write_ensemble(std::ostream& out, const TreeEnsemble& model) {
    out << "fleetci-tree-ensemble 1\n";
    out << "objective " << to_string(model.objective) << '\n';
    out << "base_score " << format_real(model.base_score) << '\n';
    out << "n_features " << model.n_features << '\n';
    out << "n_trees " << model.trees.size() << '\n';
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const auto& nodes = model.trees[t].nodes;
        out << "tree " << t << ' ' << nodes.size() << '\n';
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& nd = nodes[i];
            if (nd.is_leaf())
                out << "node " << i << " leaf " << format_real(nd.value) << '\n';
            else
                out << "node " << i << " split " << nd.feature << ' ' << format_real(nd.threshold) << ' ' << nd.left
                    << ' ' << nd.right << '\n';
        }
    }
}

TreeEnsemble read_ensemble(std::istream& in) {
    auto fail = [](const std::string& what) -> TreeEnsemble { throw InputError("read_ensemble: " + what); };
    std::string line, key;
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line)) fail("unexpected end of input");
        return std::istringstream(line);
    };

    TreeEnsemble model;
    int version = 0;
    {
        auto ss = next_line();
        ss >> key >> version;
        if (key != "fleetci-tree-ensemble" || version != 1) fail("unsupported header '" + line + "'");
    }
    std::string objective;
    std::string base;
    std::size_t n_trees = 0;
    {
        auto ss = next_line();
        ss >> key >> objective;
        if (key != "objective") fail("expected objective");
        if (objective == "logistic") model.objective = Objective::Logistic;
        else if (objective == "squared") model.objective = Objective::Squared;
        else fail("unknown objective '" + objective + "'");
    }
    {
        auto ss = next_line();
        ss >> key >> base;
        if (key != "base_score") fail("expected base_score");
        model.base_score = std::stod(base);
    }
    {
        auto ss = next_line();
        ss >> key >> model.n_features;
        if (key != "n_features") fail("expected n_features");
    }
    {
        auto ss = next_line();
        ss >> key >> n_trees;
        if (key != "n_trees") fail("expected n_trees");
    }
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::size_t index = 0, n_nodes = 0;
        {
            auto ss = next_line();
            ss >> key >> index >> n_nodes;
            if (key != "tree" || index != t || n_nodes == 0) fail("bad tree header '" + line + "'");
        }
        RegressionTree tree;
        tree.nodes.resize(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            auto ss = next_line();
            std::size_t id = 0;
            std::string kind;
            ss >> key >> id >> kind;
            if (key != "node" || id != i) fail("bad node line '" + line + "'");
            auto& nd = tree.nodes[i];
            if (kind == "leaf") {
                std::string v;
                ss >> v;
                nd.value = std::stod(v);
            } else if (kind == "split") {
                std::string thr;
                ss >> nd.feature >> thr >> nd.left >> nd.right;
                nd.threshold = std::stod(thr);
                if (nd.feature < 0 || static_cast<std::size_t>(nd.feature) >= model.n_features || nd.left <= 0 ||
                    nd.right <= 0 || static_cast<std::size_t>(std::max(nd.left, nd.right)) >= n_nodes)
                    fail("invalid split node '" + line + "'");
            } else {
                fail("unknown node kind '" + kind + "'");
            }
            if (!ss) fail("malformed node line '" + line + "'");
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::vector<double> class_balance_weights(std::span<const std::uint8_t> labels) {
    std::size_t ones = 0;
    for (auto v : labels) {
        if (v > 1) throw InputError("class_balance_weights: labels must be 0 or 1");
        ones += v;
    }
    const std::size_t n = labels.size();
    if (ones == 0 || ones == n) throw DegenerateDataError("class_balance_weights: labels contain a single class");
    const double w1 = static_cast<double>(n) / (2.0 * static_cast<double>(ones));
    const double w0 = static_cast<double>(n) / (2.0 * static_cast<double>(n - ones));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = labels[i] ? w1 : w0;
    return out;
}

} // namespace fleetci
