#include "splatprune/sensitivity.hpp"

#include "splatprune/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>

namespace splat {

ParamSet scorer_param_set(Scorer s) {
    switch (s) {
    case Scorer::MeanScaleRot: return ParamSet::MeanScaleRot;
    case Scorer::Rgb: return ParamSet::Rgb;
    default: return ParamSet::MeanScale;
    }
}

std::string scorer_name(Scorer s) {
    switch (s) {
    case Scorer::MeanScale: return "mean-scale";
    case Scorer::MeanScaleRot: return "mean-scale-rot";
    case Scorer::Rgb: return "rgb";
    case Scorer::Random: return "random";
    case Scorer::Opacity: return "opacity";
    case Scorer::VisVolume: return "vis-volume";
    }
    return "mean-scale";
}

Scorer scorer_from_name(const std::string& name) {
    if (name == "mean-scale") return Scorer::MeanScale;
    if (name == "mean-scale-rot") return Scorer::MeanScaleRot;
    if (name == "rgb") return Scorer::Rgb;
    if (name == "random") return Scorer::Random;
    if (name == "opacity") return Scorer::Opacity;
    if (name == "vis-volume") return Scorer::VisVolume;
    throw InvalidParameterError("unknown scorer '" + name + "'");
}

namespace {

struct ViewAccumulator {
    std::vector<Eigen::MatrixXd> blocks;
    std::vector<long> hits;

    void init(std::size_t n, int dim) {
        blocks.assign(n, Eigen::MatrixXd::Zero(dim, dim));
        hits.assign(n, 0);
    }
};

void accumulate_view(const GaussianCloud& cloud, const CameraView& view, ParamSet set, int divisor,
                     const RenderConfig& cfg, ViewAccumulator& acc) {
    const int dim = param_dim(set);
    render_with_param_jacobians(
        cloud, view, divisor, set,
        [&](const PixelJacobian& pj) {
            const auto jac = pj.jac.leftCols(dim);
            acc.blocks[pj.gaussian_index].noalias() += jac.transpose() * jac;
            ++acc.hits[pj.gaussian_index];
        },
        cfg);
}

} // namespace

std::vector<FisherBlock> accumulate_fisher(const GaussianCloud& cloud,
                                           const std::vector<CameraView>& views, ParamSet set,
                                           const AccumulateOptions& opts) {
    const int dim = param_dim(set);
    std::vector<FisherBlock> out(cloud.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].matrix = Eigen::MatrixXd::Zero(dim, dim);
        out[i].gaussian_index = static_cast<int>(i);
    }

    unsigned n_threads = 1;
    if (!opts.deterministic) {
        n_threads = opts.threads > 0 ? static_cast<unsigned>(opts.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
    }
    n_threads = std::min<unsigned>(n_threads, std::max<std::size_t>(views.size(), 1));

    // Per-view partial sums merged in view order: bit-identical results for
    // any thread count, and additive across view subsets.
    std::vector<ViewAccumulator> partials(n_threads);
    for (std::size_t base = 0; base < views.size(); base += n_threads) {
        const std::size_t batch = std::min<std::size_t>(n_threads, views.size() - base);
        if (batch == 1) {
            partials[0].init(cloud.size(), dim);
            accumulate_view(cloud, views[base], set, opts.divisor, opts.render, partials[0]);
        } else {
            std::vector<std::thread> workers;
            workers.reserve(batch);
            for (std::size_t k = 0; k < batch; ++k) {
                partials[k].init(cloud.size(), dim);
                workers.emplace_back([&, k] {
                    accumulate_view(cloud, views[base + k], set, opts.divisor, opts.render,
                                    partials[k]);
                });
            }
            for (auto& w : workers) {
                w.join();
            }
        }
        for (std::size_t k = 0; k < batch; ++k) {
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (partials[k].hits[i] > 0) {
                    out[i].matrix += partials[k].blocks[i];
                    out[i].hit_count += partials[k].hits[i];
                }
            }
        }
    }
    return out;
}

SensitivityScores score_log_det(const std::vector<FisherBlock>& blocks, double epsilon,
                                ParamSet set, int divisor) {
    if (!(epsilon > 0.0)) {
        throw InvalidParameterError("epsilon must be positive");
    }
    SensitivityScores out;
    switch (set) {
    case ParamSet::MeanScale: out.scorer = Scorer::MeanScale; break;
    case ParamSet::MeanScaleRot: out.scorer = Scorer::MeanScaleRot; break;
    case ParamSet::Rgb: out.scorer = Scorer::Rgb; break;
    }
    out.divisor = divisor;
    out.epsilon = epsilon;
    out.scores.resize(blocks.size());
    const double log_eps = std::log(epsilon);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const FisherBlock& b = blocks[i];
        if (!b.matrix.allFinite()) {
            throw ScoringError("non-finite Fisher block for gaussian " +
                               std::to_string(b.gaussian_index));
        }
        if (b.hit_count == 0) {
            out.scores[i] = static_cast<double>(b.matrix.rows()) * log_eps;
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b.matrix,
                                                              Eigen::EigenvaluesOnly);
        double score = 0.0;
        for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
            score += std::log(std::max(solver.eigenvalues()[k], epsilon));
        }
        out.scores[i] = score;
    }
    return out;
}

SensitivityScores score_baseline(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                                 Scorer kind, std::uint64_t seed, int divisor,
                                 const RenderConfig& cfg) {
    SensitivityScores out;
    out.scorer = kind;
    out.divisor = divisor;
    out.scores.resize(cloud.size());
    switch (kind) {
    case Scorer::Random: {
        Rng rng(seed);
        for (double& s : out.scores) {
            s = rng.uniform();
        }
        break;
    }
    case Scorer::Opacity: {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            out.scores[i] = cloud.activated_opacity(i);
        }
        break;
    }
    case Scorer::VisVolume: {
        const std::vector<long> hits = count_hits(cloud, views, divisor, cfg);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            // (det Sigma)^0.05 = exp(0.1 * sum of log-scales)
            out.scores[i] = static_cast<double>(hits[i]) * cloud.activated_opacity(i) *
                            std::exp(0.1 * cloud.log_scales[i].sum());
        }
        break;
    }
    default:
        throw InvalidParameterError("score_baseline expects a baseline scorer");
    }
    return out;
}

SensitivityScores compute_scores(const GaussianCloud& cloud, const std::vector<CameraView>& views,
                                 Scorer scorer, const AccumulateOptions& opts, std::uint64_t seed,
                                 double epsilon) {
    if (is_fisher_scorer(scorer)) {
        const auto blocks = accumulate_fisher(cloud, views, scorer_param_set(scorer), opts);
        return score_log_det(blocks, epsilon, scorer_param_set(scorer), opts.divisor);
    }
    return score_baseline(cloud, views, scorer, seed, opts.divisor, opts.render);
}

void save_scores(const std::string& path, const SensitivityScores& scores) {
    std::ofstream file(path, std::ios::trunc);
    if (!file) {
        throw IoError("cannot open " + path + " for writing");
    }
    char line[64];
    for (std::size_t i = 0; i < scores.scores.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu %.17g\n", i, scores.scores[i]);
        file << line;
    }
    if (!file.good()) {
        throw IoError("failed writing " + path);
    }
}

std::vector<double> load_scores(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw IoError("cannot open " + path);
    }
    std::vector<double> out;
    std::size_t index = 0;
    double value = 0.0;
    while (file >> index >> value) {
        if (index != out.size()) {
            throw ParseError("score file indices must be consecutive from 0");
        }
        out.push_back(value);
    }
    return out;
}

} // namespace splat
