#include "screenorder/embedding.hpp"

#include "screenorder/error.hpp"
#include "screenorder/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace screenorder::tsne {

void TsneParams::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, "t-SNE " + what); };
    if (!(perplexity >= 1)) fail("perplexity must be >= 1");
    if (iterations < 1) fail("iterations must be >= 1");
    if (!(learning_rate > 0)) fail("learning rate must be > 0");
    if (!(early_exaggeration > 0)) fail("early exaggeration must be > 0");
    if (!(min_prob > 0)) fail("min_prob must be > 0");
    if (!(min_gain > 0)) fail("min_gain must be > 0");
    if (exaggeration_end < 0 || momentum_switch_iteration < 0) fail("phase boundaries must be >= 0");
}

double effective_perplexity(double requested, std::size_t n) {
    const double cap = n > 1 ? static_cast<double>(n - 1) / 3.0 : 1.0;
    return std::max(1.0, std::min(requested, cap));
}

namespace {

// Entropy and normalized probabilities of exp(-beta * (d - d_min)).
// Shifting by the minimum distance leaves the normalized distribution
// unchanged and keeps the largest term at exp(0).
double entropy_and_probs(std::span<const double> d, double d_min, double beta, std::vector<double>& probs) {
    probs.resize(d.size());
    double sum = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        probs[j] = std::exp(-beta * (d[j] - d_min));
        sum += probs[j];
    }
    double weighted = 0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        probs[j] /= sum;
        weighted += (d[j] - d_min) * probs[j];
    }
    return std::log(sum) + beta * weighted;
}

} // namespace

double conditional_entropy(std::span<const double> sq_distances, double beta) {
    std::vector<double> probs;
    const double d_min = *std::min_element(sq_distances.begin(), sq_distances.end());
    return entropy_and_probs(sq_distances, d_min, beta, probs);
}

PerplexitySearch perplexity_search(std::span<const double> sq_distances, double target) {
    if (sq_distances.empty()) {
        throw Error(ErrorKind::Config, "perplexity search needs at least one neighbor");
    }
    PerplexitySearch out;
    const double d_min = *std::min_element(sq_distances.begin(), sq_distances.end());
    const double d_max = *std::max_element(sq_distances.begin(), sq_distances.end());
    if (d_max == 0) {
        out.probabilities.assign(sq_distances.size(), 1.0 / static_cast<double>(sq_distances.size()));
        out.status = SearchStatus::DegenerateRow;
        return out;
    }

    double beta = 1;
    double beta_lo = -std::numeric_limits<double>::infinity();
    double beta_hi = std::numeric_limits<double>::infinity();
    out.status = SearchStatus::MaxIterations;
    for (int it = 0; it < kPerplexityMaxIterations; ++it) {
        out.iterations = it + 1;
        const double entropy = entropy_and_probs(sq_distances, d_min, beta, out.probabilities);
        const double perplexity = std::exp(entropy);
        if (std::abs(perplexity - target) < kPerplexityTolerance) {
            out.status = SearchStatus::Converged;
            break;
        }
        if (perplexity > target) {
            // Too flat: sharpen.
            beta_lo = beta;
            beta = std::isinf(beta_hi) ? beta * 2 : (beta + beta_hi) / 2;
        } else {
            beta_hi = beta;
            beta = std::isinf(beta_lo) ? beta / 2 : (beta + beta_lo) / 2;
        }
    }
    if (out.status == SearchStatus::MaxIterations) {
        // Report the distribution that belongs to the returned beta.
        entropy_and_probs(sq_distances, d_min, beta, out.probabilities);
    }
    out.beta = beta;
    return out;
}

AffinityMatrix::AffinityMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    if (values_.size() != n_ * n_) {
        throw Error(ErrorKind::Config, "affinity matrix needs n*n values");
    }
}

namespace {

// Raise entries below the floor to the floor and rescale the rest so the
// total stays 1. Repeats until no rescaled entry drops under the floor.
void floor_and_normalize(std::vector<double>& p, std::size_t n, double floor) {
    std::vector<char> pinned(p.size(), 0);
    for (;;) {
        double free_sum = 0;
        std::size_t pinned_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const std::size_t k = i * n + j;
                if (pinned[k]) {
                    ++pinned_count;
                } else {
                    free_sum += p[k];
                }
            }
        }
        const double target = 1.0 - static_cast<double>(pinned_count) * floor;
        const double scale = free_sum > 0 ? target / free_sum : 0;
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t k = i * n + j;
                if (i == j) {
                    p[k] = 0;
                    continue;
                }
                if (pinned[k]) {
                    p[k] = floor;
                    continue;
                }
                p[k] *= scale;
                if (p[k] < floor) {
                    pinned[k] = 1;
                    changed = true;
                }
            }
        }
        if (!changed) {
            break;
        }
    }
}

} // namespace

AffinityMatrix pairwise_affinities(std::span<const Vec2> points, double perplexity, double min_prob) {
    const std::size_t n = points.size();
    if (n < 2) {
        throw Error(ErrorKind::Config, "pairwise affinities need at least 2 points");
    }
    std::vector<double> conditional(n * n, 0.0);
    std::vector<double> row(n - 1);
    std::vector<std::size_t> degenerate;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = points[i].x - points[j].x;
            const double dy = points[i].y - points[j].y;
            row[k++] = dx * dx + dy * dy;
        }
        PerplexitySearch search = perplexity_search(row, perplexity);
        if (search.status == SearchStatus::DegenerateRow) {
            degenerate.push_back(i);
        }
        k = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            conditional[i * n + j] = search.probabilities[k++];
        }
    }

    std::vector<double> joint(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (conditional[i * n + j] + conditional[j * n + i]) / denom;
            joint[i * n + j] = v;
            joint[j * n + i] = v;
        }
    }
    floor_and_normalize(joint, n, min_prob);
    AffinityMatrix p(n, std::move(joint));
    p.degenerate_rows = std::move(degenerate);
    return p;
}

namespace {

void require_finite(std::span<const double> y, const char* what) {
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::EmbeddingDiverged, std::string("non-finite value in ") + what);
        }
    }
}

// Student-t kernel w_ij = 1 / (1 + (y_i - y_j)^2) and its off-diagonal sum.
double student_kernel(std::span<const double> y, std::vector<double>& w) {
    const std::size_t n = y.size();
    w.assign(n * n, 0.0);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = y[i] - y[j];
            const double v = 1.0 / (1.0 + d * d);
            w[i * n + j] = v;
            w[j * n + i] = v;
            sum += 2 * v;
        }
    }
    return sum;
}

double kl_from_kernel(const AffinityMatrix& p, std::span<const double> w, double w_sum, double min_prob) {
    const std::size_t n = p.size();
    double kl = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double pij = p(i, j);
            if (pij <= 0) continue;
            const double qij = std::max(w[i * n + j] / w_sum, min_prob);
            kl += pij * std::log(std::max(pij, min_prob) / qij);
        }
    }
    return kl;
}

void gradient_from_kernel(const AffinityMatrix& p, std::span<const double> y, std::span<const double> w,
                          double w_sum, double min_prob, double exaggeration, std::span<double> grad) {
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        double g = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double wij = w[i * n + j];
            const double qij = std::max(wij / w_sum, min_prob);
            g += (exaggeration * p(i, j) - qij) * wij * (y[i] - y[j]);
        }
        grad[i] = 4.0 * g;
    }
}

void check_shapes(const AffinityMatrix& p, std::span<const double> y) {
    if (p.size() != y.size()) {
        throw Error(ErrorKind::Config, "embedding length does not match the affinity matrix");
    }
}

} // namespace

double kl_divergence(const AffinityMatrix& p, std::span<const double> y, double min_prob) {
    check_shapes(p, y);
    require_finite(y, "embedding");
    std::vector<double> w;
    const double w_sum = student_kernel(y, w);
    return kl_from_kernel(p, w, w_sum, min_prob);
}

std::vector<double> kl_gradient(const AffinityMatrix& p, std::span<const double> y, double min_prob,
                                double exaggeration) {
    check_shapes(p, y);
    require_finite(y, "embedding");
    std::vector<double> w;
    const double w_sum = student_kernel(y, w);
    std::vector<double> grad(y.size(), 0.0);
    if (y.size() >= 2) {
        gradient_from_kernel(p, y, w, w_sum, min_prob, exaggeration, grad);
    }
    require_finite(grad, "gradient");
    return grad;
}

std::vector<double> pca_initialization(std::span<const Vec2> points) {
    const std::size_t n = points.size();
    std::vector<double> z(n, 0.0);
    if (n == 0) {
        return z;
    }
    double mx = 0, my = 0;
    for (const Vec2& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (const Vec2& p : points) {
        const double dx = p.x - mx, dy = p.y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }

    // Principal axis of the 2x2 covariance [[sxx, sxy], [sxy, syy]].
    double vx = 1, vy = 0;
    const double trace = sxx + syy;
    const double gap = std::hypot(sxx - syy, 2 * sxy);
    if (gap > 1e-12 * std::max(trace, 1e-300)) {
        const double lambda = (trace + gap) / 2;
        if (std::abs(sxy) > 0) {
            vx = lambda - syy;
            vy = sxy;
        } else if (syy > sxx) {
            vx = 0;
            vy = 1;
        }
        const double norm = std::hypot(vx, vy);
        vx /= norm;
        vy /= norm;
    }
    // Fix the eigenvector sign: dominant component positive.
    if ((std::abs(vx) >= std::abs(vy) && vx < 0) || (std::abs(vy) > std::abs(vx) && vy < 0)) {
        vx = -vx;
        vy = -vy;
    }
    const double ux = -vy, uy = vx;

    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = points[i].x - mx, dy = points[i].y - my;
        z[i] = (dx * vx + dy * vy) + 1e-3 * (dx * ux + dy * uy);
        mean += z[i];
    }
    mean /= static_cast<double>(n);
    double var = 0;
    for (double& v : z) {
        v -= mean;
        var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (sd > 0) {
        for (double& v : z) {
            v *= 1e-4 / sd;
        }
    }
    return z;
}

namespace {

std::vector<Vec2> jitter_duplicates(std::span<const Vec2> points, std::uint64_t seed) {
    std::vector<Vec2> out(points.begin(), points.end());
    Rng rng(derive_seed(seed, "tsne-jitter"));
    for (std::size_t i = 1; i < out.size(); ++i) {
        bool duplicate = false;
        for (std::size_t j = 0; j < i && !duplicate; ++j) {
            duplicate = out[i] == out[j];
        }
        if (duplicate) {
            const double angle = 2 * std::numbers::pi * uniform_unit(rng);
            out[i].x += 1e-3 * std::cos(angle);
            out[i].y += 1e-3 * std::sin(angle);
        }
    }
    return out;
}

int sign(double v) { return (v > 0) - (v < 0); }

} // namespace

TsneResult run_tsne(std::span<const Vec2> points, const TsneParams& params, std::uint64_t seed) {
    params.validate();
    const std::size_t n = points.size();
    if (n < 3) {
        throw Error(ErrorKind::Config, "t-SNE needs at least 3 points");
    }
    for (const Vec2& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorKind::EmbeddingDiverged, "non-finite input point");
        }
    }

    const std::vector<Vec2> input = jitter_duplicates(points, seed);
    const AffinityMatrix p = pairwise_affinities(input, effective_perplexity(params.perplexity, n), params.min_prob);

    TsneResult result;
    std::vector<double>& y = result.z;
    y = pca_initialization(input);
    result.kl_trace.reserve(static_cast<std::size_t>(params.iterations));

    double max_row = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < n; ++j) row += p(i, j);
        max_row = std::max(max_row, row);
    }
    auto step_for = [&](double exaggeration) {
        return params.limit_step ? std::min(params.learning_rate, 1.0 / (8.0 * exaggeration * max_row))
                                 : params.learning_rate;
    };

    std::vector<double> update(n, 0.0);
    std::vector<double> gains(n, 1.0);
    std::vector<double> grad(n, 0.0);
    std::vector<double> w;

    for (int it = 0; it < params.iterations; ++it) {
        const double exaggeration = it < params.exaggeration_end ? params.early_exaggeration : 1.0;
        const double momentum = it < params.momentum_switch_iteration ? params.momentum_initial : params.momentum_final;
        const double step = step_for(exaggeration);

        const double w_sum = student_kernel(y, w);
        result.kl_trace.push_back(kl_from_kernel(p, w, w_sum, params.min_prob));
        gradient_from_kernel(p, y, w, w_sum, params.min_prob, exaggeration, grad);

        for (std::size_t i = 0; i < n; ++i) {
            // Gains grow where the gradient flips sign against the running update.
            if (sign(grad[i]) != sign(update[i])) {
                gains[i] += 0.2;
            } else {
                gains[i] *= 0.8;
            }
            gains[i] = std::max(gains[i], params.min_gain);
            update[i] = momentum * update[i] - step * gains[i] * grad[i];
            y[i] += update[i];
        }

        double mean = 0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(n);
        for (double& v : y) {
            v -= mean;
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::EmbeddingDiverged, "non-finite embedding at iteration " + std::to_string(it));
            }
        }
    }
    result.final_kl = kl_divergence(p, y, params.min_prob);
    return result;
}

} // namespace screenorder::tsne
