#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace screenorder::tsne {

struct Vec2 {
    double x = 0;
    double y = 0;

    bool operator==(const Vec2&) const = default;
};

/// Optimizer settings for the exact 2D -> 1D t-SNE.
struct TsneParams {
    double perplexity = 30;
    double early_exaggeration = 12;
    double learning_rate = 200;
    int iterations = 1000;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch_iteration = 250;
    int exaggeration_end = 250;
    double min_prob = 1e-12;
    /// Lower clip for the per-coordinate adaptive gains.
    double min_gain = 0.01;
    /// Caps the step at 1 / (4 * exaggeration * 2 * max_i sum_j p_ij), the
    /// bound under which the attractive term cannot overshoot. Without it
    /// small inputs oscillate and lose their order in the first iterations.
    bool limit_step = true;

    /// Throws Error{Config} when an invariant is violated.
    void validate() const;
};

/// Requested perplexity capped at (n - 1) / 3, never below 1.
double effective_perplexity(double requested, std::size_t n);

enum class SearchStatus { Converged, MaxIterations, DegenerateRow };

struct PerplexitySearch {
    double beta = 1;
    /// Conditional distribution p_{j|i} over the row entries.
    std::vector<double> probabilities;
    SearchStatus status = SearchStatus::Converged;
    int iterations = 0;
};

inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr int kPerplexityMaxIterations = 200;

/// Finds the precision beta such that p_j ∝ exp(-beta * d_j) has perplexity
/// exp(H) within kPerplexityTolerance of `target`. `sq_distances` must not
/// include the self distance. A row of all-zero distances yields the uniform
/// distribution with status DegenerateRow.
PerplexitySearch perplexity_search(std::span<const double> sq_distances, double target);

/// Shannon entropy (nats) of p_j ∝ exp(-beta * d_j).
double conditional_entropy(std::span<const double> sq_distances, double beta);

/// Dense symmetric joint probabilities with a zero diagonal and unit sum.
class AffinityMatrix {
public:
    AffinityMatrix() = default;
    AffinityMatrix(std::size_t n, std::vector<double> values);

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
    std::span<const double> values() const { return values_; }

    /// Rows whose perplexity search fell back to the uniform distribution.
    std::vector<std::size_t> degenerate_rows;

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
};

/// Gaussian affinities calibrated per row to `perplexity`, symmetrized as
/// (P_cond + P_cond^T) / (2n), then floored at `min_prob` and renormalized.
AffinityMatrix pairwise_affinities(std::span<const Vec2> points, double perplexity, double min_prob = 1e-12);

/// KL(P || Q) for a 1D embedding with the Student-t kernel; Q floored at min_prob.
double kl_divergence(const AffinityMatrix& p, std::span<const double> y, double min_prob = 1e-12);

/// dKL/dy. `exaggeration` multiplies P (early exaggeration phase).
/// Throws Error{EmbeddingDiverged} on non-finite input or output.
std::vector<double> kl_gradient(const AffinityMatrix& p, std::span<const double> y, double min_prob = 1e-12,
                                double exaggeration = 1.0);

struct TsneResult {
    std::vector<double> z;
    /// KL(P || Q) against the unexaggerated P, one entry per iteration,
    /// evaluated at the embedding the iteration started from.
    std::vector<double> kl_trace;
    double final_kl = 0;
};

/// Deterministic starting embedding: projection on the first principal
/// axis (plus 1e-3 of the second to separate ties), scaled to std 1e-4.
std::vector<double> pca_initialization(std::span<const Vec2> points);

/// Full exact t-SNE run. Requires at least 3 points. The seed only drives
/// the jitter that separates duplicate points.
TsneResult run_tsne(std::span<const Vec2> points, const TsneParams& params, std::uint64_t seed);

} // namespace screenorder::tsne
