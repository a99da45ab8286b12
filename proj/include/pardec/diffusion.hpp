#pragma once

#include "pardec/core.hpp"
#include "pardec/rng.hpp"

#include <span>
#include <vector>

namespace pardec {

// Masking ratio t in [0, 1].
class NoiseLevel {
  public:
    explicit NoiseLevel(double t);
    double value() const { return t_; }

  private:
    double t_;
};

// Row-major categorical distributions, one row of vocab.size() per position.
struct PositionDistributions {
    int                 rows = 0;
    int                 cols = 0;
    std::vector<double> probs;

    std::span<const double> row(int i) const { return {probs.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
    std::span<double>       row(int i) { return {probs.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
};

// Forward corruption: each position independently becomes mask_id with
// probability t.
Tokens forward_mask(std::span<const TokenId> x0, NoiseLevel t, const Vocabulary & vocab, Rng & rng);

// Probability that a masked position stays masked going from level t to s < t.
double reverse_keep_mask_prob(NoiseLevel s, NoiseLevel t);

// One reverse transition t -> s. Unmasked positions are copied; masked ones stay
// masked with probability s/t and otherwise draw from their row of dist with the
// mask_id entry zeroed and the row renormalized.
Tokens sample_reverse_step(std::span<const TokenId> xt, NoiseLevel s, NoiseLevel t,
                           const PositionDistributions & dist, const Vocabulary & vocab, Rng & rng);

}  // namespace pardec
