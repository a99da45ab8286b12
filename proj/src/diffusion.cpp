#include "pardec/diffusion.hpp"

#include "pardec/errors.hpp"

#include <cmath>
#include <string>

namespace pardec {

NoiseLevel::NoiseLevel(double t) : t_(t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("noise level must lie in [0, 1]");
    }
}

Tokens forward_mask(std::span<const TokenId> x0, NoiseLevel t, const Vocabulary & vocab, Rng & rng) {
    Tokens out(x0.begin(), x0.end());
    for (auto & tok : out) {
        if (tok == vocab.mask_id()) {
            throw PreconditionError("forward_mask input already contains the mask token");
        }
        // One draw per position, always, so the stream position does not depend on t.
        if (rng.bernoulli(t.value())) {
            tok = vocab.mask_id();
        }
    }
    return out;
}

double reverse_keep_mask_prob(NoiseLevel s, NoiseLevel t) {
    if (t.value() == 0.0 || s.value() >= t.value()) {
        throw DomainError("reverse transition requires 0 <= s < t <= 1");
    }
    return s.value() / t.value();
}

Tokens sample_reverse_step(std::span<const TokenId> xt, NoiseLevel s, NoiseLevel t,
                           const PositionDistributions & dist, const Vocabulary & vocab, Rng & rng) {
    const double keep = reverse_keep_mask_prob(s, t);
    if (dist.rows != static_cast<int>(xt.size()) || dist.cols != vocab.size() ||
        dist.probs.size() != static_cast<std::size_t>(dist.rows) * dist.cols) {
        throw PreconditionError("distribution shape does not match sequence and vocabulary");
    }

    Tokens out(xt.begin(), xt.end());
    for (int i = 0; i < dist.rows; ++i) {
        if (xt[i] != vocab.mask_id()) {
            continue;
        }
        const auto row   = dist.row(i);
        double     total = 0.0;
        double     other = 0.0;
        for (int v = 0; v < dist.cols; ++v) {
            if (!(row[v] >= 0.0) || !std::isfinite(row[v])) {
                throw PreconditionError("distribution row " + std::to_string(i) + " has an invalid entry");
            }
            total += row[v];
            if (v != vocab.mask_id()) {
                other += row[v];
            }
        }
        if (std::abs(total - 1.0) > 1e-6) {
            throw PreconditionError("distribution row " + std::to_string(i) + " does not sum to 1");
        }
        if (other <= 0.0) {
            throw PreconditionError("distribution row " + std::to_string(i) + " has no mass off the mask token");
        }

        if (rng.bernoulli(keep)) {
            continue;
        }
        const double u   = rng.uniform() * other;
        double       acc = 0.0;
        TokenId      pick = -1;
        for (int v = 0; v < dist.cols; ++v) {
            if (v == vocab.mask_id() || row[v] == 0.0) {
                continue;
            }
            pick = v;
            acc += row[v];
            if (u < acc) {
                break;
            }
        }
        out[i] = pick;
    }
    return out;
}

}  // namespace pardec
