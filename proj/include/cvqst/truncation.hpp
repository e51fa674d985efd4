#ifndef CVQST_TRUNCATION_HPP
#define CVQST_TRUNCATION_HPP

#include <vector>

#include "cvqst/common.hpp"
#include "cvqst/displacement.hpp"

namespace cvqst {

/// [O]_k = P_k O P_k: the top-left to_dim x to_dim block.
Matrix project_operator(const Matrix& op, int to_dim);

/// Zero-padded embedding into a larger dimension (inverse of projection on
/// the retained block).
Matrix embed_operator(const Matrix& op, int to_dim);

/// Noisy heterodyne POVM core (1/pi) [D(alpha) rho_h D^dag(alpha)]_{k1},
/// with the displacement and noise state synthesized at k2 >= k1 and the
/// product truncated afterwards. rho_h larger than k2 is projected first.
Matrix truncated_noisy_povm(Complex alpha, const Matrix& rho_h, int k1, int k2,
                            const DisplacementCache& cache);

/// Factorized multimode POVM for independent per-mode noise: the Kronecker
/// product of per-mode truncated cores, carrying the (1/pi)^m prefactor.
Matrix multimode_noisy_povm(const std::vector<Complex>& alphas,
                            const std::vector<Matrix>& rho_h_modes,
                            const std::vector<int>& k1_modes, int k2,
                            const DisplacementCache& cache);

/// Empirical lower bound on the truncated dimension needed to hold a state
/// with top occupation n displaced by at most alpha_max:
/// ceil(n + alpha_max^2 + 3 sqrt(2n+1) alpha_max) + 1.
int required_dimension(int n, double alpha_max);

}  // namespace cvqst

#endif
