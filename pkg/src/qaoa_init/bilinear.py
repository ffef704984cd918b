"""Depth-progressive bilinear extrapolation of QAOA parameters.

Depth-l starts are predicted from the refined depth-(l-1) and depth-(l-2)
parameters, applied independently to the gamma and beta sequences:

    j <= l-2:      theta_l^j = theta_{l-1}^j + (theta_{l-1}^j - theta_{l-2}^j)
    j in {l-1, l}: theta_l^j = theta_{l-1}^{l-1}
                              + (theta_{l-1}^{l-1} - theta_{l-2}^{l-2})

The two trailing indices receive the same diagonal extrapolation ("printed"
variant); the "index-blend" variant instead fills index l-1 by extrapolating
along the index direction within depth l-1,
theta_l^{l-1} = 2*theta_{l-1}^{l-1} - theta_{l-1}^{l-2}.

Extrapolated starts are refined once per depth and are deliberately NOT
wrapped to the canonical domain (wrapping would break the linear trend the
strategy follows); wrapping is applied only when reporting.
"""

from dataclasses import dataclass

import numpy as np

from .cnn_predictor import cnn_forward, gru_depth1_params
from .graphs import brute_force_max_cut
from .optimizers import maximize
from .rng import derive_seed
from .simulator import QaoaParams, approximation_ratio

VARIANTS = ("printed", "index-blend")


def _extrapolate_sequence(prev, prev2, variant):
    l = prev.shape[0] + 1
    out = np.empty(l)
    out[:l - 2] = prev[:l - 2] + (prev[:l - 2] - prev2[:l - 2])
    out[l - 1] = prev[l - 2] + (prev[l - 2] - prev2[l - 3])
    if variant == "printed":
        out[l - 2] = out[l - 1]
    else:  # index-blend
        out[l - 2] = prev[l - 2] + (prev[l - 2] - prev[l - 3])
    return out


def bilinear_extrapolate(theta_lm1, theta_lm2, variant="printed"):
    """Depth-l parameters from the depth-(l-1) and depth-(l-2) optima."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if theta_lm1.depth != theta_lm2.depth + 1:
        raise ValueError(
            f"input depths must differ by one, got {theta_lm1.depth} "
            f"and {theta_lm2.depth}"
        )
    if theta_lm2.depth < 1:
        raise ValueError("extrapolation needs depth l-2 >= 1")
    return QaoaParams(
        gammas=_extrapolate_sequence(theta_lm1.gammas, theta_lm2.gammas, variant),
        betas=_extrapolate_sequence(theta_lm1.betas, theta_lm2.betas, variant),
    )


@dataclass
class DepthScheduleEntry:
    depth: int
    init_params: QaoaParams
    refined_params: QaoaParams
    energy: float
    ratio: float
    grad_evals: int
    iterations: int


@dataclass
class DepthSchedule:
    c_max: float
    entries: list

    def ratios(self):
        return np.array([e.ratio for e in self.entries])

    def entry(self, depth):
        return self.entries[depth - 1]


def depth_progressive_run(g, max_depth, gru_weights, cnn_weights,
                          refine_budget=300, refine_lr=0.01, refine_tol=1e-7,
                          shallow_lr=0.1, seed=0, horizon=10,
                          variant="printed"):
    """One chained run: GRU depth 1, CNN depth 2, bilinear for depths 3..L,
    with a single local refinement per depth.

    The depth-1/2 starts come from the neural models and are not yet
    near-optimal, so those two refinements run at the coarser `shallow_lr`;
    extrapolated starts at depths >= 3 are fine-tuned at `refine_lr`. The
    depth-1 result is kept mirror-canonical so the (l-1, l-2) extrapolation
    pairs share one symmetry branch.
    """
    if max_depth < 2:
        raise ValueError("max_depth must be >= 2")
    c_max = brute_force_max_cut(g).c_max
    entries = []

    def record(depth, init, trace, refined_params):
        entries.append(
            DepthScheduleEntry(
                depth=depth,
                init_params=init,
                refined_params=refined_params,
                energy=trace.best_energy,
                ratio=approximation_ratio(trace.best_energy, c_max),
                grad_evals=trace.grad_evals,
                iterations=trace.iterations,
            )
        )

    def refine(init, depth, lr):
        trace = maximize(
            g, init, method="adam", budget=refine_budget, tol=refine_tol,
            learning_rate=lr,
        )
        record(depth, init, trace, trace.best_params)
        return trace.best_params

    theta1, trace1 = gru_depth1_params(
        g=g, gru_weights=gru_weights, seed=derive_seed(seed, 1),
        horizon=horizon, refine_budget=refine_budget, refine_lr=shallow_lr,
        refine_tol=refine_tol,
    )
    record(1, trace1.entries[0][0], trace1, theta1)

    cnn_out = cnn_forward(cnn_weights, theta1.flatten())
    depth2_init = QaoaParams(gammas=cnn_out[:2].copy(), betas=cnn_out[2:].copy())
    refine(depth2_init, 2, shallow_lr)

    for depth in range(3, max_depth + 1):
        init = bilinear_extrapolate(
            entries[-1].refined_params, entries[-2].refined_params, variant
        )
        refine(init, depth, refine_lr)
    return DepthSchedule(c_max=c_max, entries=entries)
