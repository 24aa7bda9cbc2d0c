"""Single-modality neighbourhood regression: the same group-sparse IHT on one modality's raw scores."""

import numpy as np

from .graph_eval import select_edges
from .init import init_b
from .model import ModelParams, ScoreBundle


def fit_single_modality(data, m, cfg):
    """Regress each node's modality-``m`` scores on every other node's, with ``A = I``.

    Returns ``(ModelParams, GraphEstimate)`` for the one-modality model.
    """
    if not 0 <= m < data.M:
        raise ValueError(f"modality {m} out of range for M={data.M}")
    one = ScoreBundle(data.p, (data.scores[m],))
    km = one.k_m[0]
    a = (np.eye(km),)
    b, _ = init_b(one, a, cfg.with_(max_iter_init=max(cfg.max_iter_init, cfg.max_iter_main)))
    params = ModelParams(a, b)
    return params, select_edges(params, cfg.eps0, cfg.edge_rule)
