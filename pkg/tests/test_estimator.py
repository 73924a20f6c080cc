import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rmix.estimator import RMIXEstimator

FAST = dict(eval_interval=50, eval_episodes=4, batch_size=4, buffer_size=16, n_atoms=7,
            rnn_hidden_dim=8, predictor_hidden_dim=8, mixing_embed_dim=4, hypernet_embed_dim=8)


def test_params_round_trip_through_clone():
    est = RMIXEstimator(algorithm="rmix-static", alpha=0.5, total_steps=100, options=FAST)
    params = clone(est).get_params()
    assert params["alpha"] == 0.5 and params["options"] == FAST
    est.set_params(seed=4)
    assert est.seed == 4


def test_fit_predict_score():
    est = RMIXEstimator(total_steps=100, options=FAST)
    with pytest.raises(NotFittedError):
        est.predict(np.eye(2))
    assert est.fit() is est
    actions = est.predict(np.stack([np.eye(2)] * 3))
    assert actions.shape == (3, 2) and set(actions.ravel()) <= {0, 1}
    assert 0.0 <= est.score(episodes=4) <= 1.0
    assert est.history_[-1]["step"] >= 100
    with pytest.raises(ValueError):
        est.predict(np.ones((1, 3, 2)))
