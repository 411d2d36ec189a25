import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from airs.estimators import LinearRewardScheme, OptimalAIRS
from airs.exceptions import InstanceError
from airs.validation import check_instance, check_max_iter, check_seed, check_tolerance

from conftest import INSTANCE_B, SINGLE


class TestOptimalAIRS:
    def test_fit_from_mapping(self):
        est = OptimalAIRS().fit(INSTANCE_B)
        assert est.gross_ == pytest.approx(2.5819889, rel=1e-7)
        assert est.lambda_ == pytest.approx(1 / math.sqrt(15), rel=1e-8)
        assert est.score() == est.gross_

    def test_predict_reproduces_actions(self):
        est = OptimalAIRS().fit(INSTANCE_B)
        np.testing.assert_allclose(est.predict([2.0, 1.0]), est.actions_)
        assert est.predict(100.0)[0] == 0.0

    def test_fit_from_path(self, write_json):
        est = OptimalAIRS().fit(str(write_json("b.json", INSTANCE_B)))
        assert est.spend_ == pytest.approx(5.0)

    def test_params_and_clone(self):
        est = OptimalAIRS(tol=1e-8, max_iter=50)
        assert est.get_params() == {"tol": 1e-8, "max_iter": 50}
        twin = clone(est)
        assert twin.get_params() == est.get_params() and not hasattr(twin, "solution_")
        est.set_params(tol=1e-6)
        assert est.tol == 1e-6

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            OptimalAIRS().predict([1.0])

    @pytest.mark.parametrize("kw", [{"tol": 0.0}, {"tol": 1.5}, {"max_iter": 0}])
    def test_bad_params_rejected_at_fit(self, kw):
        with pytest.raises(InstanceError):
            OptimalAIRS(**kw).fit(INSTANCE_B)

    def test_bad_multipliers(self):
        est = OptimalAIRS().fit(INSTANCE_B)
        with pytest.raises(InstanceError):
            est.predict([-1.0])
        with pytest.raises(ValueError):
            est.predict([np.nan])


class TestLinearRewardScheme:
    def test_single_type(self):
        est = LinearRewardScheme().fit(SINGLE)
        assert est.price_ == pytest.approx(math.sqrt(2), rel=1e-9)
        np.testing.assert_allclose(est.predict([1.0]), [math.sqrt(2) / 2], rtol=1e-9)

    def test_ratio_against_optimal(self):
        lin = LinearRewardScheme().fit(INSTANCE_B).score()
        opt = OptimalAIRS().fit(INSTANCE_B).score()
        assert 0.5 <= lin / opt <= 1.0


class TestValidationHelpers:
    def test_check_instance(self, instance_b):
        assert check_instance(instance_b) is instance_b
        with pytest.raises(InstanceError):
            check_instance(42)

    def test_scalars(self):
        assert check_tolerance(1e-3) == 1e-3
        assert check_max_iter(5) == 5
        assert check_seed(2 ** 64 - 1) == 2 ** 64 - 1
        for fn, bad in [(check_tolerance, 1.0), (check_max_iter, 2.5), (check_seed, -1),
                        (check_seed, 2 ** 64)]:
            with pytest.raises(InstanceError):
                fn(bad)
