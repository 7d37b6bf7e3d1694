import numpy as np
import pytest

from stereonorm import (AdaptiveNormalEstimator, AffineNormalEstimator,
                        CrossProductNormalEstimator, PCANormalEstimator,
                        StereoRig, as_rig, as_scalar_field, estimate_normals_fixed,
                        make_plane_scene)

RIG = StereoRig(fx=600.0, fy=600.0, u0=23.5, v0=17.5, baseline=0.4)

ALL_ESTIMATORS = [
    lambda: AffineNormalEstimator(RIG, kernel_size=5),
    lambda: AdaptiveNormalEstimator(RIG, stop="cd", threshold=0.5),
    lambda: AdaptiveNormalEstimator(RIG, stop="st", threshold=2.0),
    lambda: PCANormalEstimator(RIG, window=5),
    lambda: CrossProductNormalEstimator(RIG),
]


def plane():
    n = np.array([0.2, -0.3, -1.0])
    return make_plane_scene(n / np.linalg.norm(n), -5.0, RIG, 48, 36)


class TestValidationHelpers:
    def test_as_scalar_field_from_array(self):
        arr = np.array([[1.0, np.nan], [2.0, 3.0]])
        field = as_scalar_field(arr)
        assert field.mask.tolist() == [[True, False], [True, True]]

    def test_as_scalar_field_rejects_bad_rank(self):
        with pytest.raises(ValueError):
            as_scalar_field(np.zeros(5))
        with pytest.raises(ValueError):
            as_scalar_field(np.zeros((2, 2, 2)))

    def test_as_rig_accepts_mapping(self):
        rig = as_rig({"fx": 10, "fy": 10, "u0": 1, "v0": 2, "baseline": 0.5})
        assert rig.fx == 10

    def test_as_rig_rejects_other(self):
        with pytest.raises(ValueError):
            as_rig([1, 2, 3])


class TestSklearnProtocol:
    @pytest.mark.parametrize("make", ALL_ESTIMATORS)
    def test_get_set_params_roundtrip(self, make):
        est = make()
        params = est.get_params()
        clone = type(est)(**params)
        assert clone.get_params() == params

    def test_set_params_updates_and_chains(self):
        est = AffineNormalEstimator(RIG, kernel_size=5)
        assert est.set_params(kernel_size=9) is est
        assert est.kernel_size == 9

    def test_set_params_rejects_unknown(self):
        with pytest.raises(ValueError):
            AffineNormalEstimator(RIG).set_params(bogus=1)

    @pytest.mark.parametrize("make", ALL_ESTIMATORS)
    def test_fit_returns_self(self, make):
        est = make()
        assert est.fit() is est

    def test_fit_validates(self):
        with pytest.raises(ValueError):
            AdaptiveNormalEstimator(RIG, stop="bad").fit()
        with pytest.raises(ValueError):
            PCANormalEstimator(RIG, window=4).fit()


class TestTransform:
    @pytest.mark.parametrize("make", ALL_ESTIMATORS)
    def test_transform_returns_unit_normals(self, make):
        gt = plane()
        out = make().fit_transform(gt.disparity.values)
        assert out.shape == (36, 48, 3)
        valid = np.isfinite(out).all(axis=-1)
        assert valid.any()
        assert np.allclose(np.linalg.norm(out[valid], axis=-1), 1.0, atol=1e-9)

    def test_matches_functional_api(self):
        gt = plane()
        est = AffineNormalEstimator(RIG, kernel_size=5).fit()
        out = est.transform(gt.disparity)
        ref = estimate_normals_fixed(gt.disparity, RIG, 5)
        valid = np.isfinite(out).all(axis=-1)
        assert np.array_equal(valid, ref.mask)
        assert np.array_equal(out[valid], ref.vectors[ref.mask])

    def test_transform_without_fit_precomputes(self):
        gt = plane()
        out = AffineNormalEstimator(RIG, kernel_size=5).transform(gt.disparity.values)
        assert np.isfinite(out).all(axis=-1).any()

    def test_nan_inputs_masked(self):
        gt = plane()
        vals = gt.disparity.values.copy()
        vals[10, 10] = np.nan
        out = AffineNormalEstimator(RIG, kernel_size=3).fit_transform(vals)
        assert np.isnan(out[10, 10]).all()
        assert np.isnan(out[9, 9]).all()  # support touches the hole


class TestSklearnInterop:
    def test_clone_and_pipeline(self):
        sklearn = pytest.importorskip("sklearn")
        from sklearn.base import clone
        from sklearn.pipeline import Pipeline
        est = AffineNormalEstimator(RIG, kernel_size=5)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()
        pipe = Pipeline([("normals", AdaptiveNormalEstimator(RIG, stop="cd",
                                                             threshold=0.5))])
        out = pipe.fit_transform(plane().disparity.values)
        assert out.shape == (36, 48, 3)
