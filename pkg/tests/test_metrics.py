import numpy as np
import pytest

from src.core.errors import InputFormatError
from src.metrics.accuracy import accuracy_report, mase, rmse


class TestRmse:
    def test_values(self):
        assert rmse([1.0, 2.0], [4.0, 6.0]) == pytest.approx(3.5355339059, rel=1e-9)
        assert rmse([0.0, 0.0, 0.0], [1.0, -1.0, 0.0]) == pytest.approx(np.sqrt(2.0 / 3.0))

    def test_perfect_forecast(self):
        assert rmse(np.arange(5.0), np.arange(5.0)) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(InputFormatError, match="Length mismatch"):
            rmse([1.0, 2.0], [1.0])

    def test_empty(self):
        with pytest.raises(InputFormatError):
            rmse([], [])


class TestMase:
    def test_value(self):
        # naive in-sample MAE is 1, forecast MAE is 2
        assert mase([5.0, 6.0], [3.0, 8.0], insample=[1.0, 2.0, 3.0, 4.0]) == pytest.approx(2.0)

    def test_seasonal_lag(self):
        insample = [1.0, 5.0, 3.0, 7.0, 5.0, 9.0]
        assert mase([10.0], [12.0], insample=insample, m=2) == pytest.approx(1.0)

    def test_constant_history_gives_inf(self):
        assert mase([1.0], [2.0], insample=[3.0, 3.0, 3.0]) == float("inf")

    def test_scale_free(self, rng):
        actual, forecast, insample = rng.normal(size=6), rng.normal(size=6), rng.normal(size=30)
        assert mase(10 * actual, 10 * forecast, 10 * insample) == pytest.approx(mase(actual, forecast, insample))

    def test_short_history(self):
        with pytest.raises(InputFormatError, match="in-sample"):
            mase([1.0], [1.0], insample=[2.0], m=1)


class TestAccuracyReport:
    def test_rmse_per_level(self, three_level):
        actual = np.zeros((7, 2))
        forecast = np.zeros((7, 2))
        forecast[0] = 4.0
        forecast[1:3] = [[2.0, 2.0], [0.0, 0.0]]
        report = accuracy_report(three_level, actual, forecast)
        assert report.per_series["Total"] == 4.0
        assert report.per_level == {"0": 4.0, "1": 1.0, "2": 0.0}
        assert report.overall == pytest.approx(5.0 / 3.0)
        assert report.excluded == 0

    def test_mase_excludes_infinite_series(self, two_level):
        actual = np.array([[10.0], [4.0], [6.0]])
        forecast = np.array([[11.0], [4.0], [7.0]])
        insample = [[1.0, 2.0, 3.0], [2.0, 2.0, 2.0], [0.0, 1.0, 2.0]]
        report = accuracy_report(two_level, actual, forecast, metric="mase", insample=insample)
        assert report.per_series["Y"] == float("inf")
        assert report.excluded_series == ["Y"]
        assert report.per_level["1"] == pytest.approx(1.0)
        assert report.overall == pytest.approx(1.0)

    def test_row_count_checked(self, three_level):
        with pytest.raises(InputFormatError, match="series rows"):
            accuracy_report(three_level, np.zeros((6, 2)), np.zeros((6, 2)))

    def test_mase_needs_history(self, two_level):
        with pytest.raises(InputFormatError, match="in-sample history"):
            accuracy_report(two_level, np.zeros((3, 1)), np.zeros((3, 1)), metric="mase")

    def test_unknown_metric(self, two_level):
        with pytest.raises(InputFormatError, match="Unknown metric"):
            accuracy_report(two_level, np.zeros((3, 1)), np.zeros((3, 1)), metric="mape")
