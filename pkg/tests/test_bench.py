import pytest

from logitgame.bench import BenchConfig, bench_compare
from logitgame.errors import ContractError


def test_config_validation():
    with pytest.raises(ContractError):
        BenchConfig(draws=999)
    with pytest.raises(ContractError):
        BenchConfig(bins=(0,))
    with pytest.raises(ContractError):
        BenchConfig(grid_size=0)


def test_table_shape_and_linear_extrapolation():
    table = bench_compare(BenchConfig(bins=(1, 4), draws=2000, grid_size=1000))
    r1, r4 = table.row(1), table.row(4)
    assert r1.abj_seconds > 0 and r1.sharp_seconds > 0 and r1.ct_seconds > 0
    assert r4.ct_seconds == pytest.approx(4 * r1.ct_seconds)
    assert r1.ct_seconds == pytest.approx(r1.ct_eval_seconds * 1000)
    text = table.format().splitlines()
    assert [t.split()[0] for t in text] == ["K", "ABJ", "Sharp", "CT"]


def test_single_bin_projection_is_fast():
    table = bench_compare(BenchConfig(bins=(1,), draws=1000, grid_size=10))
    assert table.row(1).abj_seconds < 1.0
