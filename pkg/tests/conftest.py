import math

import pytest

import hgbarrier as hb

# shared benchmark setting: eps=0.1, c=10, a=0.2, r=0.01, K=104, T=1, t=0, x=100
BENCH = dict(a=0.2, c=10.0, eps=0.1, r=0.01)
STRIKE = 104.0
MATURITY = 1.0
SPOT = 100.0


def make_params(rho=-0.5, eps=0.1):
    return hb.ModelParams(a=BENCH["a"], c=BENCH["c"], eps=eps, rho=rho, r=BENCH["r"])


def make_row(rho, h, e2v, eps=0.1):
    """Model/option/state triple for one benchmark row."""
    params = make_params(rho=rho, eps=eps)
    v = 0.5 * math.log(e2v)
    option = hb.matched_single_stage(params, STRIKE, MATURITY, h, 0.0, v)
    state = hb.MarketState(t=0.0, x=SPOT, v=v)
    return params, option, option.barrier, state


@pytest.fixture
def params():
    return make_params()
