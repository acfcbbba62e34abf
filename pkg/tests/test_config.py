import math

import numpy as np
import pytest

from gerbeflow.config import ConfigError, PhiExpression, load_config, parse_config
from gerbeflow.grid import Grid

GOOD = """
# comment
[grid]
n = 2
N = 16, 32
lengths = 1.0 2.0

[evolution]
dt = 0.01   ; inline comment
steps = 5
lambda = -0.5
filter_modes = 4

[constraints2d]
c = 1.5
k = 0.1
F = linear
phi = 0.3*sin(1*x) - 0.1*cos(2*y) + 0.05

[io]
out = results

[seed]
seed = 7
"""


def test_parse_full_config():
    cfg = parse_config(GOOD)
    assert cfg.n == 2 and cfg.N == (16, 32) and cfg.lengths == (1.0, 2.0)
    assert cfg.dt == 0.01 and cfg.steps == 5 and cfg.lam == -0.5 and cfg.filter_modes == 4
    assert cfg.c == 1.5 and cfg.k == 0.1 and cfg.F == "linear"
    assert cfg.out == "results" and cfg.seed == 7 and cfg.record_every == 1
    assert set(cfg.sections) == {"grid", "evolution", "constraints2d", "io", "seed"}
    assert cfg.grid() == Grid((16, 32), (1.0, 2.0))


def test_single_values_broadcast_and_default_step():
    cfg = parse_config("[grid]\nn = 3\nN = 16\n")
    assert cfg.N == (16, 16, 16) and cfg.lengths == (1.0, 1.0, 1.0)
    assert cfg.time_step() == 0.25 / 16


def test_phi_expression():
    g = Grid((16, 8), (1.0, 2.0))
    phi = PhiExpression.parse("0.3*sin(1*x) - 0.1*cos(2*y) + 0.05")
    x, y = g.coords()
    expected = 0.3 * np.sin(2 * math.pi * x) - 0.1 * np.cos(2 * math.pi * 2 * y / 2.0) + 0.05
    assert np.max(np.abs(phi.evaluate(g) - expected)) < 1e-15
    assert PhiExpression.parse("sin(x)").terms == ((1.0, "sin", 1, 0),)
    assert PhiExpression.parse("0.4").is_constant
    assert PhiExpression.parse("1e-3*cos(3*z)").max_axis() == 2


@pytest.mark.parametrize("text", ["", "exp(x)", "0.3*sin(x", "sin(w)", "0.3*sin(0.5*x)", "x"])
def test_phi_rejects(text):
    with pytest.raises(ConfigError):
        PhiExpression.parse(text)


@pytest.mark.parametrize("text,fragment", [
    ("[grid]\nn = 2\nN = 16\nfoo = 1\n", "line 4: unknown key 'foo' in [grid]"),
    ("[grid]\nn = 2\nN = 16\n[weird]\n", "line 4: unknown section [weird]"),
    ("n = 2\n", "line 1: key 'n' appears before any section"),
    ("[grid]\nn = 2\nN = 16\nN = 32\n", "line 4: key 'N' repeated"),
    ("[grid]\nn = 2\nN = 16\n[grid]\n", "line 4: section [grid] repeated"),
    ("[grid\n", "line 1: malformed section header"),
    ("[grid]\nn 2\n", "line 2: expected 'key = value'"),
    ("[grid]\nn = 4\nN = 16\n", "line 2: n must be 1, 2 or 3"),
    ("[grid]\nn = 2\nN = 15\n", "line 3: every N must be even and >= 8"),
    ("[grid]\nn = 2\nN = 6\n", "line 3: every N must be even and >= 8"),
    ("[grid]\nn = 2\nN = 16, 16, 16\n", "line 3: N needs 1 or 2 values"),
    ("[grid]\nn = 2\nN = 16\nlengths = -1\n", "line 4: lengths must be positive"),
    ("[grid]\nn = 2\nN = abc\n", "line 3: N must be an integer"),
    ("[grid]\nn = 2\nN = 16\n[evolution]\ndt = 0.1\n", "line 5: dt = 0.1 exceeds 0.25 * min spacing"),
    ("[grid]\nn = 2\nN = 16\n[evolution]\ndt = nan\n", "line 5: dt must be finite"),
    ("[grid]\nn = 2\nN = 16\n[evolution]\nsteps = -1\n", "line 5: steps must be >= 0"),
    ("[grid]\nn = 2\nN = 16\n[constraints2d]\nF = cubic\n", "line 5: F must be one of zero, const1, linear"),
    ("[grid]\nn = 2\nN = 16\n[constraints2d]\nphi = sin(1*z)\n", "line 5: phi uses an axis beyond n = 2"),
    ("[grid]\nN = 16\n", "[grid] at line 1: missing key 'n'"),
    ("[seed]\nseed = 1\n", "missing section [grid]"),
])
def test_errors_name_the_line(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_required_sections_and_files(tmp_path):
    with pytest.raises(ConfigError, match=r"missing section \[evolution\]"):
        parse_config("[grid]\nn = 2\nN = 16\n", required=("grid", "evolution"))
    path = tmp_path / "c.ini"
    path.write_text("[grid]\nn = 2\nN = 16\nbad = 1\n")
    with pytest.raises(ConfigError, match=str(path)):
        load_config(path)
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.ini")
