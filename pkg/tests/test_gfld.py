import os

import numpy as np
import pytest

from gerbeflow.gfld import GfldError, encode_gfld, read_gfld, write_gfld
from gerbeflow.grid import Grid, OneForm, ScalarField, SymTensor2, ThreeForm, TwoForm


def _fields(g, rng):
    d = g.dim
    sym = rng.normal(size=(d, d) + g.shape)
    sym = sym + np.swapaxes(sym, 0, 1)
    anti = rng.normal(size=(d, d) + g.shape)
    anti = anti - np.swapaxes(anti, 0, 1)
    top = rng.normal(size=(1,) + g.shape) if d == 3 else np.zeros((0,) + g.shape)
    return {
        "phi": ScalarField(g, rng.normal(size=g.shape)),
        "w": OneForm(g, rng.normal(size=(d,) + g.shape)),
        "h": SymTensor2(g, sym),
        "psi": TwoForm(g, anti),
        "H": ThreeForm.from_components(g, top),
    }


def test_roundtrip_is_bit_exact(tmp_path, rng):
    g = Grid((8, 10, 12), (1.0, 2.0, 0.5))
    fields = _fields(g, rng)
    path = tmp_path / "a.gfld"
    write_gfld(path, g, fields, {"tau": 0.25})
    g2, back, meta = read_gfld(path)
    assert g2 == g and meta == {"tau": 0.25}
    assert list(back) == list(fields)
    for name, f in fields.items():
        assert type(back[name]) is type(f)
        assert back[name].data.tobytes() == f.data.tobytes()


def test_layout_components_fastest(tmp_path):
    g = Grid((8, 8), (1, 1))
    w = OneForm(g, np.stack([np.zeros(g.shape), np.ones(g.shape)]))
    raw = encode_gfld(g, {"w": w})
    body = np.frombuffer(raw[raw.index(b"\n", 7) + 1:], dtype="<f8")
    assert np.array_equal(body[:4], [0.0, 1.0, 0.0, 1.0])
    assert raw.startswith(b"GFLD 1\n")


def test_encoding_is_deterministic(rng):
    g = Grid((8, 8), (1, 1))
    fields = _fields(g, rng)
    assert encode_gfld(g, fields, {"tau": 1.0}) == encode_gfld(g, fields, {"tau": 1.0})


def test_atomic_write_leaves_no_temporaries(tmp_path, rng):
    g = Grid((8, 8), (1, 1))
    path = tmp_path / "x.gfld"
    write_gfld(path, g, _fields(g, rng))
    write_gfld(path, g, _fields(g, rng))
    assert os.listdir(tmp_path) == ["x.gfld"]


def test_malformed_files(tmp_path, rng):
    g = Grid((8, 8), (1, 1))
    good = encode_gfld(g, _fields(g, rng))
    cases = {
        "magic": b"GFLD 2\n" + good[7:],
        "truncated": good[:-8],
        "trailing": good + b"\0" * 8,
        "partial": good + b"\0" * 3,
        "header": b"GFLD 1\n{not json}\n",
    }
    for name, payload in cases.items():
        p = tmp_path / f"{name}.gfld"
        p.write_bytes(payload)
        with pytest.raises(GfldError):
            read_gfld(p)


def test_component_count_mismatch(tmp_path):
    g = Grid((8, 8), (1, 1))
    raw = encode_gfld(g, {"phi": ScalarField.zeros(g)})
    raw = raw.replace(b'"components":1', b'"components":2')
    p = tmp_path / "bad.gfld"
    p.write_bytes(raw)
    with pytest.raises(GfldError, match="components"):
        read_gfld(p)


def test_field_on_other_grid_rejected():
    g = Grid((8, 8), (1, 1))
    with pytest.raises(GfldError):
        encode_gfld(g, {"phi": ScalarField.zeros(Grid((10, 8), (1, 1)))})
