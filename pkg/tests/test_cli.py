import csv
import io
import json
import math

import pytest

from freeperp.cli import UsageError, dispatch, parse_joint, parse_measure
from freeperp.measure import InvalidParams, levy_distance


def run(*argv):
    buf = io.StringIO()
    code = dispatch(list(argv), out=buf)
    return code, buf.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_measure_builtin():
    mu = parse_measure("builtin:free_beta_prime(2, 3)")
    assert mu.moment(2) == pytest.approx(2.0)
    assert parse_measure("builtin:free_beta_prime(a=2, b=3)").moment(1) == pytest.approx(1.0)
    sym = parse_measure("symmetrized:builtin:free_beta_prime(2,3)")
    assert sym.support_kind == "symmetric"


def test_parse_measure_json(tmp_path, fbp23):
    p = tmp_path / "mu.json"
    p.write_text(json.dumps(fbp23.to_dict()))
    assert levy_distance(parse_measure(str(p)), fbp23) < 1e-9


def test_parse_errors():
    with pytest.raises((UsageError, InvalidParams)):
        parse_measure("builtin:nope()")
    with pytest.raises(UsageError):
        parse_measure("free_beta_prime(2,3")


def test_parse_joint():
    rho = parse_joint("graph:builtin:free_gig(-1);power=2")
    assert rho.tau_a() == pytest.approx(1.0, abs=1e-9)
    sym = parse_joint("graph:builtin:free_beta_prime(2,3);symmetric")
    assert sym.is_symmetric_b()


def test_transform_chi(tmp_path):
    out = tmp_path / "chi.csv"
    code, text = run("transform", "--measure", "builtin:free_beta_prime(2,3)", "--kind", "chi",
                     "--at", "-0.5,-0.25", "--out", str(out))
    assert code == 0 and text.startswith("# config")
    rows = read_csv(out)
    w = -0.5
    assert float(rows[0]["value_re"]) == pytest.approx(w * (2 - w) / ((1 + w) * (w + 2)), rel=1e-10)


def test_subordinate_columns(tmp_path):
    out = tmp_path / "sub.csv"
    code, _ = run("-q", "subordinate", "--x", "builtin:free_beta_prime(2,3)",
                  "--joint", "graph:builtin:free_beta_prime(2,5)", "--z", "-1,-10", "--out", str(out))
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["z_re", "z_im", "f_re", "f_im", "sf_re", "sf_im", "residual", "iters",
                             "consistency"]
    # delta(-1) = 5/6 for this pair
    assert -float(rows[0]["f_re"]) == pytest.approx(5 / 6, rel=1e-9)


def test_tails_json_and_reproducible(tmp_path):
    a = tmp_path / "a.json"
    blobs = []
    for threads in ("1", "3"):
        code, _ = run("-q", "--threads", threads, "tails", "--measure", "builtin:free_beta_prime(2,1)",
                      "--out", str(a))
        assert code == 0
        blobs.append(a.read_bytes())
    assert blobs[0] == blobs[1]
    rep = json.loads(a.read_text())
    assert rep["constant"] == pytest.approx(2 * math.sqrt(2) / math.pi, rel=1e-2)
    assert "threads" not in rep["config"]


def test_mult_power_text():
    code, text = run("-q", "mult-power", "--measure", "builtin:marchenko_pastur(1)", "--n", "3",
                     "--moments", "1,2", "--gamma", "0.5")
    assert code == 0
    assert "m_2(mu^[x]3) = 4" in text


def test_oracle_needs_seed():
    code, _ = run("oracle", "--measure", "builtin:marchenko_pastur(1)", "--n", "2")
    assert code == 2


def test_oracle_runs(tmp_path):
    out = tmp_path / "o.json"
    code, _ = run("-q", "oracle", "--seed", "1", "--measure", "builtin:marchenko_pastur(1)", "--n", "2",
                  "--N", "50", "--trials", "2", "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text())["size"] == 100


def test_exit_codes():
    assert run("-q", "transform", "--measure", "builtin:nope()", "--at", "1")[0] == 1
    assert run("transform")[0] == 2
    assert run("--version")[0] == 0


def test_validate_group():
    code, text = run("-q", "validate", "comb")
    assert code == 0
    assert text.count("PASS") == 3
