import json
import os
import subprocess
import sys
from fractions import Fraction

import pytest

import circlefd.harness as hx
from circlefd.conjugacy import build_descriptor
from circlefd.harness import (BuildConfig, UsageError, VerifyContext,
                              build_artifacts, descriptor_payload,
                              report_payload, run_suites)

CONFIG_TEXT = """\
# small but fully functional construction
alpha = golden
seq_terms = 5
n_max = 3
depth = 4
i_max = 8
d_max = 20
mass_bits = 96
grid = 8
sample_count = 3
disjoint_range = 4
image_range = 3
stage_depths = 3,4
stage_mass_bits = 96,144
"""


def run_cli(*args, cwd, env=None):
    full_env = {k: v for k, v in os.environ.items() if k != hx.CACHE_ENV}
    if env:
        full_env.update(env)
    return subprocess.run([sys.executable, "-m", "circlefd", *args],
                          cwd=str(cwd), env=full_env,
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.cfg").write_text(CONFIG_TEXT)
    r = run_cli("build", "--config", "small.cfg", "--out", "d.json", cwd=root)
    assert r.returncode == 0, r.stderr
    return root


# -- configuration ------------------------------------------------------------


def test_config_roundtrips(tmp_path):
    cfg = BuildConfig()
    assert BuildConfig.from_mapping(cfg.to_dict()) == cfg
    path = tmp_path / "c.cfg"
    path.write_text(cfg.to_text())
    assert BuildConfig.from_file(path) == cfg
    over = cfg.with_overrides(["depth=5", "tol_rotation=1/20000",
                               "stage_depths=3,4,5"])
    assert over.depth == 5
    assert over.tol_rotation == Fraction(1, 20000)
    assert over.stage_depths == (3, 4, 5)
    assert BuildConfig.from_mapping(over.to_dict()) == over


def test_config_parse_errors():
    cfg = BuildConfig()
    for bad in ("depth", "wibble=1", "depth=x", "stage_depths=3,x",
                "seed=-1=2"):
        with pytest.raises(UsageError):
            cfg.with_overrides([bad]).validate()


@pytest.mark.parametrize("override", [
    "depth=9",                 # depth > seq_terms
    "path=scenic",
    "min_atom_mass=1",
    "grid=0",
    "tol_rotation=0",
    "stage_mass_bits=96",      # length mismatch with stage_depths
    "precision_ladder=256,128",
])
def test_config_validation_errors(override):
    with pytest.raises(UsageError):
        BuildConfig().with_overrides([override]).validate()


# -- build ---------------------------------------------------------------------


def test_build_is_deterministic(work):
    r = run_cli("build", "--config", "small.cfg", "--out", "d2.json", cwd=work)
    assert r.returncode == 0 and "wrote d2.json" in r.stdout
    assert (work / "d.json").read_bytes() == (work / "d2.json").read_bytes()


def test_build_rejects_rational_alpha(work):
    r = run_cli("build", "--set", "alpha=0.5", "--out", "x.json", cwd=work)
    assert r.returncode == 2
    err = json.loads(r.stderr)
    assert err["error"] == "RationalInput"


def test_build_cache(work):
    env = {hx.CACHE_ENV: str(work / "cache")}
    r = run_cli("build", "--config", "small.cfg", "--out", "c1.json",
                cwd=work, env=env)
    assert r.returncode == 0
    cached = list((work / "cache").glob("descriptor-*.json"))
    assert len(cached) == 1
    r = run_cli("build", "--config", "small.cfg", "--out", "c2.json",
                cwd=work, env=env)
    assert r.returncode == 0
    assert (work / "c1.json").read_bytes() == (work / "c2.json").read_bytes()
    assert (work / "c1.json").read_bytes() == (work / "d.json").read_bytes()


# -- verify ---------------------------------------------------------------------


def test_verify_all_suites_pass(work):
    r = run_cli("verify", "d.json", "--report", "all.json", cwd=work)
    assert r.returncode == 0, r.stdout + r.stderr
    report = json.loads((work / "all.json").read_text())
    assert report["schema"] == hx.REPORT_SCHEMA
    assert report["overall"] == "pass" and report["exit_code"] == 0
    assert report["suites"] == sorted(hx.SUITES)
    names = [c["name"] for c in report["checks"]]
    assert names == sorted(hx._CHECKS)
    assert all(c["status"] == "pass" for c in report["checks"])
    assert "overall: pass" in r.stdout


def test_verify_suite_subsets(work):
    r = run_cli("verify", "d.json", "--suite", "lemma,summability",
                "--report", "sub.json", cwd=work)
    assert r.returncode == 0
    report = json.loads((work / "sub.json").read_text())
    assert {c["suite"] for c in report["checks"]} == {"lemma", "summability"}
    assert report["suites"] == ["lemma", "summability"]
    r = run_cli("verify", "d.json", "--suite", "rotational-symmetry",
                "--report", "bad.json", cwd=work)
    assert r.returncode == 2
    assert r.stderr.startswith("error:")


def test_verify_structural_tamper(work):
    payload = json.loads((work / "d.json").read_text())
    payload["measure"]["atoms"][5]["w"] = "3/1125899906842624"
    (work / "tampered.json").write_text(json.dumps(payload))
    r = run_cli("verify", "tampered.json", cwd=work)
    assert r.returncode == 1
    err = json.loads(r.stderr)
    assert err["error"] == "ToleranceNotMet"


def test_verify_deep_tamper_caught_by_recompute(work):
    # keep every structural identity intact, shift one off-zero atom mass:
    # only the bit-exact recomputation can notice
    payload = json.loads((work / "d.json").read_text())
    atom = next(a for a in payload["measure"]["atoms"] if a["i"] == 3)
    w = Fraction(atom["w"])
    atom["w"] = hx._render_fraction(2 * w)
    for key in ("w_total", "Z"):
        payload["measure"][key] = hx._render_fraction(
            Fraction(payload["measure"][key]) + w)
    (work / "deep.json").write_text(json.dumps(payload))
    r = run_cli("verify", "deep.json", "--suite", "conjugacy",
                "--report", "deep.report.json", cwd=work)
    assert r.returncode == 1
    report = json.loads((work / "deep.report.json").read_text())
    by_name = {c["name"]: c["status"] for c in report["checks"]}
    assert by_name["conjugacy.normalization"] == "fail"


def test_verify_missing_descriptor(work):
    r = run_cli("verify", "nope.json", cwd=work)
    assert r.returncode == 2


# -- export ----------------------------------------------------------------------


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "x,value,width"
    return [tuple(float(v) for v in line.split(",")) for line in lines[1:]]


def test_export_lift_and_figure(work):
    r = run_cli("export", "d.json", "--what", "F", "--samples", "8",
                "--out", "F.csv", cwd=work)
    assert r.returncode == 0
    rows = read_csv(work / "F.csv")
    assert len(rows) == 9
    xs = [row[0] for row in rows]
    vs = [row[1] for row in rows]
    assert xs == [j / 8 for j in range(9)]
    assert all(a < b for a, b in zip(vs, vs[1:]))  # strictly increasing lift
    assert abs(vs[-1] - vs[0] - 1) < 1e-9          # degree one
    assert all(row[2] >= 0 for row in rows)
    assert (work / "F.png").is_file()


def test_export_other_kinds(work):
    r = run_cli("export", "d.json", "--what", "cdf", "--samples", "8",
                "--out", "cdf.csv", "--no-figure", cwd=work)
    assert r.returncode == 0 and not (work / "cdf.png").exists()
    rows = read_csv(work / "cdf.csv")
    assert rows[0][1] == 0 and abs(rows[-1][1] - 1) < 1e-12
    assert all(a <= b for (_, a, _), (_, b, _) in zip(rows, rows[1:]))

    r = run_cli("export", "d.json", "--what", "derivative", "--samples", "6",
                "--out", "dF.csv", "--no-figure", cwd=work)
    assert r.returncode == 0
    assert all(v > 0 for _, v, _ in read_csv(work / "dF.csv"))

    r = run_cli("export", "d.json", "--what", "phi", "--samples", "6",
                "--out", "phi.csv", "--no-figure", cwd=work)
    assert r.returncode == 0
    rows = read_csv(work / "phi.csv")
    assert len(rows) == 7
    assert all(w > 0 for _, _, w in rows)  # phi carries the truncation tail


def test_export_usage_errors(work):
    r = run_cli("export", "d.json", "--what", "jerk", cwd=work)
    assert r.returncode == 2  # argparse rejects the choice
    r = run_cli("export", "d.json", "--what", "phi", "--samples", "1", cwd=work)
    assert r.returncode == 2
    assert r.stderr.startswith("error:")


# -- inspect ---------------------------------------------------------------------


def test_inspect_summary(work):
    r = run_cli("inspect", "d.json", cwd=work)
    assert r.returncode == 0
    info = json.loads(r.stdout)
    assert info["atoms"] == (2 * 8 + 1) * 2 ** 4
    assert info["depth"] == 4 and info["i_max"] == 8
    assert info["digit_provenance"] == "golden-fast-path"
    assert len(info["q_bit_lengths"]) == 6
    assert 0.99 < info["atom_mass_normalized"] < 1


# -- report precedence (in process) ----------------------------------------------


@pytest.fixture(scope="module")
def undecided_ctx():
    cfg = BuildConfig().with_overrides([
        "seq_terms=5", "n_max=3", "depth=4", "i_max=8", "d_max=1",
        "disjoint_range=117", "sample_count=3", "grid=8", "image_range=3",
        "stage_depths=3,4", "stage_mass_bits=96,144",
    ])
    cfg.validate()
    art = build_artifacts(cfg)
    return VerifyContext(cfg=cfg, payload=descriptor_payload(art),
                         seq=art.seq, stack=art.stack, measure=art.measure,
                         descriptor=build_descriptor(art.measure))


def test_undecided_disjointness_reports_exit_3(undecided_ctx):
    results = run_suites(undecided_ctx, ["disjointness"])
    assert [r.status for r in results] == ["undecided"]
    assert results[0].values["error"] == "DisjointnessUndecided"
    report = report_payload(results, ["disjointness"])
    assert report["overall"] == "undecided" and report["exit_code"] == 3


def test_fail_outranks_undecided(undecided_ctx):
    import dataclasses
    strict = dataclasses.replace(
        undecided_ctx,
        cfg=undecided_ctx.cfg.with_overrides(["min_atom_mass=999999999/1000000000"]),
        memo={})
    results = run_suites(strict, ["disjointness", "fundamental-domain"])
    by_name = {r.name: r.status for r in results}
    assert by_name["disjointness.translates"] == "undecided"
    assert by_name["fundamental-domain.mass"] == "fail"
    report = report_payload(results, ["disjointness", "fundamental-domain"])
    assert report["overall"] == "fail" and report["exit_code"] == 1


def test_run_suites_rejects_unknown(undecided_ctx):
    with pytest.raises(UsageError):
        run_suites(undecided_ctx, ["lemma", "conspiracy"])
