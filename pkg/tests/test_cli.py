import json
import subprocess
import sys

import pytest

from condyletraj import __version__
from condyletraj.cli import EXIT_EXCLUDED, EXIT_INVALID, EXIT_OK, main
from condyletraj.metrics import parse_report_csv
from condyletraj.phantom import PhantomSpec, write_phantom

SUBJECT_FILES = {"verdict.txt", "config.ini", "quality.csv", "quality.txt", "coverage.csv", "trajectory.csv",
                 "phases.csv", "cycles.csv", "warp_path.csv", "transforms.csv", "basis.csv", "projections.csv"}


@pytest.fixture(scope="module")
def manifests(tmp_path_factory):
    root = tmp_path_factory.mktemp("phantoms")
    out = {}
    for name, spec in {"good": PhantomSpec(subject="good", n_cycles=2),
                       "half": PhantomSpec(subject="half", n_cycles=0.5),
                       "nosag": PhantomSpec(subject="nosag", sagittal_present=False, n_cycles=2)}.items():
        write_phantom(spec, root / name)
        out[name] = str(root / name / "manifest.json")
    return out


def test_run_success(manifests, tmp_path, capsys):
    code = main(["run", "--manifest", manifests["good"], "--out", str(tmp_path), "--seed", "5"])
    assert code == EXIT_OK
    assert "good: ok" in capsys.readouterr().out
    subject = tmp_path / "good"
    assert SUBJECT_FILES <= {p.name for p in subject.iterdir()}
    for f in subject.iterdir():
        first = f.read_text().splitlines()[0]
        assert first.startswith(f"# condyletraj {__version__} config ") and " seed 5" in first, f.name
    header = (subject / "trajectory.csv").read_text().splitlines()[1].split(",")
    assert header[:9] == ["frame", "time_s", "side", "i_mm", "j_mm", "k_mm", "k_top_mm", "phase", "cycle_id"]
    rows = parse_report_csv((tmp_path / "quality.csv").read_text())
    assert [(r.subject, r.side) for r in rows] == [("good", "L"), ("good", "R")]
    assert "verdict ok" in (subject / "verdict.txt").read_text()


def test_run_exclusion_code(manifests, tmp_path, capsys):
    code = main(["run", "--manifest", manifests["half"], "--out", str(tmp_path)])
    assert code == EXIT_EXCLUDED
    assert "No full opening-closing cycle" in capsys.readouterr().out
    assert "No full opening-closing cycle" in (tmp_path / "half" / "verdict.txt").read_text()


def test_run_missing_sagittal(manifests, tmp_path):
    code = main(["run", "--manifest", manifests["nosag"], "--out", str(tmp_path)])
    assert code == EXIT_EXCLUDED
    traj = (tmp_path / "nosag" / "trajectory.csv").read_text().splitlines()
    assert len(traj) > 10
    assert "No simultaneous sagittal planes imaging" in (tmp_path / "nosag" / "verdict.txt").read_text()


def test_run_axial_only_flag(manifests, tmp_path):
    assert main(["run", "--manifest", manifests["good"], "--out", str(tmp_path), "--axial-only"]) == EXIT_OK
    rows = parse_report_csv((tmp_path / "quality.csv").read_text())
    assert rows[0].ratio is None and rows[0].msd_mm is not None


def test_run_point_and_config(manifests, tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[pipeline]\nspline_p = 0.2\n")
    out = tmp_path / "o"
    assert main(["run", "--manifest", manifests["good"], "--out", str(out), "--config", str(cfg),
                 "--point", "top"]) == EXIT_OK
    ini = (out / "good" / "config.ini").read_text()
    assert "spline_p = 0.2" in ini and "point = top" in ini


def test_run_invalid_inputs(manifests, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--manifest", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INVALID
    assert main(["run", "--manifest", manifests["good"], "--manifest", manifests["good"],
                 "--out", str(tmp_path / "o2")]) == EXIT_INVALID
    assert main(["run", "--out", str(tmp_path / "o3")]) == EXIT_INVALID
    cfg = tmp_path / "c.ini"
    cfg.write_text("[pipeline]\nwobble = 1\n")
    assert main(["run", "--manifest", manifests["good"], "--out", str(tmp_path / "o4"),
                 "--config", str(cfg)]) == EXIT_INVALID


def test_usage_errors_are_invalid():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == EXIT_INVALID
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_INVALID


def test_metrics_merge(manifests, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--manifest", manifests["good"], "--out", str(a)])
    main(["run", "--manifest", manifests["half"], "--out", str(b)])
    capsys.readouterr()
    merged = tmp_path / "m"
    assert main(["metrics", str(a), str(b / "quality.csv"), "--out", str(merged)]) == EXIT_EXCLUDED
    rows = parse_report_csv((merged / "quality.csv").read_text())
    assert [r.subject for r in rows] == ["good", "good", "half", "half"]
    summary = (merged / "summary.txt").read_text()
    assert "subjects: 2 (included 1, excluded 1)" in summary and "msd_mm: mean" in summary
    # a single report merges to itself
    capsys.readouterr()
    assert main(["metrics", str(a)]) == EXIT_OK
    printed = capsys.readouterr().out
    single = (a / "quality.csv").read_text().splitlines()[1:]
    assert printed.splitlines()[1:1 + len(single)] == single


def test_metrics_errors(manifests, tmp_path):
    assert main(["metrics"]) == EXIT_INVALID
    assert main(["metrics", str(tmp_path / "nowhere")]) == EXIT_INVALID
    junk = tmp_path / "quality.csv"
    junk.write_text("x,y\n1,2\n")
    assert main(["metrics", str(junk)]) == EXIT_INVALID
    a = tmp_path / "a"
    main(["run", "--manifest", manifests["good"], "--out", str(a)])
    assert main(["metrics", str(a), str(a)]) == EXIT_INVALID


def test_inspect(manifests, tmp_path, capsys):
    assert main(["inspect", "--manifest", manifests["good"], "--manifest", manifests["nosag"]]) == EXIT_OK
    out = capsys.readouterr().out
    assert "subject good: valid" in out and "axial-only" in out
    bad = tmp_path / "m.json"
    bad.write_text(json.dumps({"subject": "x"}))
    assert main(["inspect", "--manifest", str(bad)]) == EXIT_INVALID


def test_phantom_command(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"n_cycles": 0.3, "jitter": 0.1}))
    assert main(["phantom", "--spec", str(spec), "--out", str(tmp_path / "p"), "--seed", "9",
                 "--subject", "cmd", "--pgm"]) == EXIT_OK
    written = json.loads((tmp_path / "p" / "phantom_spec.json").read_text())
    assert written["seed"] == 9 and written["subject"] == "cmd" and written["jitter"] == 0.1
    assert any(p.suffix == ".pgm" for p in (tmp_path / "p").rglob("*"))
    spec.write_text(json.dumps({"wobble": 1}))
    assert main(["phantom", "--spec", str(spec), "--out", str(tmp_path / "q")]) == EXIT_INVALID


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "condyletraj", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout


def test_metrics_summary_over_twenty_reports(tmp_path, capsys):
    import random

    from condyletraj.metrics import QualityRow, report_csv

    rnd = random.Random(20)
    rows, paths = [], []
    for n in range(20):
        subj = f"P{n:02d}"
        if n % 7 == 3:
            mine = [QualityRow(subj, s, excluded_reason="No full opening-closing cycle") for s in "LR"]
        else:
            dk = round(rnd.uniform(-3, 3), 3)
            mine = [QualityRow(subj, s, round(rnd.uniform(0.9, 1.1), 4), round(rnd.uniform(0, 0.5), 4),
                               round(rnd.uniform(0, 2.7), 4), dk, None, round(rnd.uniform(10, 18), 3), False)
                    for s in "LR"]
        rows += mine
        p = tmp_path / f"{subj}.csv"
        p.write_text(report_csv(mine))
        paths.append(str(p))
    assert main(["metrics", *paths, "--out", str(tmp_path / "m")]) == EXIT_EXCLUDED
    summary = (tmp_path / "m" / "summary.txt").read_text()
    inc = [r for r in rows if not r.excluded_reason]
    for name in ("ratio", "msd_mm", "d_init_fin_mm", "displacement_mm"):
        vals = [getattr(r, name) for r in inc]
        line = next(ln for ln in summary.splitlines() if ln.startswith(name + ":"))
        mean = float(line.split("mean ")[1].split()[0])
        lo, hi = (float(v) for v in line.split("[")[1].rstrip("]").split(", "))
        assert mean == pytest.approx(sum(vals) / len(vals), rel=1e-5)
        assert (lo, hi) == (pytest.approx(min(vals), rel=1e-5), pytest.approx(max(vals), rel=1e-5))
    n_excl = len({r.subject for r in rows if r.excluded_reason})
    assert f"subjects: 20 (included {20 - n_excl}, excluded {n_excl})" in summary
    dks = [r.delta_k_lr_mm for r in inc if r.side == "L"]
    abs_line = next(ln for ln in summary.splitlines() if ln.startswith("abs_delta_k_lr_mm:"))
    assert float(abs_line.split("mean ")[1]) == pytest.approx(sum(map(abs, dks)) / len(dks), rel=1e-5)
