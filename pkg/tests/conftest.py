"""Shared fixtures.

Every ``sparse_code`` call made anywhere in the suite (directly or through
grouping, temporal measures, clustering, learning or the pipeline) is
checked against the nonnegative-lasso KKT conditions at the solver
tolerance; a violation fails the calling test.  The tally is printed at
the end of the session.
"""

import csv

import numpy as np
import pytest

import actiongroup.grouping as grouping
import actiongroup.sparse_model as sm
from actiongroup.ingest import FrameSequence, write_frames

KKT_TOL = 1e-6
KKT_TALLY = {"calls": 0, "columns": 0, "worst": 0.0}
ACCEPTANCE = {}  # criterion number -> summary line

_solver = sm.sparse_code


def _certified_sparse_code(X, D, cfg=None):
    codes = _solver(X, D, cfg)
    cfg = cfg or sm.SolverConfig()
    viol = sm.kkt_violation(X, D, codes, cfg.lam)
    worst = float(viol.max()) if viol.size else 0.0
    KKT_TALLY["calls"] += 1
    KKT_TALLY["columns"] += int(viol.size)
    KKT_TALLY["worst"] = max(KKT_TALLY["worst"], worst)
    tol = max(cfg.kkt_tol, KKT_TOL)
    if worst > tol:
        raise AssertionError(f"sparse_code result violates KKT: {worst:.3e} > {tol:.0e}")
    return codes


def pytest_configure(config):
    sm.sparse_code = _certified_sparse_code
    grouping.sparse_code = _certified_sparse_code


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
    t = KKT_TALLY
    status = "PASS" if t["worst"] <= KKT_TOL else "FAIL"
    terminalreporter.write_line(
        f"[criterion 3] KKT certification (whole session): {status} - {t['calls']} sparse_code calls, "
        f"{t['columns']} columns, worst violation {t['worst']:.2e} (tol {KKT_TOL:.0e})"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_video(root, fps=10.0, frames=20):
    """Three blobs on a 120x48 canvas: persons 1 and 2 sway horizontally,
    person 3 bobs vertically.  Writes PGM frames and a box CSV."""
    H, W = 48, 120
    pix = np.zeros((frames, H, W))
    yy, xx = np.mgrid[0:H, 0:W]
    rows = []
    for p, cx in enumerate([20, 60, 100]):
        for f in range(frames):
            if p < 2:
                x, y = cx + 6 * np.sin(f * 0.9 + p), 24
            else:
                x, y = cx, 24 + 6 * np.sin(f * 0.9)
            pix[f] += 0.8 * np.exp(-(((xx - x) / 4) ** 2 + ((yy - y) / 6) ** 2))
            rows.append((f, p + 1, cx - 18, 4, 36, 40))
    write_frames(FrameSequence(np.clip(pix, 0, 1), fps), root / "frames")
    with open(root / "boxes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "person", "x", "y", "w", "h"])
        w.writerows(rows)
    return root


VIDEO_CONFIG = {
    "input": {"frames": "frames", "masks": "boxes.csv", "persons": 3, "fps": 10},
    "dictionary_size": 8,
    "features": {"spatial_extent": 7, "temporal_extent": 3, "eta": 0.05},
}


@pytest.fixture
def video_dir(tmp_path):
    return make_video(tmp_path)
