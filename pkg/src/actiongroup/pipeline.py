"""End-to-end runs behind the command line: group, change, cluster, synth,
oracle-check.

Each run reads a :class:`~actiongroup.config.PipelineConfig`, writes its
files into an output directory and returns the summary it wrote.  Every
JSON file carries the resolved configuration and seed; CSV files start with
a ``#`` provenance line and SVG files hold it in their description.

Work is split into independent (person, interval) units and, with
``threads > 1``, evaluated on a thread pool.  Results are always collected
in unit order, so the output does not depend on the thread count.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import plotting
from .config import PipelineConfig
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateMeasureError,
    NumericalDegeneracyError,
)
from .features import (
    detect_interest_points,
    dilate_mask,
    equalize_patch_counts,
    extract_patchset,
    subsample_indices,
    temporal_gradient,
)
from .grouping import binarize, connected_components, loo_code, similarity_matrix, spatial_threshold
from .ingest import load_frames, load_masks, slice_intervals
from .spatiotemporal import cluster_entities, learn_unit, make_entities
from .synth import Scenario, generate, oracle_nn_lasso
from .temporal import (
    RStarCache,
    change_profile,
    change_vector,
    pair_measure_space,
    pair_measure_time,
)
from .tensorio import write_matrix_csv, write_tensor

__all__ = [
    "IntervalData",
    "collect_intervals",
    "run_group",
    "run_change",
    "run_cluster",
    "run_synth",
    "run_oracle_check",
    "RUNNERS",
]


@dataclass
class IntervalData:
    """Equalized patch sets of the persons present in one interval."""

    index: int
    patchsets: dict  # person id -> PatchSet
    absent: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)  # person id -> interest points found

    @property
    def present(self) -> list:
        return sorted(self.patchsets)


@contextmanager
def _mapper(cfg: PipelineConfig):
    if cfg.threads == 1:
        yield map
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            yield pool.map


def _provenance(cfg: PipelineConfig) -> dict:
    return {"seed": int(cfg.seed), "config": cfg.resolved()}


def _write_json(path: Path, doc: dict, cfg: PipelineConfig) -> None:
    doc = {**doc, **_provenance(cfg)}
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _write_csv(path: Path, M, labels, cfg: PipelineConfig) -> None:
    write_matrix_csv(path, M, labels, labels)
    body = path.read_text()
    path.write_text("# " + json.dumps(_provenance(cfg), sort_keys=True) + "\n" + body)


def _scenario(cfg: PipelineConfig) -> Scenario:
    src = cfg.input.scenario
    if isinstance(src, dict):
        doc = dict(src)
    else:
        try:
            with open(src) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read scenario {src}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario {src} is not valid JSON: {exc}") from exc
    # the master seed drives generation as well
    doc["seed"] = int(cfg.seed)
    try:
        return Scenario(**doc)
    except TypeError as exc:
        raise ConfigurationError(f"scenario: {exc}") from exc


def _present(sets: dict, k: int, index: int, n_max: int, seed: int, counts: dict) -> IntervalData:
    present = {pid: ps for pid, ps in sets.items() if ps.n >= k}
    absent = sorted(set(counts) - set(present))
    equal = equalize_patch_counts([present[p] for p in sorted(present)], n_max, seed)
    return IntervalData(index, {ps.person_id: ps for ps in equal}, absent, counts)


def _synthetic_intervals(cfg: PipelineConfig) -> list:
    scn = _scenario(cfg)
    data = generate(scn)
    k = cfg.dictionary_size
    out = []
    for t in range(scn.n_intervals):
        sets = {pid: ps for (pid, tt), ps in data.patchsets.items() if tt == t}
        counts = {p + 1: (sets[p + 1].n if p + 1 in sets else 0) for p in range(scn.n_persons)}
        out.append(_present(sets, k, t, cfg.features.n_max, cfg.seed, counts))
    return out


def _video_intervals(cfg: PipelineConfig, seconds: float) -> list:
    inp, fcfg, k = cfg.input, cfg.features, cfg.dictionary_size
    if inp.frames is None or inp.masks is None:
        raise ConfigurationError("input.frames and input.masks (or input.scenario) are required")
    if inp.persons is None:
        raise ConfigurationError("input.persons is required with video input")
    frames = load_frames(inp.frames, inp.fps, inp.temporal_subsample)
    masks = load_masks(inp.masks, inp.persons, frames.frame_count, frames.width, frames.height)
    intervals = slice_intervals(frames, seconds)
    if not intervals:
        raise DataError(f"{frames.frame_count} frames do not fill one {seconds}s interval")
    out = []
    for iv in intervals:
        grad = temporal_gradient(frames.window(iv))
        points = {}
        for mask in masks:
            grown = dilate_mask(mask.window(iv), fcfg.dilation_radius)
            points[mask.person_id] = detect_interest_points(grad, grown, fcfg)
        counts = {pid: len(p) for pid, p in points.items()}
        present = [pid for pid, c in counts.items() if c >= k]
        sets = {}
        if present:
            n = min(min(counts[p] for p in present), fcfg.n_max)
            for pid in present:
                idx = subsample_indices(counts[pid], n, cfg.seed, pid, iv.index)
                sets[pid] = extract_patchset(grad, points[pid].take(idx), fcfg, interval=iv.index)
        out.append(IntervalData(iv.index, sets, sorted(set(counts) - set(present)), counts))
    return out


def collect_intervals(cfg: PipelineConfig, kind: str) -> list:
    """Per-interval patch sets for interval length ``interval_seconds[kind]``.

    Persons with fewer than ``dictionary_size`` interest points in an
    interval are reported absent there; the others are equalized.
    """
    if cfg.input.scenario is not None:
        return _synthetic_intervals(cfg)
    return _video_intervals(cfg, cfg.interval_seconds[kind])


def _learn_all(cfg: PipelineConfig, intervals: list, map_fn) -> dict:
    units = [iv.patchsets[pid] for iv in intervals for pid in iv.present]
    k, solver = cfg.dictionary_size, cfg.solver
    dicts = map_fn(lambda ps: learn_unit(ps, k, solver, cfg.seed), units)
    return {(ps.person_id, ps.interval): d for ps, d in zip(units, dicts)}


def _prepare(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _floats(values) -> list:
    return [float(v) for v in values]


# -- group -----------------------------------------------------------------


def _group_interval(cfg, iv: IntervalData, dicts: dict, map_fn, out: Path) -> dict:
    ids = iv.present
    rec = {"interval": iv.index, "persons": ids, "absent": iv.absent, "tau": None,
           "groups": [], "warnings": []}
    if iv.absent:
        rec["warnings"].append(f"absent (fewer than {cfg.dictionary_size} interest points): {iv.absent}")
    ps = {pid: iv.patchsets[pid] for pid in ids}
    ds = {pid: dicts[(pid, iv.index)] for pid in ids}
    if not ids:
        rec["mode"] = "skipped"
        rec["warnings"].append("no person present; interval skipped")
        warnings.warn(f"interval {iv.index}: no person present; skipped", RuntimeWarning, stacklevel=2)
    elif len(ids) == 1:
        rec["mode"] = "single"
        rec["groups"] = [ids]
    elif len(ids) == 2:
        rec["mode"] = "pair"
        try:
            pm = pair_measure_space(ids[0], ids[1], ps, ds, cfg.solver, cfg.grouping)
        except DegenerateMeasureError as exc:
            rec["warnings"].append(str(exc))
            rec["groups"] = None
        else:
            rec["tau"] = pm.mu
            rec["pair_measure"] = pm.to_json()
            rec["groups"] = [[ids[0]], [ids[1]]] if pm.different else [ids]
    else:
        rec["mode"] = "loo"
        codes = dict(zip(ids, map_fn(lambda pid: loo_code(pid, ps, ds, cfg.solver), ids)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            S = similarity_matrix(codes)
        adj = binarize(S, len(ids), cfg.grouping)
        res = connected_components(adj, ids)
        rec["tau"] = spatial_threshold(cfg.grouping.r, len(ids))
        rec["groups"] = res.partition
        rec["warnings"].extend(S.warnings)
        rec["similarity"] = [_floats(row) for row in S.values]
        stem = f"t{iv.index:03d}"
        _write_csv(out / f"similarity_{stem}.csv", S.values, ids, cfg)
        _write_csv(out / f"adjacency_{stem}.csv", adj.astype(np.int64), ids, cfg)
        plotting.plot_matrix(S.values, ids, out / f"similarity_{stem}.svg",
                             title=f"interval {iv.index}, tau = {rec['tau']:.3f}",
                             description=json.dumps(_provenance(cfg), sort_keys=True))
    _write_json(out / f"group_t{iv.index:03d}.json", rec, cfg)
    return rec


def run_group(cfg: PipelineConfig, out_dir) -> dict:
    """Per-interval action groups of the persons present."""
    out = _prepare(out_dir)
    with _mapper(cfg) as map_fn:
        intervals = collect_intervals(cfg, "space")
        dicts = _learn_all(cfg, intervals, map_fn)
        records = [_group_interval(cfg, iv, dicts, map_fn, out) for iv in intervals]
    summary = {"command": "group", "intervals": records}
    _write_json(out / "group.json", summary, cfg)
    return summary


# -- change ----------------------------------------------------------------


def _change_pair(cfg, prev: IntervalData, cur: IntervalData, dicts, cache, out: Path) -> dict:
    ids = sorted(set(prev.present) & set(cur.present))
    missing = sorted((set(prev.present) | set(cur.present) | set(prev.absent) | set(cur.absent)) - set(ids))
    pair = [prev.index, cur.index]
    rec = {"pair": pair, "persons": ids, "absent": missing, "warnings": []}
    xp = {p: prev.patchsets[p] for p in ids}
    xc = {p: cur.patchsets[p] for p in ids}
    dp = {p: dicts[(p, prev.index)] for p in ids}
    dc = {p: dicts[(p, cur.index)] for p in ids}
    cache.prefetch([(x, d) for p in ids for x in (xp[p], xc[p]) for d in (dp[p], dc[p])])
    if len(ids) >= 3:
        cv = change_vector(xp, xc, dp, dc, cfg.solver, cfg.grouping, cache, pair=pair)
        rec.update({"mode": "vector", **cv.to_json()})
        rec["C"] = float(cv.C)
        if cv.C == 0:
            rec["warnings"].append("all change energies are zero; nothing changed")
    elif len(ids) == 2:
        rec["mode"] = "pair"
        rec["measures"], rec["changed"] = [], []
        for p in ids:
            try:
                pm = pair_measure_time(p, xp, xc, dp, dc, cfg.solver, cfg.grouping, cache)
            except DegenerateMeasureError as exc:
                rec["warnings"].append(str(exc))
                continue
            rec["measures"].append(pm.to_json())
            if pm.different:
                rec["changed"].append(p)
    else:
        rec["mode"] = "skipped"
        rec["changed"] = []
        rec["warnings"].append("fewer than two persons present in both intervals")
    _write_json(out / f"change_t{prev.index:03d}_t{cur.index:03d}.json", rec, cfg)
    return rec


def run_change(cfg: PipelineConfig, out_dir) -> dict:
    """Who changed action between consecutive intervals."""
    out = _prepare(out_dir)
    with _mapper(cfg) as map_fn:
        intervals = collect_intervals(cfg, "time")
        if len(intervals) < 2:
            raise DataError("only one interval: nothing to compare")
        dicts = _learn_all(cfg, intervals, map_fn)
        cache = RStarCache(cfg.solver, map_fn=map_fn)
        reports = [_change_pair(cfg, a, b, dicts, cache, out)
                   for a, b in zip(intervals, intervals[1:])]
        persons = sorted({p for iv in intervals for p in list(iv.patchsets) + iv.absent})
        profiles = {}
        for p in persons:
            xs = [iv.patchsets.get(p) for iv in intervals]
            ds = [dicts.get((p, iv.index)) for iv in intervals]
            vals = change_profile(p, xs, ds, cfg.solver, cache)
            profiles[str(p)] = [None if v is None else float(v) for v in vals]
    summary = {"command": "change", "reports": reports, "profiles": profiles,
               "solves": cache.solves}
    _write_json(out / "change.json", summary, cfg)
    return summary


# -- cluster ---------------------------------------------------------------


def run_cluster(cfg: PipelineConfig, out_dir) -> dict:
    """Joint space-time clustering of all (person, interval) entities."""
    out = _prepare(out_dir)
    cc = cfg.clustering
    with _mapper(cfg) as map_fn:
        intervals = collect_intervals(cfg, "cluster")
        patchsets = {(p, iv.index): iv.patchsets[p] for iv in intervals for p in iv.present}
        absent = [[p, iv.index] for iv in intervals for p in iv.absent]
        if len(patchsets) < 2:
            raise DataError(f"{len(patchsets)} entities present; clustering needs at least 2")
        entities = make_entities(patchsets, cfg.dictionary_size, cfg.solver, cfg.seed, map_fn)
        cache = RStarCache(cfg.solver, map_fn=map_fn)
        res = cluster_entities(entities, cfg.solver, cc.K, cc.C_max, cc.slack,
                               cc.min_eigenvalue, cache)
    doc = res.to_json()
    timeline = {
        "command": "cluster",
        "entities": doc["entities"],
        "C": doc["C"],
        "params": {"K": cc.K, "C_max": cc.C_max, "slack": cc.slack,
                   "min_eigenvalue": cc.min_eigenvalue, "lam": cfg.solver.lam,
                   "dictionary_size": cfg.dictionary_size},
        "costs": doc["costs"],
        "eigenvalues": _floats(res.eigenvalues[: cc.C_max + 1]),
        "excluded": doc["excluded"],
        "absent": absent,
        "warnings": doc["warnings"],
    }
    labels = [f"{p}:{t}" for p, t in res.entities]
    _write_csv(out / "dissimilarity.csv", res.E, labels, cfg)
    _write_csv(out / "affinity.csv", res.W, labels, cfg)
    plotting.plot_timeline(timeline["entities"], out / "timeline.svg",
                           title=f"C = {res.C}",
                           description=json.dumps(_provenance(cfg), sort_keys=True))
    _write_json(out / "cluster.json", timeline, cfg)
    return timeline


# -- synth -----------------------------------------------------------------


def run_synth(cfg: PipelineConfig, out_dir) -> dict:
    """Generate a scenario and write its patch sets as tensor files."""
    if cfg.input.scenario is None:
        raise ConfigurationError("synth needs input.scenario")
    out = _prepare(out_dir)
    scn = _scenario(cfg)
    data = generate(scn)
    files = []
    for (pid, t), ps in sorted(data.patchsets.items()):
        name = f"X_p{pid}_t{t:03d}.agt"
        write_tensor(out / name, ps.data)
        files.append({"person": pid, "interval": t, "action": data.labels[(pid, t)],
                      "file": name, "shape": list(ps.data.shape)})
    bases = []
    for a, B in sorted(data.bases.items()):
        name = f"basis_a{a}.agt"
        write_tensor(out / name, B)
        bases.append({"action": a, "file": name})
    summary = {"command": "synth", "scenario": scn.to_json(), "patchsets": files, "bases": bases}
    _write_json(out / "synth.json", summary, cfg)
    return summary


# -- oracle-check ------------------------------------------------------------


def oracle_instances(cfg: PipelineConfig):
    """Seeded random nonnegative-lasso instances ``(x, D, lam)``."""
    oc = cfg.oracle
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed)))
    for i in range(oc.instances):
        m = int(rng.integers(1, oc.m_max + 1))
        k = int(rng.integers(1, oc.k_max + 1))
        D = rng.random((m, k))
        D /= np.maximum(np.linalg.norm(D, axis=0), 1e-12)
        x = rng.random(m) * rng.uniform(0.2, 2.0)
        yield x, D, oc.lams[i % len(oc.lams)]


def run_oracle_check(cfg: PipelineConfig, out_dir) -> dict:
    """Compare the coding solver with the exhaustive oracle.

    Raises :class:`NumericalDegeneracyError` after writing the report when
    any instance misses the relative tolerance or the KKT conditions.
    """
    from .sparse_model import kkt_violation, objective, sparse_code

    out = _prepare(out_dir)
    rows = []
    for i, (x, D, lam) in enumerate(oracle_instances(cfg)):
        scfg = replace(cfg.solver, lam=lam)
        X = x[:, None]
        codes = sparse_code(X, D, scfg)
        a_star = oracle_nn_lasso(x, D, lam)
        f_solver = objective(X, D, codes.coeffs, lam)
        f_oracle = objective(X, D, a_star[:, None], lam)
        gap = (f_solver - f_oracle) / max(abs(f_oracle), 1e-12)
        kkt = float(kkt_violation(X, D, codes.coeffs, lam).max())
        rows.append({"instance": i, "m": D.shape[0], "k": D.shape[1], "lam": lam,
                     "solver": float(f_solver), "oracle": float(f_oracle),
                     "rel_gap": float(gap), "kkt": kkt,
                     "pass": bool(gap <= cfg.oracle.rel_tol and kkt <= cfg.solver.kkt_tol)})
    failed = [r["instance"] for r in rows if not r["pass"]]
    summary = {"command": "oracle-check", "instances": len(rows), "failed": failed,
               "max_rel_gap": max(r["rel_gap"] for r in rows),
               "max_kkt": max(r["kkt"] for r in rows), "results": rows}
    _write_json(out / "oracle_check.json", summary, cfg)
    if failed:
        raise NumericalDegeneracyError(f"{len(failed)} of {len(rows)} oracle instances failed")
    return summary


RUNNERS = {
    "group": run_group,
    "change": run_change,
    "cluster": run_cluster,
    "synth": run_synth,
    "oracle-check": run_oracle_check,
}
