"""Command-line experiment runner.

Every subcommand builds an :class:`ExperimentConfig`, expands it into grid
cells, runs the cells (optionally on a thread pool) and writes one report.
Each row carries the config hash, the cell seed derived from the master seed
and the package version, so any number can be traced back to its cell.

Exit codes: 0 success, 2 bad config, 3 a resource cap was hit, 4 a numerical
integrity check failed.  Failures inside one cell become rows with a
``status`` message; the exit code reports the worst one.
"""
from __future__ import annotations

import argparse
import ast
import csv
import hashlib
import io
import itertools
import json
import math
import operator
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from .dla import lie_closure, lie_closure_dense, GeneratorError, InvarianceError as DlaInvarianceError
from .models import MODEL_NAMES, ModelError, build_model, default_layers, er_graph
from .moments import (ModeError, NonContractingError, depth_for_epsilon, expressibility_norm,
                      haar_second_moment, layer_moment)
from .pauli import CapacityError, DimensionError
from .sim import IntegrityError, SlotError
from .symmetry import IncompatibleLabelsError, InvarianceError
from .variance import (CSV_COLUMNS, DegenerateSectorError, PreconditionError, algebra_dimensions,
                       classify_scaling, corollary_bound, estimate, fit_observation,
                       su2_variance_prediction, theoretical_variance)

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_INTEGRITY = 0, 2, 3, 4

KINDS = ("dla-sweep", "variance-sweep", "theory-compare", "moments", "su2", "er-ensemble",
         "full-reproduction")
SUBCOMMANDS = {"dla": "dla-sweep", "variance": "variance-sweep", "theory": "theory-compare",
               "moments": "moments", "su2": "su2", "graph": "er-ensemble",
               "reproduce": "full-reproduction"}
FORMATS = ("csv", "json", "svg")
PROVENANCE = ("cell_seed", "config_hash", "version", "status")

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "seed"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "model": {"type": "string"},
        "n": {"type": "array", "minItems": 1,
              "items": {"type": "integer", "minimum": 1}},
        "layers": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "string"},
                             {"type": "array", "minItems": 1,
                              "items": {"oneOf": [{"type": "integer", "minimum": 1},
                                                  {"type": "string"}]}}]},
        "grid": {"type": "object",
                 "additionalProperties": {"type": "array", "minItems": 1}},
        "params": {"type": "object"},
        "mu": {"type": "array", "items": {"type": "integer", "minimum": 1},
               "minItems": 2, "maxItems": 2},
        "n_samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "graph_seeds": {"type": "array", "minItems": 1,
                        "items": {"type": "integer", "minimum": 0}},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": ["string", "null"]},
        "format": {"enum": list(FORMATS)},
        "paper_scale": {"type": "boolean"},
    },
}

# Reference sample counts and grids, used only with --paper-scale.
PAPER_SCALE = {
    "hea": {"n": list(range(2, 21, 2)), "n_samples": 1000},
    "xxz_c": {"n": list(range(2, 21, 2)), "n_samples": 9500},
    "xxz_u": {"n": list(range(2, 21, 2)), "n_samples": 9500},
    "tfim": {"n": list(range(2, 21, 2)), "n_samples": 2000},
    "ltfim": {"n": list(range(2, 21, 2)), "n_samples": 2000},
    "er_qaoa": {"n": list(range(4, 21, 2)), "n_samples": 3000, "graphs": 90},
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# -- config --------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    model: str | None = None
    n: list[int] = field(default_factory=list)
    layers: Any = None
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    mu: list[int] | None = None
    n_samples: int = 2000
    graph_seeds: list[int] | None = None
    workers: int = 1
    out: str | None = None
    format: str = "csv"
    paper_scale: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(e.message, path)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.kind != "full-reproduction":
            if self.model is None and self.kind not in ("su2", "er-ensemble"):
                raise ConfigError("a model is required", "model")
            if self.model is not None and self.model not in MODEL_NAMES:
                raise ConfigError(f"unknown model {self.model!r}", "model")
            if not self.n:
                raise ConfigError("parameter grid is empty", "n")
            for n in self.n:
                for L in layer_values(self.layers, n):
                    if L < 1:
                        raise ConfigError(f"layer rule gives {L} for n={n}", "layers")
        if self.format == "svg" and not self.out:
            raise ConfigError("svg output needs a path", "out")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of the numerically relevant fields (not output path or workers)."""
        d = self.to_dict()
        for k in ("out", "format", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.FloorDiv: operator.floordiv}


def eval_rule(rule, n: int):
    """Evaluate an integer or a small arithmetic rule in ``n`` such as ``"6n"`` or ``"n/2"``."""
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        return rule
    text = str(rule).strip().replace(" ", "")
    if text == "S":
        return text
    # implicit products: "6n" -> "6*n"
    expr = "".join(c if not (c == "n" and i and text[i - 1].isdigit()) else "*n"
                   for i, c in enumerate(text))
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse rule {rule!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "n":
            return n
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ConfigError(f"unsupported token in rule {rule!r}")

    val = ev(tree)
    return int(val) if float(val).is_integer() else val


def layer_values(rule, n: int) -> list[int]:
    if rule is None:
        return []
    rules = rule if isinstance(rule, list) else [rule]
    out = []
    for r in rules:
        v = eval_rule(r, n)
        if not isinstance(v, int):
            raise ConfigError(f"layer rule {r!r} is not an integer for n={n}", "layers")
        out.append(v)
    return out


def cell_seed(master: int, coords: dict) -> int:
    blob = json.dumps([master, coords], sort_keys=True, default=str).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


# -- cells ---------------------------------------------------------------------

def _grid_cells(cfg: ExperimentConfig) -> list[dict]:
    keys = sorted(cfg.grid)
    cells = []
    for n in cfg.n:
        for combo in itertools.product(*(cfg.grid[k] for k in keys)):
            params = dict(cfg.params)
            for k, v in zip(keys, combo):
                params[k] = v
            cells.append({"n": n, "params": params})
    return cells


def _model_params(params: dict, n: int) -> tuple[str, dict]:
    p = dict(params)
    boundary = p.pop("boundary", "open")
    for k in ("m",):
        if k in p:
            p[k] = eval_rule(p[k], n)
    return boundary, p


def _status_of(exc: BaseException) -> tuple[str, int]:
    if isinstance(exc, (CapacityError, DimensionError, MemoryError)):
        return f"capacity: {exc}", EXIT_CAPACITY
    if isinstance(exc, (IntegrityError, InvarianceError, DlaInvarianceError, PreconditionError,
                        NonContractingError, DegenerateSectorError)):
        return f"integrity: {exc}", EXIT_INTEGRITY
    if isinstance(exc, (ModelError, GeneratorError, SlotError, ModeError, ConfigError,
                        IncompatibleLabelsError, ValueError)):
        return f"config: {exc}", EXIT_CONFIG
    raise exc


def _run_dla(cfg, cell, seed):
    boundary, p = _model_params(cell["params"], cell["n"])
    cap = p.pop("max_dim", None)
    model = build_model(cfg.model, cell["n"], boundary, **p)
    if model.dense:
        alg = lie_closure_dense(list(model.generators), max_dim=cap, model=model.name)
    else:
        alg = lie_closure(list(model.generators), max_dim=cap, model=model.name)
    row = {"model": model.name, "n": model.n, "boundary": model.boundary,
           "dimension": alg.dimension, "rounds": alg.rounds, "truncated": alg.truncated}
    sector = model.sector()
    if sector is not None and not alg.truncated:
        from .dla import restricted_algebra_dimension
        row["sector"] = sector.label_text
        row["d_k"] = sector.d_k
        row["dim_g_sub"] = restricted_algebra_dimension(alg, sector)
    return [row]


def _mu(cfg):
    return tuple(cfg.mu) if cfg.mu else None


def _run_variance(cfg, cell, seed):
    boundary, p = _model_params(cell["params"], cell["n"])
    model = build_model(cfg.model, cell["n"], boundary, **p)
    rows = []
    for L in layer_values(cfg.layers, cell["n"]) or [default_layers(model)]:
        est = estimate(model, L, _mu(cfg), cfg.n_samples, seed, workers=1)
        row = est.to_row()
        row.update({k: v for k, v in cell["params"].items() if k not in row})
        rows.append(row)
    return rows


def _run_theory(cfg, cell, seed):
    boundary, p = _model_params(cell["params"], cell["n"])
    model = build_model(cfg.model, cell["n"], boundary, **p)
    sector = model.sector()
    L = (layer_values(cfg.layers, cell["n"]) or [default_layers(model)])[0]
    mu = _mu(cfg) or model.default_mu(L)
    dims = algebra_dimensions(model, sector)
    return [{"model": model.name, "n": model.n, "boundary": model.boundary,
             "sector": sector.label_text if sector is not None else "full",
             "d_k": sector.d_k if sector is not None else model.dimension,
             "mu_layer": mu[0], "mu_gen": mu[1],
             "theory": theoretical_variance(model, sector, mu),
             "bound": corollary_bound(model, sector, mu),
             "dim_g": dims.dim_g, "dim_g_sub": dims.dim_g_sub, "full_rank": dims.full_rank,
             "dims_from": dims.provenance}]


def _run_moments(cfg, cell, seed):
    boundary, p = _model_params(cell["params"], cell["n"])
    mode = p.pop("mode", "exact")
    model = build_model(cfg.model, cell["n"], boundary, **p)
    one = layer_moment(model.generators, mode, cfg.n_samples, seed)
    haar = haar_second_moment(one.d)
    n1 = expressibility_norm(one, haar)
    rows = []
    for L in layer_values(cfg.layers, cell["n"]) or [1, 2, 3, 4]:
        norm = expressibility_norm(one.power(L), haar)
        row = {"model": model.name, "n": model.n, "d": one.d, "L": L, "mode": mode,
               "norm": norm, "single_layer_norm": n1, "product_law": n1 ** L,
               "samples": one.samples, "se": one.se}
        try:
            row["depth_for_norm"] = depth_for_epsilon(n1, norm) if 0 < norm < 1 else None
        except NonContractingError:
            row["depth_for_norm"] = None
        rows.append(row)
    return rows


def _run_su2(cfg, cell, seed):
    d = cell["n"]
    p = dict(cell["params"])
    m = p.get("m", "S")
    m = (d - 1) / 2 if m == "S" else float(_fraction(m))
    normalized = bool(p.get("normalized", False))
    model = build_model("su2_toy", d, m=m, normalized=normalized)
    L = (layer_values(cfg.layers, d) or [default_layers(model)])[0]
    est = estimate(model, L, _mu(cfg), cfg.n_samples, seed, with_theory=False, with_dims=False)
    est.theory = su2_variance_prediction(d, m, normalized)
    row = est.to_row()
    row.update({"d": d, "m": m, "normalized": normalized})
    return [row]


def _fraction(v):
    if isinstance(v, str) and "/" in v:
        a, b = v.split("/")
        return float(a) / float(b)
    return float(v)


def _run_er(cfg, cell, seed):
    n = cell["n"]
    graph_seed = cell["params"]["graph_seed"]
    p = {k: v for k, v in cell["params"].items() if k != "graph_seed"}
    model = build_model("er_qaoa", n, seed=graph_seed, **p)
    L = (layer_values(cfg.layers, n) or [default_layers(model)])[0]
    est = estimate(model, L, _mu(cfg), cfg.n_samples, seed)
    row = est.to_row()
    row.update({"graph_seed": graph_seed, "edges": len(er_graph(n, graph_seed))})
    return [row]


RUNNERS = {"dla-sweep": _run_dla, "variance-sweep": _run_variance,
           "theory-compare": _run_theory, "moments": _run_moments, "su2": _run_su2,
           "er-ensemble": _run_er}


def _expand(cfg: ExperimentConfig) -> list[dict]:
    if cfg.kind == "er-ensemble":
        params = dict(cfg.params)
        given = params.pop("seed", None)
        seeds = cfg.graph_seeds or given or list(range(10))
        seeds = [seeds] if isinstance(seeds, int) else list(seeds)
        cfg = ExperimentConfig(**{**cfg.to_dict(), "params": params,
                                  "grid": {**cfg.grid, "graph_seed": seeds}})
    return _grid_cells(cfg)


def run_cells(cfg: ExperimentConfig) -> tuple[list[dict], int]:
    """Rows of every cell in grid order plus the worst exit code met."""
    cells = _expand(cfg)
    runner = RUNNERS[cfg.kind]
    digest = cfg.digest()

    def one(cell):
        seed = cell_seed(cfg.seed, cell)
        try:
            rows, status, code = runner(cfg, cell, seed), "ok", EXIT_OK
        except Exception as exc:  # noqa: BLE001 - sorted into statuses, others re-raised
            status, code = _status_of(exc)
            rows = [{"model": cfg.model, "n": cell["n"], **cell["params"]}]
        for r in rows:
            r.update({"cell_seed": seed, "config_hash": digest, "version": __version__,
                      "status": status})
        return rows, code

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(c) for c in cells]
    rows = [r for rs, _ in results for r in rs]
    worst = max((c for _, c in results), default=EXIT_OK)
    return rows, worst


# -- reports -------------------------------------------------------------------

def _columns(rows: Sequence[dict], kind: str | None = None) -> list[str]:
    if not rows:
        base = list(CSV_COLUMNS) if kind in (None, "variance-sweep") else []
        return base + list(PROVENANCE)
    cols: list[str] = []
    preferred = [c for c in CSV_COLUMNS if any(c in r for r in rows)]
    for c in preferred:
        cols.append(c)
    for r in rows:
        for k in r:
            if k not in cols and k not in PROVENANCE:
                cols.append(k)
    return cols + [c for c in PROVENANCE if any(c in r for r in rows)]


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    cols = list(columns) if columns is not None else _columns(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def rows_to_json(rows: Sequence[dict]) -> str:
    return json.dumps([{k: _jsonable(v) for k, v in r.items()} for r in rows], indent=1)


def emit_report(rows: Sequence[dict], fmt: str, path: str | None, kind: str | None = None) -> str:
    """Write rows as csv, json or svg; returns the text written (svg: the file path)."""
    if fmt == "csv":
        text = rows_to_csv(rows, _columns(rows, kind))
    elif fmt == "json":
        text = rows_to_json(rows)
    elif fmt == "svg":
        if not path:
            raise ConfigError("svg output needs a path", "out")
        render_svg(rows, path)
        return path
    else:
        raise ConfigError(f"unknown format {fmt!r}", "format")
    if path:
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write report: {exc}", "out") from exc
    return text


def render_svg(rows: Sequence[dict], path: str) -> None:
    """Variance against n (log-linear) and against 1/dim (log-log), with fit lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "plateaulab"
    good = [r for r in rows if r.get("status", "ok") == "ok" and r.get("variance")]
    series: dict[tuple, list[dict]] = {}
    for r in good:
        key = (r.get("model"), r.get("boundary"), r.get("sector") if r.get("model", "").startswith("xxz") else "")
        series.setdefault(key, []).append(r)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for key, rs in sorted(series.items(), key=lambda kv: str(kv[0])):
        rs = sorted(rs, key=lambda r: (r.get("n") or r.get("d") or 0))
        label = " ".join(str(k) for k in key if k)
        x = np.array([r.get("n") or r.get("d") for r in rs], dtype=float)
        y = np.array([r["variance"] for r in rs], dtype=float)
        ax1.semilogy(x, y, "o", label=label)
        if len(x) >= 2:
            c = np.polyfit(x, np.log(y), 1)
            ax1.semilogy(x, np.exp(np.polyval(c, x)), "--", lw=0.8)
        dims = np.array([r.get("dim_g_sub") or np.nan for r in rs], dtype=float)
        ok = np.isfinite(dims) & (dims > 0)
        if ok.sum():
            ax2.loglog(1 / dims[ok], y[ok], "o", label=label)
            if ok.sum() >= 3:
                fit = fit_observation(list(zip(dims[ok], y[ok])))
                xs = 1 / dims[ok]
                ax2.loglog(xs, np.exp(fit.intercept) * xs ** fit.slope, "--", lw=0.8)
    ax1.set_xlabel("n")
    ax1.set_ylabel("Var[dC]")
    ax2.set_xlabel("1/dim g_sub")
    ax2.set_ylabel("Var[dC]")
    if series:
        ax1.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- full reproduction ---------------------------------------------------------

def reproduction_plan(seed: int, paper_scale: bool = False) -> list[tuple[str, dict]]:
    """Desk-scale versions of every reference experiment, as named configs."""
    s = 2000
    plan = [
        ("dla_hea", {"kind": "dla-sweep", "model": "hea", "n": [2, 3, 4]}),
        ("dla_tfim", {"kind": "dla-sweep", "model": "tfim", "n": list(range(2, 9))}),
        ("dla_tfim_closed", {"kind": "dla-sweep", "model": "tfim", "n": list(range(3, 9)),
                             "params": {"boundary": "closed"}}),
        ("variance_hea", {"kind": "variance-sweep", "model": "hea", "n": [2, 3, 4, 5, 6],
                          "n_samples": s}),
        ("variance_xxz", {"kind": "variance-sweep", "model": "xxz_c", "n": [4, 6, 8, 10],
                          "grid": {"m": [1, "n/2"]}, "n_samples": s}),
        ("variance_xxz_u", {"kind": "variance-sweep", "model": "xxz_u", "n": [4, 6, 8, 10],
                            "params": {"m": "n/2"}, "n_samples": s}),
        ("variance_tfim", {"kind": "variance-sweep", "model": "tfim", "n": [4, 5, 6, 7, 8, 9, 10],
                           "n_samples": s}),
        ("variance_ltfim", {"kind": "variance-sweep", "model": "ltfim", "n": [4, 5, 6, 7, 8],
                            "n_samples": s}),
        ("er_ensemble", {"kind": "er-ensemble", "n": [4, 6, 8], "graph_seeds": list(range(10)),
                         "n_samples": 1000}),
        ("su2", {"kind": "su2", "n": [8, 16, 32], "grid": {"m": ["1/2", "S"],
                                                          "normalized": [False, True]},
                 "n_samples": 1200}),
        ("moments_hea", {"kind": "moments", "model": "hea", "n": [2], "layers": [1, 2, 3, 4]}),
    ]
    out = []
    for name, cfg in plan:
        cfg = {**cfg, "seed": seed}
        if paper_scale and cfg.get("model") in PAPER_SCALE and cfg["kind"] == "variance-sweep":
            ref = PAPER_SCALE[cfg["model"]]
            cfg.update({"n": ref["n"], "n_samples": ref["n_samples"]})
        out.append((name, cfg))
    return out


def run_experiment(cfg: ExperimentConfig) -> tuple[list[str], int]:
    """Run a config and write its report(s); returns written paths and the exit code."""
    if cfg.kind != "full-reproduction":
        rows, code = run_cells(cfg)
        text = emit_report(rows, cfg.format, cfg.out, cfg.kind)
        if cfg.out is None:
            sys.stdout.write(text)
        return ([cfg.out] if cfg.out else []), code
    outdir = cfg.out or "reproduction"
    os.makedirs(outdir, exist_ok=True)
    written, worst = [], EXIT_OK
    summary = []
    for name, sub in reproduction_plan(cfg.seed, cfg.paper_scale):
        sub_cfg = ExperimentConfig.from_dict({**sub, "workers": cfg.workers})
        rows, code = run_cells(sub_cfg)
        worst = max(worst, code)
        path = os.path.join(outdir, f"{name}.csv")
        emit_report(rows, "csv", path, sub_cfg.kind)
        written.append(path)
        if sub_cfg.kind == "variance-sweep":
            svg = os.path.join(outdir, f"{name}.svg")
            render_svg(rows, svg)
            written.append(svg)
            summary.extend(_scaling_summary(name, rows))
    path = os.path.join(outdir, "scaling.csv")
    emit_report(summary, "csv", path)
    written.append(path)
    return written, worst


def _scaling_summary(name: str, rows: Sequence[dict]) -> list[dict]:
    groups: dict[str, list[dict]] = {}
    for r in rows:
        if r.get("status") == "ok":
            groups.setdefault(str(r.get("m", "")), []).append(r)
    out = []
    for m, rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r["n"])
        entry = {"experiment": name, "m": m or None}
        if len(rs) >= 4:
            fit = classify_scaling([(r["n"], r["variance"]) for r in rs])
            entry.update({"decision": fit.decision, "score": fit.score})
        dims = [(r["dim_g_sub"], r["variance"]) for r in rs if r.get("dim_g_sub")]
        if len(dims) >= 3:
            entry["pearson_r"] = fit_observation(dims).pearson_r
        out.append(entry)
    return out


# -- argument parsing ----------------------------------------------------------

def parse_n(text: str) -> list[int]:
    """``"4,6,8"``, ``"4..10"`` or ``"4..10:2"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                rng, _, step = part.partition(":")
                a, b = rng.split("..")
                out.extend(range(int(a), int(b) + 1, int(step) if step else 1))
            elif part:
                out.append(int(part))
    except ValueError as exc:
        raise ConfigError(f"cannot parse n list {text!r}", "n") from exc
    return out


def parse_sector(text: str) -> dict:
    """``"m=1"`` or ``"m=n/2"``: the excitation count of the initial state."""
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, eq, val = part.partition("=")
        if not eq:
            raise ConfigError(f"sector label {part!r} must look like name=value", "sector")
        key = key.strip()
        if key != "m":
            raise ConfigError("only the excitation label m can be chosen; other labels are "
                              "fixed by the model's initial state", "sector")
        val = val.strip()
        out[key] = int(val) if val.lstrip("+-").isdigit() else val
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateaulab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config; flags override its fields")
        p.add_argument("--model", choices=MODEL_NAMES)
        p.add_argument("--n", help="sizes, e.g. 4,6,8 or 4..10 (su2: irrep dimensions)")
        p.add_argument("--layers", help="integer, rule such as 6n, or comma list")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--sector", help="excitation label for xxz models, e.g. m=1 or m=n/2")
        p.add_argument("--mu", help="layer,generator (1-based)")
        p.add_argument("--out")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--workers", type=int)
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="model parameter, JSON value (e.g. boundary=\"closed\", h=1.0)")
        p.add_argument("--paper-scale", action="store_true",
                       help="reference grids and sample counts (slow)")
    return parser


def _param_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def config_from_args(args) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.command]
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config: {exc}", "config") from exc
        if data.get("kind", kind) != kind:
            raise ConfigError(f"config kind {data['kind']!r} does not match '{args.command}'", "kind")
    data["kind"] = kind
    data.setdefault("seed", 0)
    params = dict(data.get("params", {}))
    for item in args.param:
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError(f"--param {item!r} must be KEY=VALUE", "params")
        params[k] = _param_value(v)
    if args.sector:
        params.update(parse_sector(args.sector))
    if params:
        data["params"] = params
    if args.model:
        data["model"] = args.model
    if args.n:
        data["n"] = parse_n(args.n)
    if args.layers:
        parts = [p.strip() for p in args.layers.split(",")]
        vals = [int(p) if p.isdigit() else p for p in parts]
        data["layers"] = vals[0] if len(vals) == 1 else vals
    if args.samples is not None:
        data["n_samples"] = args.samples
    if args.seed is not None:
        data["seed"] = args.seed
    if args.mu:
        try:
            data["mu"] = [int(x) for x in args.mu.split(",")]
        except ValueError as exc:
            raise ConfigError("--mu must be layer,generator", "mu") from exc
    if args.out:
        data["out"] = args.out
    if args.format:
        data["format"] = args.format
    if args.workers:
        data["workers"] = args.workers
    if args.paper_scale:
        data["paper_scale"] = True
        ref = PAPER_SCALE.get(data.get("model", ""))
        if ref and kind in ("variance-sweep", "er-ensemble"):
            data.setdefault("n", ref["n"])
            if args.samples is None:
                data["n_samples"] = ref["n_samples"]
            if kind == "er-ensemble" and "graph_seeds" not in data:
                data["graph_seeds"] = list(range(ref.get("graphs", 10)))
        warnings.warn("paper-scale run: expect hours of runtime and capacity rows above the "
                      "simulator caps", RuntimeWarning, stacklevel=2)
    _apply_defaults(data)
    return ExperimentConfig.from_dict(data)


def _apply_defaults(data: dict) -> None:
    kind = data["kind"]
    if kind == "su2":
        data.setdefault("n", [8, 16, 32])
        data.setdefault("n_samples", 1200)
    elif kind == "er-ensemble":
        data.setdefault("model", "er_qaoa")
        data.setdefault("n", [4, 6, 8])
        data.setdefault("n_samples", 1000)
    elif kind == "moments":
        data.setdefault("model", "hea")
        data.setdefault("n", [2])


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        paths, code = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapacityError, DimensionError) as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (IntegrityError, InvarianceError, DlaInvarianceError) as exc:
        print(f"numerical integrity failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    for p in paths:
        print(p, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
