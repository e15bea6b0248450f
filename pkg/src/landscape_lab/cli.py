"""Command-line driver: every stage reads and writes plain files in an output directory.

    landscape-lab gen-potential --dim 1 --units 256 --seed 7 --out run/
    landscape-lab landscape run/potential_seed7.json --r 10 --out run/
    landscape-lab analyze run/w.json --out run/
    landscape-lab eigs run/potential_seed7.json --r 10 --k 10 --out run/
    landscape-lab compare --eigs run/eigs.csv --wells run/wells.csv --units 256 --out run/

Failures print one line ``error: <code>: <message>`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import ScalarField, argmax_field, make_grid
from .fileio import dump_json, load_field, load_potential, read_csv, save_field, save_potential, write_csv, write_pgm
from .geometry import Well, local_minima, watershed_basins
from .landscape import compute_landscape, lower_bounds
from .operator import SolverError, make_operator
from .potential import Potential, gen_bernoulli, gen_correlated_1d, gen_correlated_2d, gen_uniform, sample_on_grid
from .predict import (
    SUPPORT_ALPHA,
    counting_function,
    dos_histogram,
    match_peaks,
    predict_eigenvalues,
    ratio_stats,
    support_regions,
    total_variation,
    weyl_counting,
)
from .spectra import eigenpairs_below, smallest_eigenpairs

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SOLVER = 4


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    return lo, hi


def _parse_units(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or N,M, got {text!r}") from None


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    out: str = "."
    dim: int | None = None
    units: tuple[int, ...] | None = None
    seed: int = 1
    generator: str = "uniform"
    lo: float = 0.0
    hi: float = 4.0
    v0: float = 0.0
    v1: float = 4.0
    p1: float = 0.3
    sigma: float = 1.0
    d: float = 0.01
    r: int = 10
    tol: float = 1e-8
    k: int = 10
    alpha: float | None = None
    bins: int = 50
    range: tuple[float, float] | None = None
    jobs: int = 1
    pgm: bool = False
    psi: bool = False
    eigs: str | None = None
    wells: str | None = None

    def validate(self) -> None:
        """Check every parameter against the preconditions of the module that will consume it."""
        checks = [
            (self.dim in (None, 1, 2), f"--dim must be 1 or 2, got {self.dim}"),
            (self.units is None or all(n >= 2 for n in self.units), f"--units entries must be >= 2, got {self.units}"),
            (self.units is None or self.dim is None or len(self.units) in (1, self.dim), "--units has the wrong number of entries"),
            (0 <= self.seed < 2**64, "--seed must fit in 64 unsigned bits"),
            (self.r >= 2, f"--r must be >= 2, got {self.r}"),
            (0 < self.tol < 1, f"--tol must lie in (0, 1), got {self.tol}"),
            (self.k >= 1, f"--k must be >= 1, got {self.k}"),
            (self.alpha is None or self.alpha > 1, f"--alpha must exceed 1, got {self.alpha}"),
            (self.bins >= 1, f"--bins must be >= 1, got {self.bins}"),
            (self.range is None or self.range[0] < self.range[1], f"--range needs lo < hi, got {self.range}"),
            (self.jobs >= 1, f"--jobs must be >= 1, got {self.jobs}"),
        ]
        if self.command == "gen-potential":
            checks += {
                "uniform": [(0 <= self.lo <= self.hi, "need 0 <= --lo <= --hi")],
                "bernoulli": [
                    (self.v0 >= 0 and self.v1 >= 0 and self.v0 + self.v1 > 0, "need --v0, --v1 >= 0, not both zero"),
                    (0 <= self.p1 <= 1, "--p1 must lie in [0, 1]"),
                ],
                "correlated": [
                    (self.sigma > 0 and self.d > 0, "--sigma and --d must be positive"),
                    (self.units is None or all(n % 2 == 0 and n >= 4 for n in self.units), "correlated --units must be even and >= 4"),
                ],
            }[self.generator]
        for ok, message in checks:
            if not ok:
                raise CliError("invalid-config", message)
        for path in self.inputs + [p for p in (self.eigs, self.wells) if p]:
            if not Path(path).is_file():
                raise CliError("missing-input", f"no such file: {path}", EXIT_INPUT)

    def echo(self) -> dict:
        """Config as written to provenance; paths are reduced to file names so reruns elsewhere match."""
        d = asdict(self)
        d.pop("out")
        d["inputs"] = [Path(p).name for p in self.inputs]
        for key in ("eigs", "wells"):
            if d[key]:
                d[key] = Path(d[key]).name
        for key in ("units", "range"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def _provenance(cfg: RunConfig, out: Path, **extra) -> None:
    record = {"tool": "landscape-lab", "version": __version__, "config": cfg.echo()}
    record.update(extra)
    dump_json(record, out / "provenance.json")


def _grid_for(potential: Potential, r: int):
    return make_grid(potential.dim, list(potential.units), r)


def _landscape(potential: Potential, r: int, tol: float):
    v = sample_on_grid(potential, _grid_for(potential, r))
    op = make_operator(v)
    return op, compute_landscape(op, tol=min(tol, 1e-10))


def _alpha(cfg: RunConfig, dim: int) -> float:
    return cfg.alpha if cfg.alpha is not None else SUPPORT_ALPHA[dim]


def _coord_names(dim: int) -> list[str]:
    return ["x", "y"][:dim]


def _wells_rows(wells: Sequence[Well]):
    return [[w.rank, w.min_index, *w.min_location, w.w_min, w.basin_label] for w in wells]


def _read_wells(path) -> tuple[list[Well], int]:
    rows = read_csv(path)
    if not rows:
        raise CliError("bad-input", f"{path}: no wells", EXIT_INPUT)
    dim = 2 if "y" in rows[0] else 1
    wells = []
    for row in rows:
        loc = tuple(float(row[c]) for c in _coord_names(dim))
        wells.append(Well(int(row["index"]), loc, float(row["w_min"]), int(row["rank"]), int(row["basin"])))
    return wells, dim


def _peak(pair) -> tuple[int, tuple[float, ...]]:
    i, _ = argmax_field(np.abs(pair.psi.values))
    return i, pair.psi.grid.coords(i)


# ---------------------------------------------------------------------------
# commands


def cmd_gen_potential(cfg: RunConfig, out: Path) -> None:
    dim = cfg.dim or (len(cfg.units) if cfg.units else 1)
    units = cfg.units or ((256,) if dim == 1 else (80, 80))
    if len(units) == 1 and dim == 2:
        units = units * 2
    if cfg.generator == "uniform":
        pot = gen_uniform(units, cfg.lo, cfg.hi, cfg.seed)
    elif cfg.generator == "bernoulli":
        pot = gen_bernoulli(units, cfg.v0, cfg.v1, cfg.p1, cfg.seed)
    elif dim == 1:
        pot = gen_correlated_1d(units[0], cfg.sigma, cfg.d, cfg.seed)
    else:
        pot = gen_correlated_2d(units, cfg.sigma, cfg.d, cfg.seed)
    name = f"potential_seed{cfg.seed}.json"
    save_potential(pot, out / name)
    _provenance(cfg, out, outputs=[name])


def cmd_landscape(cfg: RunConfig, out: Path) -> None:
    pot = load_potential(cfg.inputs[0])
    op, pair = _landscape(pot, cfg.r, cfg.tol)
    save_field(pair.u, out / "u.json")
    save_field(pair.w, out / "w.json")
    outputs = ["u.json", "w.json"]
    if pot.dim == 2 and cfg.pgm:
        for name, f in (("u.pgm", pair.u), ("w.pgm", pair.w)):
            write_pgm(f.values, out / name)
            outputs.append(name)
    v = op.v_field
    _provenance(
        cfg,
        out,
        seed=pot.seed,
        outputs=outputs,
        solve_report=pair.solve_report.as_dict(),
        ranges={name: [f.min(), f.max()] for name, f in (("u", pair.u), ("v", v), ("w", pair.w))},
    )


def cmd_analyze(cfg: RunConfig, out: Path) -> None:
    w = load_field(cfg.inputs[0])
    wells = local_minima(w)
    if not wells:
        raise CliError("no-wells", "effective potential has no strict local minimum", EXIT_INPUT)
    basins = watershed_basins(w, wells)
    alpha = _alpha(cfg, w.grid.dim)
    regions = support_regions(wells, w, alpha)
    write_csv(out / "wells.csv", ["rank", "index", *_coord_names(w.grid.dim), "w_min", "basin"], _wells_rows(wells))
    save_field(ScalarField(w.grid, basins.labels.astype(float)), out / "basins.json")
    outputs = ["wells.csv", "basins.json", "regions.csv"]
    if w.grid.dim == 2 and cfg.pgm:
        write_pgm(basins.labels, out / "basins.pgm")
        outputs.append("basins.pgm")
    write_csv(
        out / "regions.csv",
        ["rank", "energy", "size", "members"],
        ([wl.rank, reg.energy, len(reg), " ".join(str(int(i)) for i in reg.members)] for wl, reg in zip(wells, regions)),
    )
    _provenance(cfg, out, outputs=outputs, n_wells=len(wells), n_basins=basins.n_basins, crest_points=int(basins.crest_mask.sum()), alpha=alpha)


def _eigenpairs(op, cfg: RunConfig):
    if cfg.range is not None:
        lo, hi = cfg.range
        return [p for p in eigenpairs_below(op, hi, batch=max(cfg.k, 8), tol=cfg.tol) if p.lam >= lo]
    return smallest_eigenpairs(op, cfg.k, cfg.tol)


def cmd_eigs(cfg: RunConfig, out: Path) -> None:
    pot = load_potential(cfg.inputs[0])
    op = make_operator(sample_on_grid(pot, _grid_for(pot, cfg.r)))
    pairs = _eigenpairs(op, cfg)
    rows = []
    outputs = ["eigs.csv"]
    for rank, p in enumerate(pairs, start=1):
        i, loc = _peak(p)
        rows.append([rank, p.lam, p.residual, i, *loc])
        if cfg.psi:
            save_field(p.psi, out / f"psi_{rank}.json")
            outputs.append(f"psi_{rank}.json")
            if pot.dim == 2 and cfg.pgm:
                write_pgm(p.psi.values, out / f"psi_{rank}.pgm")
                outputs.append(f"psi_{rank}.pgm")
    write_csv(out / "eigs.csv", ["rank", "lambda", "residual", "peak_index", *_coord_names(pot.dim)], rows)
    _provenance(cfg, out, seed=pot.seed, outputs=outputs, n_eigs=len(pairs), max_residual=max(p.residual for p in pairs) if pairs else None)


def cmd_predict(cfg: RunConfig, out: Path) -> None:
    w = load_field(cfg.inputs[0])
    wells = local_minima(w)
    if not wells:
        raise CliError("no-wells", "effective potential has no strict local minimum", EXIT_INPUT)
    lams = predict_eigenvalues(wells, w.grid.dim)
    alpha = _alpha(cfg, w.grid.dim)
    regions = support_regions(wells, w, alpha)
    write_csv(
        out / "predictions.csv",
        ["rank", "index", *_coord_names(w.grid.dim), "w_min", "lambda_hat", "support_energy", "support_size"],
        ([wl.rank, wl.min_index, *wl.min_location, wl.w_min, lam, reg.energy, len(reg)] for wl, lam, reg in zip(wells, lams, regions)),
    )
    write_csv(
        out / "regions.csv",
        ["rank", "energy", "size", "members"],
        ([wl.rank, reg.energy, len(reg), " ".join(str(int(i)) for i in reg.members)] for wl, reg in zip(wells, regions)),
    )
    _provenance(cfg, out, outputs=["predictions.csv", "regions.csv"], n_wells=len(wells), alpha=alpha)


def _write_comparison(out: Path, prefix: str, lams, wells, peaks, lengths, k) -> dict:
    k = min(k, len(lams), len(wells))
    ranked = sorted(wells, key=lambda w: w.rank)
    write_csv(
        out / f"{prefix}ratios.csv",
        ["rank", "lambda", "w_min", "ratio"],
        ([i + 1, lams[i], ranked[i].w_min, lams[i] / ranked[i].w_min] for i in range(k)),
    )
    counts = sorted({m for m in (1, 2, 4, 10, k) if m <= k})
    stats = ratio_stats(lams[:k], wells, counts)
    write_csv(out / f"{prefix}ratio_summary.csv", ["m", "mean", "sd"], ([m, *stats[m]] for m in counts))
    report = match_peaks(wells, peaks[:k], lengths)
    r2r = dict(report.rank_to_rank)
    write_csv(
        out / f"{prefix}match.csv",
        ["eigen_rank", "well_rank", "distance", "rank_to_rank_distance"],
        ([e, wr, d, r2r.get(e, float("nan"))] for wr, e, d in report.pairs),
    )
    return {"k": k, "mean": stats[k][0], "sd": stats[k][1], "max_match_distance_4": max(d for _, e, d in report.pairs if e <= 4)}


def cmd_compare_join(cfg: RunConfig, out: Path) -> None:
    wells, dim = _read_wells(cfg.wells)
    if cfg.units is None:
        raise CliError("invalid-config", "--units is required to measure periodic distances")
    units = cfg.units * dim if len(cfg.units) == 1 else cfg.units
    rows = read_csv(cfg.eigs)
    lams = [float(r["lambda"]) for r in rows]
    peaks = [tuple(float(r[c]) for c in _coord_names(dim)) for r in rows]
    summary = _write_comparison(out, "", lams, wells, peaks, tuple(float(n) for n in units), cfg.k)
    _provenance(cfg, out, outputs=["ratios.csv", "ratio_summary.csv", "match.csv"], summary=summary)


def _compare_one(args) -> dict:
    path, cfg, out = args
    pot = load_potential(path)
    op, pair = _landscape(pot, cfg.r, cfg.tol)
    wells = local_minima(pair.w)
    pairs = smallest_eigenpairs(op, cfg.k, cfg.tol)
    lams = [p.lam for p in pairs]
    peaks = [_peak(p)[1] for p in pairs]
    inf_v, inf_w = lower_bounds(op.v_field, pair.w)
    tag = f"seed{pot.seed}_" if pot.seed is not None else f"{Path(path).stem}_"
    summary = _write_comparison(out, tag, lams, wells, peaks, pair.grid.lengths, cfg.k)
    summary.update(
        seed=pot.seed,
        lambda_1=lams[0],
        inf_v=inf_v,
        inf_w=inf_w,
        n_wells=len(wells),
        max_residual=max(p.residual for p in pairs),
    )
    return summary


def cmd_compare_batch(cfg: RunConfig, out: Path) -> None:
    jobs = [(p, cfg, out) for p in cfg.inputs]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_compare_one, jobs))
    else:
        results = [_compare_one(j) for j in jobs]
    cols = ["seed", "k", "mean", "sd", "max_match_distance_4", "lambda_1", "inf_v", "inf_w", "n_wells", "max_residual"]
    write_csv(out / "summary.csv", cols, ([r[c] for c in cols] for r in results))
    _provenance(cfg, out, outputs=["summary.csv"], n_instances=len(results))


def cmd_compare(cfg: RunConfig, out: Path) -> None:
    if cfg.inputs:
        if cfg.eigs or cfg.wells:
            raise CliError("invalid-config", "give either potential files or --eigs/--wells, not both")
        cmd_compare_batch(cfg, out)
    elif cfg.eigs and cfg.wells:
        cmd_compare_join(cfg, out)
    else:
        raise CliError("invalid-config", "compare needs potential files or both --eigs and --wells")


def _eigenvalues_up_to(op, cfg: RunConfig, e_max: float) -> list[float]:
    if cfg.eigs:
        return sorted(float(r["lambda"]) for r in read_csv(cfg.eigs))
    return [p.lam for p in eigenpairs_below(op, e_max, tol=cfg.tol)]


def cmd_weyl(cfg: RunConfig, out: Path) -> None:
    pot = load_potential(cfg.inputs[0])
    op, pair = _landscape(pot, cfg.r, cfg.tol)
    lo, hi = cfg.range or (0.0, float(op.v.max()))
    energies = np.linspace(lo, hi, cfg.bins + 1)
    lams = _eigenvalues_up_to(op, cfg, hi)
    write_csv(
        out / "weyl.csv",
        ["E", "N", "N_V", "N_W"],
        ([e, counting_function(lams, e), weyl_counting(op.v_field, e), weyl_counting(pair.w, e)] for e in energies),
    )
    _provenance(cfg, out, seed=pot.seed, outputs=["weyl.csv"], n_eigs=len(lams), solve_report=pair.solve_report.as_dict())


def cmd_dos(cfg: RunConfig, out: Path) -> None:
    pot = load_potential(cfg.inputs[0])
    op, pair = _landscape(pot, cfg.r, cfg.tol)
    lo, hi = cfg.range or (0.0, 1.0)
    lams = _eigenvalues_up_to(op, cfg, hi)
    predicted = predict_eigenvalues(local_minima(pair.w), pot.dim)
    h_true = dos_histogram(lams, lo, hi, cfg.bins)
    h_pred = dos_histogram(predicted, lo, hi, cfg.bins)
    edges = h_true.edges
    write_csv(
        out / "dos.csv",
        ["bin_lo", "bin_hi", "count_eigs", "count_predicted", "density_eigs", "density_predicted"],
        zip(edges[:-1], edges[1:], h_true.counts, h_pred.counts, h_true.normalized(), h_pred.normalized()),
    )
    tv = total_variation(h_true, h_pred) if h_true.counts.sum() and h_pred.counts.sum() else None
    _provenance(cfg, out, seed=pot.seed, outputs=["dos.csv"], total_variation=tv, n_eigs=int(h_true.counts.sum()), n_predicted=int(h_pred.counts.sum()))


COMMANDS = {
    "gen-potential": cmd_gen_potential,
    "landscape": cmd_landscape,
    "analyze": cmd_analyze,
    "eigs": cmd_eigs,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "weyl": cmd_weyl,
    "dos": cmd_dos,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="landscape-lab", description="Landscape-function predictions for random Schrodinger operators.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, inputs: str | None = None, nargs=None):
        if inputs:
            p.add_argument("inputs", nargs=nargs, metavar=inputs.upper(), help=f"{inputs} file")
        p.add_argument("--out", default=".", help="output directory (created if needed)")
        return p

    def grid_opts(p):
        p.add_argument("--r", type=int, default=10, help="grid points per unit length")
        p.add_argument("--tol", type=float, default=1e-8, help="eigen residual / solver tolerance")

    p = common(sub.add_parser("gen-potential", help="draw a random piecewise-constant potential"))
    p.add_argument("--generator", choices=["uniform", "bernoulli", "correlated"], default="uniform")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--units", type=_parse_units, default=None, help="cells per axis, e.g. 256 or 80,80")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=4.0)
    p.add_argument("--v0", type=float, default=0.0)
    p.add_argument("--v1", type=float, default=4.0)
    p.add_argument("--p1", type=float, default=0.3)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--d", type=float, default=0.01)

    p = common(sub.add_parser("landscape", help="solve H u = 1 and write u, W"), "potential", 1)
    grid_opts(p)
    p.add_argument("--pgm", action="store_true", help="also write 16-bit PGM rasters (2D)")

    for name, text in (("analyze", "wells, basins and supports of W"), ("predict", "predicted eigenvalues and supports")):
        p = common(sub.add_parser(name, help=text), "w", 1)
        p.add_argument("--alpha", type=float, default=None, help="support level as a multiple of the well depth")
        if name == "analyze":
            p.add_argument("--pgm", action="store_true")

    p = common(sub.add_parser("eigs", help="smallest eigenpairs from the oracle"), "potential", 1)
    grid_opts(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--range", type=_parse_range, default=None, help="all eigenvalues in lo:hi instead of the k smallest")
    p.add_argument("--psi", action="store_true", help="write eigenfunctions as field JSON")
    p.add_argument("--pgm", action="store_true")

    p = common(sub.add_parser("compare", help="ratio and location statistics"), "potential", "*")
    grid_opts(p)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--eigs", default=None, help="eigs.csv (join mode)")
    p.add_argument("--wells", default=None, help="wells.csv (join mode)")
    p.add_argument("--units", type=_parse_units, default=None, help="domain cells per axis (join mode)")
    p.add_argument("--jobs", type=int, default=1, help="parallel instances in batch mode")

    for name, text, bins in (("weyl", "counting functions N, N_V, N_W", 100), ("dos", "eigenvalue vs prediction histograms", 50)):
        p = common(sub.add_parser(name, help=text), "potential", 1)
        grid_opts(p)
        p.add_argument("--range", type=_parse_range, default=None, help="energy window lo:hi")
        p.add_argument("--bins", type=int, default=bins, help="histogram bins (dos) or energy steps (weyl)")
        p.add_argument("--eigs", default=None, help="reuse eigenvalues from an eigs.csv")
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    inputs = ns.pop("inputs", None) or []
    cfg = RunConfig(command=ns.pop("command"), inputs=list(inputs), **{k: v for k, v in ns.items() if v is not None})
    cfg.validate()
    return cfg


def _thread_limit():
    value = os.environ.get("LANDSCAPE_LAB_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise CliError("invalid-config", f"LANDSCAPE_LAB_THREADS must be a positive integer, got {value!r}") from None
    if n < 1:
        raise CliError("invalid-config", f"LANDSCAPE_LAB_THREADS must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def run(cfg: RunConfig) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    limiter = _thread_limit()
    try:
        COMMANDS[cfg.command](cfg, out)
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


def main(argv: Sequence[str] | None = None) -> int:
    try:
        run(parse_config(argv))
    except CliError as exc:
        code, message, status = exc.code, str(exc), exc.status
    except SolverError as exc:
        code, message, status = "solver", str(exc), EXIT_SOLVER
    except KeyError as exc:
        code, message, status = "bad-input", f"missing key {exc}", EXIT_INPUT
    except (ValueError, OSError) as exc:
        code, message, status = "bad-input", str(exc), EXIT_INPUT
    else:
        return 0
    print(f"error: {code}: {' '.join(message.split())}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
