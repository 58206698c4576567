"""Parameter-grid execution with incremental, resumable CSV persistence.

Grid points are embarrassingly parallel: each point owns a Philox stream
keyed by (seed_base, point index), so the result table is bit-identical for
any worker count and any scheduling order. The result log is appended
strictly in point order; resuming validates the sidecar manifest, keeps the
longest clean prefix of complete points and recomputes the rest.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from itertools import product
from multiprocessing import Pool

from . import __version__
from .excitation import NonResonant, PulseSchedule, Resonant, run_trajectory
from .kinetics import CLASS_ORDER, DEFAULT_N_LEVELS, RateParams
from .observables import AccumulatorSet, emission_probability
from .rng import point_seed

__all__ = [
    "GridSpec",
    "SweepResult",
    "run_sweep",
    "saturation_scan",
    "repetition_scan",
    "RESULT_COLUMNS",
]

RESULT_COLUMNS = (
    "gamma_nr",
    "gamma_sf",
    "purcell",
    "period_t",
    "p_in",
    "scheme",
    "class",
    "p_out",
    "stderr",
    "cycles",
    "seed",
)

AXIS_NAMES = ("gamma_nr", "gamma_sf", "purcell", "period_t", "p_in")
PARAM_AXES = ("gamma_nr", "gamma_sf", "purcell")


@dataclass(frozen=True)
class GridSpec:
    """Cartesian sweep description.

    ``axes`` maps axis names (gamma_nr, gamma_sf, purcell, period_t, p_in)
    to value lists; points enumerate the product in row-major order with the
    last axis fastest. Values not swept come from ``base_params``,
    ``period_t`` and ``scheme``.
    """

    axes: dict[str, tuple[float, ...]]
    base_params: RateParams = RateParams()
    scheme: NonResonant | Resonant = NonResonant(1.5)
    period_t: float = 10.0
    cycles_per_point: int = 100_000
    seed_base: int = 0
    n_levels: int = DEFAULT_N_LEVELS
    burn_in: int = 1000

    def __post_init__(self):
        if not self.axes:
            raise ValueError("at least one axis required")
        for name, values in self.axes.items():
            if name not in AXIS_NAMES:
                raise ValueError(f"unknown axis {name!r} (allowed: {AXIS_NAMES})")
            if len(values) == 0:
                raise ValueError(f"axis {name!r} is empty")
            if name != "p_in" and any(v <= 0 for v in values):
                raise ValueError(f"axis {name!r} values must be positive")
            if name == "p_in" and any(v < 0 for v in values):
                raise ValueError("p_in values must be >= 0")
        if "p_in" in self.axes and not isinstance(self.scheme, NonResonant):
            raise ValueError("a p_in axis requires the non-resonant scheme")
        if self.cycles_per_point < 1:
            raise ValueError("cycles_per_point must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    @property
    def n_points(self) -> int:
        n = 1
        for values in self.axes.values():
            n *= len(values)
        return n

    def point_values(self, index: int) -> dict[str, float]:
        """Axis values of the flat point index (row-major)."""
        if not 0 <= index < self.n_points:
            raise IndexError(index)
        names = list(self.axes)
        sizes = [len(self.axes[n]) for n in names]
        out = {}
        rem = index
        for name, size in zip(reversed(names), reversed(sizes)):
            rem, k = divmod(rem, size)
            out[name] = self.axes[name][k]
        return out

    def point_config(self, index: int):
        """(params, scheme, period_t, seed) of one grid point."""
        values = self.point_values(index)
        params = replace(
            self.base_params,
            **{k: values[k] for k in PARAM_AXES if k in values},
        )
        period = values.get("period_t", self.period_t)
        scheme = self.scheme
        if "p_in" in values:
            scheme = NonResonant(values["p_in"])
        return params, scheme, period, point_seed(self.seed_base, index)

    def to_manifest(self) -> dict:
        scheme: dict[str, object]
        if isinstance(self.scheme, Resonant):
            scheme = {"kind": "resonant", "polarization": self.scheme.polarization}
        else:
            scheme = {"kind": "nonresonant", "p_in": self.scheme.p_in}
        return {
            "version": __version__,
            "axes": {k: list(v) for k, v in self.axes.items()},
            "gamma_r": self.base_params.gamma_r,
            "gamma_nr": self.base_params.gamma_nr,
            "gamma_sf": self.base_params.gamma_sf,
            "purcell": self.base_params.purcell,
            "scheme": scheme,
            "period_t": self.period_t,
            "cycles_per_point": self.cycles_per_point,
            "seed_base": self.seed_base,
            "n_levels": self.n_levels,
            "burn_in": self.burn_in,
        }


def _format_row(row: dict) -> str:
    parts = []
    for col in RESULT_COLUMNS:
        value = row[col]
        if isinstance(value, float):
            parts.append(repr(value))
        else:
            parts.append(str(value))
    return ",".join(parts)


def _point_rows(spec: GridSpec, index: int) -> list[dict]:
    """Simulate one grid point and emit one row per exciton class."""
    params, scheme, period, seed = spec.point_config(index)
    schedule = PulseSchedule(period, spec.cycles_per_point, scheme)
    acc = AccumulatorSet(period, collect_decay=False, collect_blink=False)
    run_trajectory(
        params, schedule, seed, acc,
        n_levels=spec.n_levels, burn_in=spec.burn_in,
    )
    p_in = scheme.p_in if isinstance(scheme, NonResonant) else ""
    scheme_name = "nonresonant" if isinstance(scheme, NonResonant) else "resonant"
    rows = []
    for cls in CLASS_ORDER:
        p = emission_probability(acc, cls)
        clipped = min(max(p, 0.0), 1.0)
        stderr = math.sqrt(clipped * (1.0 - clipped) / spec.cycles_per_point)
        rows.append(
            {
                "gamma_nr": params.gamma_nr,
                "gamma_sf": params.gamma_sf,
                "purcell": params.purcell,
                "period_t": period,
                "p_in": p_in,
                "scheme": scheme_name,
                "class": cls.label,
                "p_out": p,
                "stderr": stderr,
                "cycles": spec.cycles_per_point,
                "seed": seed,
            }
        )
    return rows


def _point_task(args):
    spec, index = args
    return index, _point_rows(spec, index)


@dataclass
class SweepResult:
    """Completed sweep: one row per (point, class), in point order."""

    spec: GridSpec
    rows: list[dict]

    def p_out(self, cls_label: str) -> list[float]:
        return [r["p_out"] for r in self.rows if r["class"] == cls_label]

    def stderr(self, cls_label: str) -> list[float]:
        return [r["stderr"] for r in self.rows if r["class"] == cls_label]

    def write_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(RESULT_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(_format_row(row) + "\n")


def _load_resume_rows(spec: GridSpec, out_path: str) -> list[dict]:
    """Rows of the longest clean prefix of complete points in an existing log.

    Anything malformed (torn trailing line, partial point group, stale
    parameters) is discarded; the caller rewrites the file from the validated
    prefix before continuing.
    """
    if not os.path.exists(out_path):
        return []
    manifest_path = out_path + ".manifest.json"
    if os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            recorded = json.load(fh)
        if recorded != spec.to_manifest():
            raise ValueError(
                f"existing manifest {manifest_path} does not match this sweep; "
                "refusing to resume"
            )
    with open(out_path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != ",".join(RESULT_COLUMNS):
        return []
    n_classes = len(CLASS_ORDER)
    rows: list[dict] = []
    for index in range(spec.n_points):
        start = 1 + index * n_classes
        group = lines[start : start + n_classes]
        if len(group) < n_classes:
            break
        parsed = []
        expected = _point_rows_header(spec, index)
        ok = True
        for line, (cls, exp_prefix) in zip(group, expected):
            fields = line.split(",")
            if len(fields) != len(RESULT_COLUMNS):
                ok = False
                break
            try:
                row = {
                    "gamma_nr": float(fields[0]),
                    "gamma_sf": float(fields[1]),
                    "purcell": float(fields[2]),
                    "period_t": float(fields[3]),
                    "p_in": fields[4] if fields[4] == "" else float(fields[4]),
                    "scheme": fields[5],
                    "class": fields[6],
                    "p_out": float(fields[7]),
                    "stderr": float(fields[8]),
                    "cycles": int(fields[9]),
                    "seed": int(fields[10]),
                }
            except ValueError:
                ok = False
                break
            if (row["class"], _row_prefix(row)) != (cls, exp_prefix):
                ok = False
                break
            parsed.append(row)
        if not ok:
            break
        rows.extend(parsed)
    return rows


def _row_prefix(row: dict) -> tuple:
    return (
        row["gamma_nr"],
        row["gamma_sf"],
        row["purcell"],
        row["period_t"],
        row["p_in"],
        row["scheme"],
        row["cycles"],
        row["seed"],
    )


def _point_rows_header(spec: GridSpec, index: int) -> list[tuple[str, tuple]]:
    params, scheme, period, seed = spec.point_config(index)
    p_in = scheme.p_in if isinstance(scheme, NonResonant) else ""
    name = "nonresonant" if isinstance(scheme, NonResonant) else "resonant"
    prefix = (
        params.gamma_nr,
        params.gamma_sf,
        params.purcell,
        period,
        p_in,
        name,
        spec.cycles_per_point,
        seed,
    )
    return [(cls.label, prefix) for cls in CLASS_ORDER]


def run_sweep(
    spec: GridSpec,
    workers: int = 1,
    out_path: str | None = None,
    resume: bool = False,
    progress: bool = False,
) -> SweepResult:
    """Simulate every grid point, streaming rows to ``out_path`` in order.

    Completed work found in an existing log is reused when ``resume`` is set;
    otherwise an existing log is overwritten. The result is independent of
    ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n_classes = len(CLASS_ORDER)
    done_rows: list[dict] = []
    if out_path is not None and resume:
        done_rows = _load_resume_rows(spec, out_path)
    start_point = len(done_rows) // n_classes

    fh = None
    if out_path is not None:
        directory = os.path.dirname(os.path.abspath(out_path))
        os.makedirs(directory, exist_ok=True)
        with open(out_path + ".manifest.json", "w") as mfh:
            json.dump(spec.to_manifest(), mfh, indent=2, sort_keys=True)
            mfh.write("\n")
        fh = open(out_path, "w")
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for row in done_rows:
            fh.write(_format_row(row) + "\n")
        fh.flush()

    rows = list(done_rows)
    pending = range(start_point, spec.n_points)
    try:
        if pending:
            tasks = ((spec, i) for i in pending)
            buffered: dict[int, list[dict]] = {}
            next_index = start_point

            def drain():
                nonlocal next_index
                while next_index in buffered:
                    for row in buffered.pop(next_index):
                        rows.append(row)
                        if fh is not None:
                            fh.write(_format_row(row) + "\n")
                    if fh is not None:
                        fh.flush()
                    next_index += 1
                    if progress:
                        print(f"\rsweep: {next_index}/{spec.n_points} points", end="")

            if workers == 1:
                for i in pending:
                    buffered[i] = _point_rows(spec, i)
                    drain()
            else:
                with Pool(processes=workers) as pool:
                    for index, point_rows in pool.imap_unordered(
                        _point_task, tasks, chunksize=1
                    ):
                        buffered[index] = point_rows
                        drain()
            if progress:
                print()
    finally:
        if fh is not None:
            fh.close()
    return SweepResult(spec, rows)


def saturation_scan(
    p_in_values,
    params: RateParams = RateParams(),
    period_t: float = 10.0,
    cycles_per_point: int = 100_000,
    seed_base: int = 0,
    n_levels: int = DEFAULT_N_LEVELS,
    workers: int = 1,
    out_path: str | None = None,
    resume: bool = False,
) -> SweepResult:
    """Exciton/biexciton brightness versus pump power (non-resonant)."""
    spec = GridSpec(
        axes={"p_in": tuple(float(p) for p in p_in_values)},
        base_params=params,
        scheme=NonResonant(0.0),
        period_t=period_t,
        cycles_per_point=cycles_per_point,
        seed_base=seed_base,
        n_levels=n_levels,
    )
    return run_sweep(spec, workers=workers, out_path=out_path, resume=resume)


def repetition_scan(
    t_values,
    gamma_nr_values,
    params: RateParams = RateParams(),
    scheme: NonResonant | Resonant = NonResonant(1.5),
    cycles_per_point: int = 100_000,
    seed_base: int = 0,
    n_levels: int = DEFAULT_N_LEVELS,
    workers: int = 1,
    out_path: str | None = None,
    resume: bool = False,
) -> SweepResult:
    """Brightness map over repetition period and non-radiative rate.

    The diagnostic ridge to look for in the result is gamma_nr * period = 1.
    """
    spec = GridSpec(
        axes={
            "period_t": tuple(float(t) for t in t_values),
            "gamma_nr": tuple(float(g) for g in gamma_nr_values),
        },
        base_params=params,
        scheme=scheme,
        cycles_per_point=cycles_per_point,
        seed_base=seed_base,
        n_levels=n_levels,
    )
    return run_sweep(spec, workers=workers, out_path=out_path, resume=resume)
