"""Experiment grids, their configuration files and CSV outputs.

A configuration file holds one ``key = value`` per line; ``#`` starts a
comment. List-valued keys take comma-separated values. Unknown keys are
errors. Every experiment writes, under ``output_dir/<experiment>/``:

* ``records_<runid>.csv``: the recorded diagnostics of one run,
* ``summary.csv``: one row per grid cell, preceded by a ``# generated`` line,
* ``config.json``: the fully resolved configuration.

Reals are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import (
    ConfigurationError,
    LambdaSchedule,
    MomentumSchedule,
    RngStream,
    StepSchedule,
    log_uniform,
    one_two_five_grid,
)
from .optim import METHODS, DivergenceError, StepperConfig, run
from .precond import PRECOND_KINDS
from .problems import MlpProblem, MlpSpec, generate_blobs, generate_lasso
from .prox import (
    Penalty,
    RegularizerSpec,
    dead_zone_threshold,
    parse_q,
    prox_oracle_1d,
    prox_quant_lq,
    prox_sparse_lq,
    q_label,
    scalar_objective,
)

EXPERIMENTS = ("lasso-recovery", "sparse-mlp", "quant-mlp", "prox-fuzz")

# stream ids for the independent random draws of one seed
DATA_STREAM = 1
INIT_STREAM = 2
BATCH_STREAM = 3
FUZZ_STREAM = 4


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _strs(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def parse_init(text: str) -> tuple[str, float]:
    """'zero' -> ('zero', 0.0); 'gaussian(0.1)' or 'gaussian' -> ('gaussian', scale)."""
    text = text.strip().lower()
    if text == "zero":
        return "zero", 0.0
    m = re.fullmatch(r"gaussian(?:\(\s*([0-9.eE+-]+)\s*\))?", text)
    if m is None:
        raise ConfigurationError(f"init must be 'zero' or 'gaussian(scale)', got {text!r}")
    scale = float(m.group(1)) if m.group(1) else 0.1
    if not scale > 0:
        raise ConfigurationError("gaussian init scale must be positive")
    return "gaussian", scale


def init_label(init: tuple[str, float]) -> str:
    return "zero" if init[0] == "zero" else f"gaussian({init[1]:g})"


@dataclass
class ExperimentConfig:
    experiment: str = "lasso-recovery"
    method: list[str] = field(default_factory=list)
    family: str = "sparse"
    q: list[float] = field(default_factory=lambda: [1.0])
    lambda_grid: list[float] = field(default_factory=lambda: one_two_five_grid(1e-3, 5.0))
    lambda_schedule: str = "constant"
    epoch_length: int = 0
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_dir: str = "runs"
    diagnostics_every: int = 1000
    init: list[str] = field(default_factory=lambda: ["zero"])
    variance_probes: int = 0
    # stepper
    step_schedule: str = "constant"
    alpha0: float = 1e-3
    decay_factor: float = 1.0
    milestones: list[int] = field(default_factory=list)
    momentum_schedule: str = "constant"
    rho0: float = 0.9
    mu: float = 1.0
    precond: str = "adam-ema"
    beta: float = 0.999
    delta: float = 1e-8
    zeta: float = 0.0
    batch_size: int = 10
    max_iters: int = 20000
    hard_quantize_at: int = 0
    # lasso instance
    p: int = 500
    n: int = 100
    k: int = 10
    noise: float = 0.05
    # mlp instance
    n_train: int = 600
    n_test: int = 400
    input_dim: int = 20
    hidden_dim: int = 16
    classes: int = 4
    separation: float = 3.0
    activation: str = "tanh"
    pretrain_iters: int = 2000
    # prox fuzz
    samples: int = 10000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}")
        if not self.lambda_grid:
            raise ConfigurationError("lambda_grid must not be empty")
        if any(not (lam >= 0 and math.isfinite(lam)) for lam in self.lambda_grid):
            raise ConfigurationError("lambda_grid values must be non-negative and finite")
        if not self.seeds:
            raise ConfigurationError("seeds must not be empty")
        if any(s < 0 or s >= 2**64 for s in self.seeds):
            raise ConfigurationError("seeds must be 64-bit unsigned integers")
        if self.diagnostics_every < 1:
            raise ConfigurationError("diagnostics_every must be positive")
        if not self.q:
            raise ConfigurationError("q must not be empty")
        for m in self.method:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}")
        if self.precond not in PRECOND_KINDS:
            raise ConfigurationError(f"unknown preconditioner {self.precond!r}")
        for text in self.init:
            parse_init(text)
        if self.samples < 1:
            raise ConfigurationError("samples must be positive")
        # builds every schedule once so bad values surface here
        self.stepper("proxgen" if self.family == "sparse" else "proxquant-original", self.q[0], self.lambda_grid[0])

    # -- derived pieces ----------------------------------------------------

    def methods(self) -> list[str]:
        if self.method:
            return list(self.method)
        return {
            "lasso-recovery": ["proxgen", "prox-sgd"],
            "sparse-mlp": ["proxgen-w", "subgradient"],
            "quant-mlp": ["proxquant-original", "proxgen"],
            "prox-fuzz": [],
        }[self.experiment]

    def inits(self) -> list[tuple[str, float]]:
        return [parse_init(v) for v in self.init]

    def lambda_sched(self, lam: float) -> LambdaSchedule:
        if self.lambda_schedule == "homotopy":
            length = self.epoch_length or max(1, self.n_train // self.batch_size)
            return LambdaSchedule("homotopy", lam, length)
        return LambdaSchedule(self.lambda_schedule, lam, max(1, self.epoch_length))

    def stepper(self, method: str, q: float, lam: float, **overrides) -> StepperConfig:
        reg = RegularizerSpec(self.family, q, self.lambda_sched(lam))
        cfg = StepperConfig(
            method=method,
            step_schedule=StepSchedule(self.step_schedule, self.alpha0, self.decay_factor, tuple(self.milestones)),
            momentum_schedule=MomentumSchedule(self.momentum_schedule, self.rho0, self.mu),
            regularizer=reg,
            precond_kind=self.precond,
            beta=self.beta,
            delta=self.delta,
            zeta=self.zeta if method in ("proxgen-w", "subgradient") else 0.0,
            batch_size=self.batch_size,
            max_iters=self.max_iters,
            hard_quantize_at=self.hard_quantize_at or None,
        )
        return replace(cfg, **overrides) if overrides else cfg

    def resolved(self) -> dict:
        d = asdict(self)
        d["method"] = self.methods()
        d["init"] = [init_label(i) for i in self.inits()]
        return d


_LIST_PARSERS = {"method": _strs, "q": lambda s: [parse_q(v) for v in _strs(s)], "lambda_grid": _floats,
                 "seeds": _ints, "init": _strs, "milestones": _ints}


def _convert(name: str, text: str):
    if name in _LIST_PARSERS:
        return _LIST_PARSERS[name](text)
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{name}: cannot parse {text!r} as {kind}") from None
    return text.strip()


def parse_config_text(text: str, experiment: str | None = None, **overrides) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from ``key = value`` lines.

    Precedence, lowest first: per-experiment defaults, the file, `overrides`.
    A file naming a different experiment than `experiment` is rejected.
    """
    known = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, value)
    name = values.pop("experiment", experiment)
    if experiment is not None and name != experiment:
        raise ConfigurationError(f"config file is for {name!r}, command line asked for {experiment!r}")
    if name is None:
        raise ConfigurationError("no experiment named")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return default_config(name, **values)


def load_config(path, experiment: str | None = None, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config_text(text, experiment, **overrides)


# -- output ---------------------------------------------------------------


def run_id(method: str, q: float, lam: float, seed: int, init: str) -> str:
    raw = f"{method}_q{q_label(q)}_lam{float(lam)!r}_seed{seed}_{init}"
    return re.sub(r"[^A-Za-z0-9_.+-]", "-", raw)


def write_records(path: Path, records) -> None:
    from .diagnostics import RunRecord

    cols = RunRecord.columns()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            d = r.as_dict()
            w.writerow([_fmt(d[c]) for c in cols])


def summary_text(columns: list[str], rows: list[dict]) -> str:
    """Summary CSV body (header row and data rows) without the timestamp line."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_summary(path: Path, columns: list[str], rows: list[dict]) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# generated {stamp}\n")
        fh.write(summary_text(columns, rows))


def read_summary(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


SUMMARY_COLUMNS = [
    "experiment", "method", "family", "q", "lambda", "seed", "init", "status", "iterations",
    "objective", "stationarity_bound", "sparsity", "support_precision", "support_recall", "support_f1",
    "ever_nonzero", "train_accuracy", "test_accuracy", "dense_test_accuracy", "objective_osc", "message",
]

FUZZ_COLUMNS = ["operator", "family", "q", "samples", "max_gap", "mean_gap", "dead_zone_samples",
                "dead_zone_violations", "zero_lambda_gap"]


@dataclass(frozen=True)
class Cell:
    experiment: str
    method: str
    q: float
    lam: float
    seed: int
    init: tuple[str, float]


def _cell_row(cfg: ExperimentConfig, cell: Cell) -> dict:
    return {"experiment": cell.experiment, "method": cell.method, "family": cfg.family, "q": q_label(cell.q),
            "lambda": cell.lam, "seed": cell.seed, "init": init_label(cell.init)}


def _theta0(cell: Cell, dim: int, problem_init=None) -> np.ndarray:
    if cell.init[0] == "gaussian":
        return cell.init[1] * RngStream(cell.seed, INIT_STREAM).generator().standard_normal(dim)
    if problem_init is not None:
        return problem_init
    return np.zeros(dim)


def _osc(records, frac: float = 0.2) -> float:
    obj = np.array([r.objective for r in records])
    if obj.size < 2:
        return 0.0
    tail = obj[-max(2, int(math.ceil(frac * obj.size))):]
    return float(np.std(tail))


def _finish_run(cfg, cell, problem, stepper, theta0, out_dir: Path, callback=None):
    row = _cell_row(cfg, cell)
    rid = run_id(cell.method, cell.q, cell.lam, cell.seed, init_label(cell.init))
    try:
        result = run(problem, stepper, RngStream(cell.seed, BATCH_STREAM), cfg.diagnostics_every,
                     theta0=theta0, variance_probes=cfg.variance_probes, callback=callback)
    except DivergenceError as err:
        write_records(out_dir / f"records_{rid}.csv", err.records)
        row.update(status="diverged", iterations=err.t, message=str(err))
        return row, None
    write_records(out_dir / f"records_{rid}.csv", result.records)
    last = result.records[-1] if result.records else None
    row.update(status=result.status, iterations=result.iterations)
    if last is not None:
        row.update(objective=last.objective, stationarity_bound=last.stationarity_bound, sparsity=last.sparsity,
                   support_precision=last.support_precision, support_recall=last.support_recall,
                   support_f1=last.support_f1, objective_osc=_osc(result.records))
    return row, result


# -- lasso recovery -----------------------------------------------------------


def lasso_cell(cfg: ExperimentConfig, cell: Cell, out_dir: Path) -> dict:
    _, problem = generate_lasso(cfg.p, cfg.n, cfg.k, cfg.noise, RngStream(cell.seed, DATA_STREAM))
    stepper = cfg.stepper(cell.method, cell.q, cell.lam)
    theta0 = _theta0(cell, problem.dim)
    seen = {"any": np.zeros(problem.dim, dtype=bool)}

    def track(outcome):
        seen["any"] |= outcome.theta_next != 0.0

    row, _ = _finish_run(cfg, cell, problem, stepper, theta0, out_dir, callback=track)
    # number of coordinates that were ever nonzero after an update
    row["ever_nonzero"] = int(np.count_nonzero(seen["any"]))
    return row


# -- MLP experiments ----------------------------------------------------------


def _mlp_data(cfg: ExperimentConfig, seed: int):
    data = generate_blobs(cfg.n_train + cfg.n_test, cfg.input_dim, cfg.classes, cfg.separation,
                          RngStream(seed, DATA_STREAM))
    train, test = data.split(cfg.n_train)
    spec = MlpSpec(cfg.input_dim, cfg.hidden_dim, cfg.classes, cfg.activation)
    return spec, train, test


def sparse_mlp_cell(cfg: ExperimentConfig, cell: Cell, out_dir: Path) -> dict:
    spec, train, test = _mlp_data(cfg, cell.seed)
    problem = MlpProblem(spec, train.X, train.y)
    theta0 = spec.init(RngStream(cell.seed, INIT_STREAM)) if cell.init[0] == "zero" else _theta0(cell, spec.n_params)
    stepper = cfg.stepper(cell.method, cell.q, cell.lam)
    row, result = _finish_run(cfg, cell, problem, stepper, theta0, out_dir)
    if result is not None:
        row.update(train_accuracy=problem.accuracy(result.theta),
                   test_accuracy=problem.accuracy(result.theta, test.X, test.y))
    return row


def pretrain_dense(cfg: ExperimentConfig, seed: int):
    """Dense starting point for the quantization runs: plain Adam-style training, lambda = 0."""
    spec, train, test = _mlp_data(cfg, seed)
    problem = MlpProblem(spec, train.X, train.y)
    stepper = cfg.stepper("proxgen", cfg.q[0], 0.0, max_iters=cfg.pretrain_iters, hard_quantize_at=None,
                          regularizer=RegularizerSpec("sparse", 1.0, LambdaSchedule()), precond_kind="adam-ema")
    theta0 = spec.init(RngStream(seed, INIT_STREAM))
    result = run(problem, stepper, RngStream(seed, DATA_STREAM + 100), max(1, cfg.pretrain_iters), theta0=theta0)
    return spec, train, test, problem, result.theta


def quant_mlp_cell(cfg: ExperimentConfig, cell: Cell, out_dir: Path) -> dict:
    spec, train, test, problem, dense = pretrain_dense(cfg, cell.seed)
    stepper = cfg.stepper(cell.method, cell.q, cell.lam)
    row, result = _finish_run(cfg, cell, problem, stepper, dense, out_dir)
    row["dense_test_accuracy"] = problem.accuracy(dense, test.X, test.y)
    if result is not None:
        row.update(train_accuracy=problem.accuracy(result.theta),
                   test_accuracy=problem.accuracy(result.theta, test.X, test.y))
        if result.quantized_at is not None:
            row["message"] = f"hard-quantized at iteration {result.quantized_at}"
    return row


# -- prox fuzz ---------------------------------------------------------------

FUZZ_OPERATORS = [
    ("prox_l1", "sparse", 1.0),
    ("prox_l0", "sparse", 0.0),
    ("prox_l_half", "sparse", 0.5),
    ("prox_l_two_thirds", "sparse", 2.0 / 3.0),
    ("prox_quant_lq", "quant", 0.0),
    ("prox_quant_lq", "quant", 0.5),
    ("prox_quant_lq", "quant", 2.0 / 3.0),
    ("prox_quant_lq", "quant", 1.0),
]


def fuzz_inputs(seed: int, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Signed log-uniform z in [-10, 10] and log-uniform lambda_eff in [1e-6, 10]."""
    gen = RngStream(seed, FUZZ_STREAM).generator()
    mag = log_uniform(gen, 1e-6, 10.0, samples)
    z = np.where(gen.random(samples) < 0.5, -mag, mag)
    le = log_uniform(gen, 1e-6, 10.0, samples)
    return z, le


def fuzz_operator(family: str, q: float, z: np.ndarray, lambda_eff: np.ndarray) -> dict:
    """Closed form against the brute-force oracle on (z, lambda_eff) samples with kappa = alpha = 1."""
    pen = Penalty(family, q)
    op = prox_quant_lq if family == "quant" else prox_sparse_lq
    x = op(z, 1.0, 1.0, lambda_eff / 2.0, q)
    ref = prox_oracle_1d(z, lambda_eff, pen)
    gap = scalar_objective(x, z, lambda_eff, pen) - scalar_objective(ref, z, lambda_eff, pen)
    if family == "sparse":
        dead = np.abs(z) <= dead_zone_threshold(q, lambda_eff)
        bad = dead & ~((x == 0.0) & ~np.signbit(x))
    else:
        # shifted dead zone: snapped outputs must be exactly 0 or +-1
        near = np.where(z >= 0, 1.0, -1.0)
        dead = np.abs(z - near) <= dead_zone_threshold(q, lambda_eff)
        bad = dead & ~np.isin(x, (-1.0, 0.0, 1.0))
    x0 = op(z[:16], 1.0, 1.0, 0.0, q)
    zero_gap = float(np.max(scalar_objective(x0, z[:16], 0.0, pen) - scalar_objective(z[:16], z[:16], 0.0, pen)))
    return {"max_gap": float(np.max(gap)), "mean_gap": float(np.mean(gap)),
            "dead_zone_samples": int(np.count_nonzero(dead)), "dead_zone_violations": int(np.count_nonzero(bad)),
            "zero_lambda_gap": zero_gap, "samples": int(z.size)}


def _fuzz_cell(args) -> dict:
    name, family, q, seed, samples = args
    z, le = fuzz_inputs(seed, samples)
    row = {"operator": name, "family": family, "q": q_label(q)}
    row.update(fuzz_operator(family, q, z, le))
    return row


# -- driver --------------------------------------------------------------------


def grid_cells(cfg: ExperimentConfig) -> list[Cell]:
    cells = []
    lams = list(cfg.lambda_grid)
    if cfg.experiment == "sparse-mlp" and 0.0 not in lams:
        lams = [0.0] + lams
    for method in cfg.methods():
        for q in cfg.q:
            # prox-sgd is only defined for convex regularizers
            if method == "prox-sgd" and q != 1.0:
                continue
            if method == "subgradient" and q == 0.0:
                continue
            for lam in lams:
                for seed in cfg.seeds:
                    for init in cfg.inits():
                        cells.append(Cell(cfg.experiment, method, q, lam, seed, init))
    return cells


_CELL_RUNNERS = {"lasso-recovery": lasso_cell, "sparse-mlp": sparse_mlp_cell, "quant-mlp": quant_mlp_cell}


def _run_cell(args) -> dict:
    cfg, cell, out_dir = args
    try:
        return _CELL_RUNNERS[cfg.experiment](cfg, cell, out_dir)
    except (ArithmeticError, FloatingPointError) as err:
        row = _cell_row(cfg, cell)
        row.update(status="failed", message=f"{type(err).__name__}: {err}")
        return row


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class ExperimentResult:
    out_dir: Path
    rows: list[dict]
    failures: int


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    out_dir = Path(cfg.output_dir) / cfg.experiment
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    except OSError as err:
        raise OSError(err.errno, f"cannot write results: {err.strerror}", str(out_dir)) from None
    if cfg.experiment == "prox-fuzz":
        tasks = [(name, fam, q, seed, cfg.samples) for seed in cfg.seeds for name, fam, q in FUZZ_OPERATORS]
        rows = _map(_fuzz_cell, tasks, jobs)
        for row, task in zip(rows, tasks):
            row["seed"] = task[3]
        write_summary(out_dir / "summary.csv", FUZZ_COLUMNS + ["seed"], rows)
        return ExperimentResult(out_dir, rows, 0)
    cells = grid_cells(cfg)
    rows = _map(_run_cell, [(cfg, c, out_dir) for c in cells], jobs)
    write_summary(out_dir / "summary.csv", SUMMARY_COLUMNS, rows)
    failures = sum(1 for r in rows if r.get("status") != "ok")
    return ExperimentResult(out_dir, rows, failures)


def run_lasso_recovery(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    _expect(cfg, "lasso-recovery")
    return run_experiment(cfg, jobs)


def run_sparse_mlp(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    _expect(cfg, "sparse-mlp")
    return run_experiment(cfg, jobs)


def run_quant_mlp(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    _expect(cfg, "quant-mlp")
    return run_experiment(cfg, jobs)


def run_prox_fuzz(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    _expect(cfg, "prox-fuzz")
    return run_experiment(cfg, jobs)


def _expect(cfg: ExperimentConfig, name: str):
    if cfg.experiment != name:
        raise ConfigurationError(f"configuration is for {cfg.experiment!r}, not {name!r}")


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Per-experiment defaults layered under explicit overrides."""
    base: dict = {"experiment": experiment}
    if experiment == "lasso-recovery":
        base.update(init=["zero", "gaussian(0.1)"])
    elif experiment == "sparse-mlp":
        base.update(max_iters=3000, batch_size=32, zeta=1e-4, diagnostics_every=100)
    elif experiment == "quant-mlp":
        base.update(family="quant", lambda_schedule="homotopy", max_iters=2000, batch_size=32,
                    hard_quantize_at=2000, diagnostics_every=100)
    if experiment not in EXPERIMENTS:
        raise ConfigurationError(f"unknown experiment {experiment!r}")
    base.update(overrides)
    return ExperimentConfig(**base)
