"""Simulation study: superpopulation models, replication runner, summary tables.

Seeds: the population of a cell comes from ``(seed, model, sigma key)`` so
every sample size of a model/noise pair shares one fixed population, and
replication r draws its sample from ``(seed, model, sigma key, n, r)``.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import draw_srs, make_srs, rng_for
from .estimators import estimate
from .sbll import BANDWIDTH_RULES, DEFAULT_BANDWIDTH_RULE, DEFAULT_BANDWIDTH_SCALE
from .selection import BicEvaluator, backward_select, forward_select
from .splinebasis import DEFAULT_KNOT_CONSTANT, PopulationFrame

ESTIMATORS = ("HT", "LREG", "LS", "SBLL")
CSV_COLUMNS = ("model", "sigma0", "n", "estimator", "bias", "se", "est_se", "mse",
               "mse_ratio_vs_sbll", "mean_fit_seconds", "failures")


def _sin(x):
    return np.sin(2 * np.pi * (x - 0.5))


# active covariates are 0-based: model 1 uses x3 and x6
MODELS = {
    1: dict(active=(2, 5), mean=lambda X: -1 + 2 * X[:, 2] + 4 * X[:, 5],
            sd=lambda X, s: np.full(len(X), s)),
    2: dict(active=(1, 9),
            mean=lambda X: 5.5 - 6 * X[:, 1] + 8 * (X[:, 1] - .5) ** 2 - 3 * X[:, 9] + 32 * (X[:, 9] - .5) ** 3,
            sd=lambda X, s: np.full(len(X), s)),
    3: dict(active=(1, 4, 7),
            mean=lambda X: 8 * (X[:, 1] - .5) ** 2 + np.exp(2 * X[:, 4] - 1) + _sin(X[:, 7]),
            sd=lambda X, s: np.full(len(X), s)),
    4: dict(active=(0, 1, 2, 3, 4), mean=lambda X: 2 + _sin(X[:, :5]).sum(axis=1),
            sd=lambda X, s: s / 2 * np.sqrt(X[:, :5].sum(axis=1))),
}


def sigma_key(sigma0: float) -> int:
    return int(round(sigma0 * 10000))


def gen_population(model: int, N: int = 1000, sigma0: float = 0.1, d_total: int = 10, seed=0) -> PopulationFrame:
    """Uniform(0,1) covariates and one of the four additive test models."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {sorted(MODELS)}")
    spec = MODELS[model]
    if d_total < max(spec["active"]) + 1:
        raise ValueError(f"model {model} needs at least {max(spec['active']) + 1} covariates")
    rng = rng_for(*seed) if isinstance(seed, tuple) else rng_for(seed)
    X = rng.random((N, d_total))
    eps = rng.standard_normal(N)
    y = spec["mean"](X) + spec["sd"](X, sigma0) * eps
    return PopulationFrame(X, y, [f"x{k + 1}" for k in range(d_total)])


def true_sigma2(model: int, frame: PopulationFrame, sigma0: float) -> np.ndarray:
    return MODELS[model]["sd"](frame.covariates, sigma0) ** 2


@dataclass
class SimConfig:
    model: int
    n: int
    sigma0: float = 0.1
    N: int = 1000
    reps: int = 1000
    seed: int = 0
    estimators: tuple[str, ...] = ESTIMATORS
    knot_constant: float = DEFAULT_KNOT_CONSTANT
    bandwidth_scale: float = DEFAULT_BANDWIDTH_SCALE
    bandwidth_rule: str = DEFAULT_BANDWIDTH_RULE
    columns: tuple[int, ...] | None = None  # default: the model's active covariates
    d_total: int = 10
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {sorted(MODELS)}")
        self.estimators = tuple(e.upper() for e in self.estimators)
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators {sorted(bad)}")
        if self.bandwidth_rule not in BANDWIDTH_RULES:
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")

    @property
    def population_seed(self) -> tuple[int, ...]:
        return (self.seed, self.model, sigma_key(self.sigma0))

    def rep_seed(self, rep: int) -> tuple[int, ...]:
        return (self.seed, self.model, sigma_key(self.sigma0), self.n, rep)

    def active(self) -> tuple[int, ...]:
        return tuple(MODELS[self.model]["active"]) if self.columns is None else tuple(self.columns)

    def population(self) -> PopulationFrame:
        return gen_population(self.model, self.N, self.sigma0, self.d_total, self.population_seed)


@dataclass
class EstimatorSummary:
    bias: float
    se: float
    est_se: float
    mse: float
    mse_ratio: float = float("nan")
    failures: int = 0
    mean_fit_seconds: float = float("nan")


@dataclass
class CellResult:
    """Per-estimator Monte Carlo summaries plus the raw replicate values.

    ``se`` is the replicate standard deviation (ddof=1), so
    mse = bias^2 + se^2 (reps - 1) / reps. ``est_se`` is N sqrt(mean V),
    V the HT-type variance estimate of N^-1 times the total.
    """

    config: SimConfig
    t_y: float
    summaries: dict[str, EstimatorSummary]
    estimates: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    variances: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


_POP_CACHE: dict = {}


def _population(config: SimConfig) -> PopulationFrame:
    key = (config.model, config.N, sigma_key(config.sigma0), config.d_total, config.seed)
    if key not in _POP_CACHE:
        _POP_CACHE.clear()
        _POP_CACHE[key] = config.population()
    return _POP_CACHE[key]


def _run_reps(config: SimConfig, reps: range):
    frame = _population(config)
    design = make_srs(config.N, config.n)
    cols = config.active()
    out = []
    for rep in reps:
        sample = draw_srs(design, frame, config.rep_seed(rep))
        row = {}
        for name in config.estimators:
            t0 = time.perf_counter()
            try:
                rep_ = estimate(sample, frame, name.lower(), cols, config.knot_constant, config.bandwidth_scale,
                                config.bandwidth_rule)
                value = (rep_.total, rep_.variance_ht)
                if not (math.isfinite(value[0]) and math.isfinite(value[1])):
                    value = None
            except (ValueError, np.linalg.LinAlgError):
                value = None
            row[name] = (value, time.perf_counter() - t0)
        out.append((rep, row))
    return out


def _chunks(reps: int, workers: int) -> list[range]:
    size = max(1, math.ceil(reps / max(workers, 1)))
    return [range(s, min(reps, s + size)) for s in range(0, reps, size)]


def _parallel(fn, config: SimConfig, total: int):
    chunks = _chunks(total, config.workers)
    if config.workers <= 1 or len(chunks) == 1:
        results = [fn(config, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(fn, [config] * len(chunks), chunks))
    rows = [r for part in results for r in part]
    rows.sort(key=lambda item: item[0])
    return rows


def run_cell(config: SimConfig) -> CellResult:
    """Draw ``reps`` SRS samples from one fixed population and summarise."""
    frame = _population(config)
    t_y = frame.total
    rows = _parallel(_run_reps, config, config.reps)
    N = config.N
    summaries, estimates, variances = {}, {}, {}
    for name in config.estimators:
        vals = [row[name][0] for _, row in rows]
        ok = [v for v in vals if v is not None]
        t = np.array([v[0] for v in ok])
        v = np.array([v[1] for v in ok])
        estimates[name], variances[name] = t, v
        err = t - t_y
        s = EstimatorSummary(
            bias=float(err.mean()) if len(t) else float("nan"),
            se=float(t.std(ddof=1)) if len(t) > 1 else float("nan"),
            est_se=float(N * np.sqrt(v.mean())) if len(v) else float("nan"),
            mse=float(np.mean(err**2)) if len(t) else float("nan"),
            failures=len(vals) - len(ok),
        )
        if config.timing:
            s.mean_fit_seconds = float(np.mean([row[name][1] for _, row in rows]))
        summaries[name] = s
    if "SBLL" in summaries:
        base = summaries["SBLL"].mse
        for s in summaries.values():
            s.mse_ratio = s.mse / base if base > 0 else float("nan")
    return CellResult(config, t_y, summaries, estimates, variances)


@dataclass
class SelectionSummary:
    method: str
    correct: int
    underfit: int
    overfit: int
    mse_ratio: float
    chosen: list[tuple[int, ...]] = field(repr=False, default_factory=list)

    @property
    def reps(self) -> int:
        return self.correct + self.underfit + self.overfit


def classify(chosen, active) -> str:
    chosen, active = set(chosen), set(active)
    if not active <= chosen:
        return "U"
    return "C" if chosen == active else "O"


def _run_selection_reps(config: SimConfig, reps: range, methods=("forward", "backward")):
    frame = _population(config)
    design = make_srs(config.N, config.n)
    active = tuple(MODELS[config.model]["active"])
    candidates = list(range(config.d_total))
    tuning = (config.knot_constant, config.bandwidth_scale)
    rule = config.bandwidth_rule
    out = []
    for rep in reps:
        sample = draw_srs(design, frame, config.rep_seed(rep))
        bic = BicEvaluator(sample, frame, *tuning, bandwidth_rule=rule)  # shared by both searches
        t_true = estimate(sample, frame, "sbll", active, *tuning, rule).total
        found = {}
        for method in methods:
            search = forward_select if method == "forward" else backward_select
            chosen = search(sample, frame, candidates, evaluator=bic).chosen
            t_sel = t_true if chosen == active else estimate(sample, frame, "sbll", chosen, *tuning, rule).total
            found[method] = (chosen, t_sel)
        out.append((rep, (found, t_true)))
    return out


def _selection_both(config, reps):
    return _run_selection_reps(config, reps)


def run_selection_study(config: SimConfig) -> dict[str, SelectionSummary]:
    """Forward and backward selection on the same replications.

    Returns one summary per method: correct/under/overfit counts and the
    MSE of selected-model SBLL over the MSE of true-model SBLL.
    """
    t_y = _population(config).total
    rows = _parallel(_selection_both, config, config.reps)
    active = MODELS[config.model]["active"]
    out = {}
    for method in ("forward", "backward"):
        counts = {"C": 0, "U": 0, "O": 0}
        chosen = []
        se_sel = se_true = 0.0
        for _, (found, t_true) in rows:
            ch, t_sel = found[method]
            counts[classify(ch, active)] += 1
            chosen.append(ch)
            se_sel += (t_sel - t_y) ** 2
            se_true += (t_true - t_y) ** 2
        out[method] = SelectionSummary(method, counts["C"], counts["U"], counts["O"], se_sel / se_true, chosen)
    return out


def run_selection_experiment(config: SimConfig, method: str = "forward") -> SelectionSummary:
    """Correct/under/overfit counts and MSE of selected-model vs true-model SBLL."""
    if method not in ("forward", "backward"):
        raise ValueError("method must be 'forward' or 'backward'")
    return run_selection_study(config)[method]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(round(x, 10))
    return str(x)


def summarize(results: list[CellResult]) -> tuple[str, str]:
    """CSV text (one row per cell and estimator) and an aligned text table."""
    if not results:
        raise ValueError("no cells to summarise")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    lines = [f"{'model':>5} {'sigma0':>6} {'n':>5} {'estimator':>9} {'bias':>9} {'se':>9} "
             f"{'est_se':>9} {'mse_ratio':>10}"]
    for cell in results:
        cfg = cell.config
        if not cell.summaries:
            raise ValueError("cell has an empty estimator list")
        for name, s in cell.summaries.items():
            writer.writerow([cfg.model, _fmt(float(cfg.sigma0)), cfg.n, name, _fmt(s.bias), _fmt(s.se),
                             _fmt(s.est_se), _fmt(s.mse), _fmt(s.mse_ratio), _fmt(s.mean_fit_seconds),
                             s.failures])
            lines.append(f"{cfg.model:>5} {cfg.sigma0:>6.2f} {cfg.n:>5} {name:>9} {s.bias:>9.3f} "
                         f"{s.se:>9.3f} {s.est_se:>9.3f} {s.mse_ratio:>10.3f}")
    return buf.getvalue(), "\n".join(lines) + "\n"


def read_summary_csv(text: str) -> list[dict]:
    """Parse summary CSV back into typed rows."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for key in CSV_COLUMNS:
            val = rec[key]
            if key in ("model", "n", "failures"):
                row[key] = int(val)
            elif key == "estimator":
                row[key] = val
            else:
                row[key] = float(val) if val != "" else float("nan")
        rows.append(row)
    return rows


def selection_table(summaries: list[tuple[SimConfig, SelectionSummary]]) -> str:
    lines = [f"{'model':>5} {'sigma0':>6} {'n':>5} {'method':>8} {'C':>4} {'U':>4} {'O':>4} {'mse_ratio':>10}"]
    for cfg, s in summaries:
        lines.append(f"{cfg.model:>5} {cfg.sigma0:>6.2f} {cfg.n:>5} {s.method:>8} {s.correct:>4} "
                     f"{s.underfit:>4} {s.overfit:>4} {s.mse_ratio:>10.4f}")
    return "\n".join(lines) + "\n"
