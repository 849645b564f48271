"""Experiment configuration, pipeline dispatch and JSON reports."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hyquls import __version__
from hyquls.cv_inversion import DetectionNoise, StepWindow, detection_filter, ideal_inverse_filter
from hyquls.data import Dataset, format_csv, generate_blobs, load_csv, scale_to_unit_ball
from hyquls.dual import VARIANTS, build_dual, rotate_dual, solve_dual, solve_qp_projected_gradient
from hyquls.hvq import HvqConfig, fit_hvq
from hyquls.kernels import KernelSpec, gram_matrix, kernel_matrix
from hyquls.lssvm import build_saddle_system, sign, solve_lssvm_direct, solve_plssvm
from hyquls.qsls import (
    CompressedProblem,
    kernel_spectrum,
    project_components,
    qsls_decision_values,
    solve_compressed,
    truncated_solution,
    truncation_error_bound,
)

ALGORITHMS = ("classical", "plssvm", "hvq", "qsls", "dual", "dual-rotated")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def derive_seed(seed: int, label: str) -> int:
    """Subsystem seed from the run seed by labelled hashing."""
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _threads() -> int:
    raw = os.environ.get("HYQULS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class HvqSection:
    L: float | None = None
    eps_q: float = 0.0
    shots: int | None = None


@dataclass
class QslsSection:
    tau: float = 0.0
    t_max: int | None = None
    shots: int | None = None


@dataclass
class DualSection:
    variant: str = "printed"
    tol: float = 1e-8
    max_iters: int = 100_000


@dataclass
class ExperimentConfig:
    dataset: dict
    kernel: KernelSpec = field(default_factory=KernelSpec.linear)
    gamma: float = 1.0
    algorithm: str = "classical"
    scale: bool = False
    hvq: HvqSection = field(default_factory=HvqSection)
    qsls: QslsSection = field(default_factory=QslsSection)
    dual: DualSection = field(default_factory=DualSection)
    probes: object = "training"
    seed: int = 0
    out: str | None = None
    base_dir: str = "."

    @classmethod
    def from_json(cls, obj: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("$", "config must be a JSON object")
        known = {"dataset", "kernel", "gamma", "algorithm", "scale", "hvq", "qsls", "dual", "probes", "seed", "out"}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"$.{sorted(extra)[0]}", "unknown field")
        if "dataset" not in obj:
            raise ConfigError("$.dataset", "required")
        ds = obj["dataset"]
        if not isinstance(ds, dict) or len(set(ds) & {"path", "blobs", "inline"}) != 1:
            raise ConfigError("$.dataset", "needs exactly one of path, blobs, inline")
        try:
            kernel = KernelSpec.from_json(obj.get("kernel", {"kind": "linear"}))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError("$.kernel", str(exc)) from None
        gamma = obj.get("gamma", 1.0)
        if not isinstance(gamma, (int, float)) or not gamma > 0:
            raise ConfigError("$.gamma", "must be a positive number")
        algo = obj.get("algorithm", "classical")
        if algo not in ALGORITHMS:
            raise ConfigError("$.algorithm", f"must be one of {', '.join(ALGORITHMS)}")

        def section(name, kind):
            raw = obj.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"$.{name}", "must be an object")
            try:
                return kind(**raw)
            except TypeError as exc:
                raise ConfigError(f"$.{name}", str(exc)) from None

        hvq = section("hvq", HvqSection)
        if hvq.L is not None and not hvq.L > 0:
            raise ConfigError("$.hvq.L", "must be positive")
        if hvq.eps_q < 0:
            raise ConfigError("$.hvq.eps_q", "must be >= 0")
        if hvq.shots is not None and hvq.shots < 1:
            raise ConfigError("$.hvq.shots", "must be >= 1")
        qsls = section("qsls", QslsSection)
        if qsls.tau < 0:
            raise ConfigError("$.qsls.tau", "must be >= 0")
        if qsls.t_max is not None and qsls.t_max < 1:
            raise ConfigError("$.qsls.t_max", "must be >= 1")
        dual = section("dual", DualSection)
        if dual.variant not in VARIANTS:
            raise ConfigError("$.dual.variant", f"must be one of {', '.join(VARIANTS)}")
        seed = obj.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("$.seed", "must be a nonnegative integer")
        return cls(
            dataset=ds,
            kernel=kernel,
            gamma=float(gamma),
            algorithm=algo,
            scale=bool(obj.get("scale", False)),
            hvq=hvq,
            qsls=qsls,
            dual=dual,
            probes=obj.get("probes", "training"),
            seed=seed,
            out=obj.get("out"),
            base_dir=str(base_dir),
        )

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "kernel": self.kernel.to_json(),
            "gamma": self.gamma,
            "algorithm": self.algorithm,
            "scale": self.scale,
            "hvq": asdict(self.hvq),
            "qsls": asdict(self.qsls),
            "dual": asdict(self.dual),
            "probes": self.probes,
            "seed": self.seed,
            "out": self.out,
        }


def _resolve(base_dir: str, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(base_dir) / p


def load_dataset(spec: dict, base_dir: str = ".") -> Dataset:
    if "path" in spec:
        path = _resolve(base_dir, spec["path"])
        if not path.exists():
            raise ConfigError("$.dataset.path", f"file not found: {path}")
        return load_csv(path, spec.get("label_column", -1))
    if "blobs" in spec:
        b = spec["blobs"]
        try:
            return generate_blobs(b["m_per_class"], b.get("n", 2), b.get("separation", 6.0), b.get("seed", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("$.dataset.blobs", str(exc)) from None
    inline = spec["inline"]
    try:
        return Dataset(np.array(inline["features"], dtype=float), np.array(inline["labels"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("$.dataset.inline", str(exc)) from None


def dataset_hash(dataset: Dataset) -> str:
    return hashlib.sha256(format_csv(dataset).encode()).hexdigest()


def _load_probes(config: ExperimentConfig, training: Dataset) -> np.ndarray:
    probes = config.probes
    if probes == "training":
        return training.features
    if isinstance(probes, list):
        arr = np.array(probes, dtype=float)
        arr = arr.reshape(-1, 1) if arr.ndim == 1 and training.n == 1 else np.atleast_2d(arr)
    elif isinstance(probes, dict) and "path" in probes:
        path = _resolve(config.base_dir, probes["path"])
        if not path.exists():
            raise ConfigError("$.probes.path", f"file not found: {path}")
        arr = read_probe_csv(path, probes.get("label_column"))
    else:
        raise ConfigError("$.probes", "must be 'training', a list of points or {path: ...}")
    if arr.shape[1] != training.n:
        raise ConfigError("$.probes", f"probes have {arr.shape[1]} features, training data has {training.n}")
    return arr


def read_probe_csv(path, label_column=None) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8"))) if r]
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    if label_column is not None:
        width = len(rows[0])
        col = label_column % width
        rows = [[c for j, c in enumerate(r) if j != col] for r in rows]
    return np.array([[float(c) for c in r] for r in rows])


def _floats(values) -> list:
    return [float(v) for v in np.ravel(values)]


def _classical(data, kernel, gamma, probes, method="direct"):
    g = gram_matrix(kernel, data)
    if method == "direct":
        model = solve_lssvm_direct(build_saddle_system(g, gamma, data.labels))
    else:
        model = solve_plssvm(g, gamma, data.labels)
    values = model.alpha @ kernel_matrix(kernel, data.features, probes) + model.b
    return {"alpha": _floats(model.alpha), "b": float(model.b), "decision_values": _floats(values)}


def _hvq(config, data, probes):
    window = StepWindow(config.hvq.L) if config.hvq.L is not None else None
    hcfg = HvqConfig(window, DetectionNoise(config.hvq.eps_q), config.hvq.shots, derive_seed(config.seed, "hvq"))
    model = fit_hvq(data, config.kernel, config.gamma, hcfg)
    values = model.decision_values(probes)
    res = model.result
    return {
        "alpha": _floats(res.alpha_s[:-1]),
        "b": float(res.alpha_s[-1]),
        "decision_values": _floats(values),
        "window_L": float(res.window.L),
        "eps_q": config.hvq.eps_q,
        "shots": config.hvq.shots,
        "ledger": {"ys_norm": res.ledger.ys_norm, "solution_norm": res.ledger.solution_norm},
        "eigen_table": res.table(),
    }


def _qsls(config, data, probes, bounds: bool = False):
    g = gram_matrix(config.kernel, data)
    spec = kernel_spectrum(g, config.qsls.tau, config.qsls.t_max)
    if spec.retained == 0:
        raise ArithmeticError("threshold leaves no retained components")
    proj = project_components(spec, data.labels, config.qsls.shots, derive_seed(config.seed, "qsls"))
    sol = solve_compressed(CompressedProblem.build(spec, proj), config.gamma)
    kv = kernel_matrix(config.kernel, data.features, probes)
    values = qsls_decision_values(spec, sol, kv)
    sigma = spec.singular_values
    out = {
        "alpha": _floats(spec.eigenvectors[:, : spec.retained] @ sol.alpha_rot),
        "alpha_rot": _floats(sol.alpha_rot),
        "b": float(sol.b),
        "decision_values": _floats(values),
        "R": spec.rank,
        "T": spec.retained,
        "tau": spec.tau,
        "repetitions": spec.retained,
        "spectral_table": [
            {"sigma": float(sigma[i]), "u_dot_y": float(proj.y_rot[i]), "u_dot_1": float(proj.ones_rot[i])}
            for i in range(spec.rank)
        ],
    }
    if bounds and spec.retained < spec.rank:
        full = solve_compressed(CompressedProblem.build(spec, proj, spec.rank), config.gamma)
        trunc = truncated_solution(spec, full, spec.retained)
        g_full = qsls_decision_values(spec, full, kv)
        g_trunc = qsls_decision_values(spec, trunc, kv)

        def bound(j):
            return truncation_error_bound(spec, full.alpha_rot, kv[:, j], spec.retained)

        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            b = list(pool.map(bound, range(kv.shape[1])))
        out["error_bounds"] = [
            {"measured": float(abs(gf - gt)), "bound": float(bb)} for gf, gt, bb in zip(g_full, g_trunc, b)
        ]
    return out


def _dual(config, data, probes, rotated=False):
    g = gram_matrix(config.kernel, data)
    dual = build_dual(g, data.labels, config.gamma, config.dual.variant)
    sol = solve_dual(dual, config.dual.tol, config.dual.max_iters)
    w = dual.expansion(sol.alpha)
    values = w @ kernel_matrix(config.kernel, data.features, probes) + sol.b
    out = {
        "variant": config.dual.variant,
        "feasible_set": "original-box",
        "alpha": _floats(sol.alpha),
        "b": sol.b,
        "b_flagged": sol.b_flagged,
        "decision_values": _floats(values),
        "objective": sol.objective,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "pg_norm": sol.pg_norm,
        "kkt_residual": sol.kkt_residual,
    }
    if rotated:
        rq = rotate_dual(dual, kernel_spectrum(g))
        rsol = solve_qp_projected_gradient(rq, config.dual.tol, config.dual.max_iters)
        out["rotated"] = {
            "feasible_set": "rotated-box",
            "alpha_rot": _floats(rsol.alpha),
            "objective": rsol.objective,
            "iterations": rsol.iterations,
            "converged": rsol.converged,
            "pg_norm": rsol.pg_norm,
            "objective_gap_vs_original": rsol.objective - sol.objective,
        }
    return out


def _labels(values) -> list:
    return [int(s) for s in sign(values)]


def _prepare(config: ExperimentConfig):
    raw = load_dataset(config.dataset, config.base_dir)
    data, factor = raw, 1.0
    if config.scale:
        data, rep = scale_to_unit_ball(raw)
        factor = rep.global_scale
    probes = _load_probes(config, raw) * factor
    return raw, data, factor, probes


def run(config: ExperimentConfig, mode: str = "train") -> dict:
    """Run one algorithm (``mode="train"``) or the classical/HVQ/QSLS comparison."""
    start = time.perf_counter()
    raw, data, factor, probes = _prepare(config)
    results = {}
    algos = ["classical", "hvq", "qsls"] if mode == "compare" else [config.algorithm]
    for algo in algos:
        if algo == "classical":
            res = _classical(data, config.kernel, config.gamma, probes)
        elif algo == "plssvm":
            res = _classical(data, config.kernel, config.gamma, probes, method="plssvm")
        elif algo == "hvq":
            res = _hvq(config, data, probes)
        elif algo == "qsls":
            res = _qsls(config, data, probes, bounds=True)
        else:
            res = _dual(config, data, probes, rotated=algo == "dual-rotated")
        res["labels"] = _labels(res["decision_values"])
        results[algo] = res
    report = {
        "artifact": {"name": "hyquls", "version": __version__},
        "config": config.to_json(),
        "dataset": {"m": data.m, "n": data.n, "sha256": dataset_hash(raw), "feature_scale": factor},
        "probes": {"count": int(probes.shape[0])},
        "results": results,
    }
    if mode == "compare":
        ref = np.array(results["classical"]["decision_values"])
        ref_labels = np.array(results["classical"]["labels"])
        agreement = {}
        for algo in ("hvq", "qsls"):
            vals = np.array(results[algo]["decision_values"])
            agreement[algo] = {
                "label_agreement": float(np.mean(np.array(results[algo]["labels"]) == ref_labels)),
                "max_abs_diff": float(np.max(np.abs(vals - ref))),
            }
        report["agreement"] = agreement
    else:
        report["model"] = model_json(config, algos[0], results[algos[0]], raw, factor)
    report["timing"] = {"seconds": time.perf_counter() - start}
    return report


def model_json(config: ExperimentConfig, algo: str, res: dict, raw: Dataset, factor: float) -> dict:
    ds = dict(config.dataset)
    if "path" in ds:
        ds["path"] = str(_resolve(config.base_dir, ds["path"]).resolve())
    alpha = res["alpha"]
    if algo == "dual" or algo == "dual-rotated":
        alpha = _floats(build_dual(np.eye(raw.m), raw.labels, config.gamma, config.dual.variant).expansion(alpha))
    return {
        "algorithm": algo,
        "alpha": alpha,
        "b": res["b"],
        "kernel": config.kernel.to_json(),
        "training": {"dataset": ds, "sha256": dataset_hash(raw), "feature_scale": factor},
    }


def predict_from_model(model: dict, probes: np.ndarray, base_dir=".") -> dict:
    train = model["training"]
    raw = load_dataset(train["dataset"], base_dir)
    if dataset_hash(raw) != train["sha256"]:
        raise ConfigError("$.training.sha256", "training data does not match the recorded hash")
    kernel = KernelSpec.from_json(model["kernel"])
    factor = float(train.get("feature_scale", 1.0))
    feats = raw.features * factor
    probes = np.atleast_2d(probes) * factor
    if probes.shape[1] != raw.n:
        raise ConfigError("probes", f"probes have {probes.shape[1]} features, model expects {raw.n}")
    values = np.array(model["alpha"]) @ kernel_matrix(kernel, feats, probes) + model["b"]
    return {"decision_values": _floats(values), "labels": _labels(values)}


def filter_scan(l_list, eps_list, lambda_list) -> list[dict]:
    """Rows of (lambda, L, eps_q, F_ideal, F_hat) over the Cartesian product, sorted by inputs.

    lambda = 0 rows carry F_hat = None.
    """
    if not (l_list and eps_list and lambda_list):
        raise ValueError("all lists must be nonempty")
    rows = []
    for lam, L, eps in sorted(itertools.product(lambda_list, l_list, eps_list)):
        w = StepWindow(float(L))
        row = {"lambda": float(lam), "L": float(L), "eps_q": float(eps)}
        row["F_ideal"] = float(ideal_inverse_filter(lam, w))
        row["F_hat"] = None if lam == 0 else float(detection_filter(lam, w, DetectionNoise(float(eps))))
        rows.append(row)
    return rows


def format_scan_csv(rows) -> str:
    out = io.StringIO()
    out.write("lambda,L,eps_q,F_ideal,F_hat\n")
    for r in rows:
        cells = [r["lambda"], r["L"], r["eps_q"], r["F_ideal"], r["F_hat"]]
        out.write(",".join("NA" if c is None else format(c, ".17g") for c in cells) + "\n")
    return out.getvalue()


def spectrum_report(config: ExperimentConfig) -> dict:
    _, data, _, _ = _prepare(config)
    g = gram_matrix(config.kernel, data)
    spec = kernel_spectrum(g, config.qsls.tau, config.qsls.t_max)
    proj = project_components(spec, data.labels)
    return {
        "artifact": {"name": "hyquls", "version": __version__},
        "config": config.to_json(),
        "R": spec.rank,
        "T": spec.retained,
        "tau": spec.tau,
        "table": [
            {
                "index": i + 1,
                "lambda": float(spec.eigenvalues[i]),
                "sigma": float(math.sqrt(spec.eigenvalues[i])),
                "u_dot_y": float(proj.y_rot[i]),
                "u_dot_1": float(proj.ones_rot[i]),
                "retained": i < spec.retained,
            }
            for i in range(spec.m)
        ],
    }
