"""Experiment drivers behind the command-line subcommands.

Each driver expands an ``ExperimentConfig`` into independent sweep items,
runs them through ``run_sweep``, writes CSV/JSON results stamped with the
config hash, and returns the property checks it evaluated.
"""

from __future__ import annotations

from collections.abc import Callable
import math
from pathlib import Path
import statistics
import time
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats
import structlog

from calderon_lab.core.conductivity import (
    bump_conductivity,
    homogeneous_conductivity,
    link_apply,
    make_cutoff,
    sup_distance,
)
from calderon_lab.core.forward import DtnAssembler, build_mesh, concentric_dtn_matrix
from calderon_lab.core.inference import (
    initial_state,
    optimal_truncation,
    pcn_step,
    run_chain,
    test_statistic as hypothesis_test,
    truncation_estimator,
)
from calderon_lab.core.measurement import (
    ContinuousData,
    chi_square_variance_test,
    electrode_matrix,
    electrode_to_spectral,
    kl_divergence,
    kl_divergence_mc,
    spectral_to_electrode,
    synth_electrode,
    synth_spectral,
    two_point_risk_bound,
    two_point_threshold,
)
from calderon_lab.core.prior import GaussianPrior
from calderon_lab.core.rng import CHAIN_STREAM, NOISE_STREAM, make_rng, replicate_seed
from calderon_lab.core.runner import run_sweep
from calderon_lab.core.spectral import (
    hs_distance,
    hs_norm,
    hs_norm_between,
    op_norm_star,
    truncate,
)
from calderon_lab.models.chain import LikelihoodContext, MaternSpec
from calderon_lab.models.conductivity import (
    ConcentricConductivity,
    ConductivityField,
    ConductivityLike,
    LinkFunction,
)
from calderon_lab.models.config import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    ExperimentKind,
    NoiseModel,
    TruthKind,
)
from calderon_lab.models.measurement import ElectrodeLayout, SpectralData
from calderon_lab.models.results import ExperimentResult
from calderon_lab.models.spectral import OperatorMatrix
from calderon_lab.utils.file_ops import write_csv_result, write_json_result

logger = structlog.get_logger(__name__)

VARIANCE_LAW_EPS = (1.0, 0.1, 0.01)
VARIANCE_LAW_SIZE = 100
MC_SIGMAS = 3.0
LECAM_CHUNK = 500
SLOPE_FORWARD_MIN = 0.4
SLOPE_EQUIVALENCE = (0.5, 1.05)
PRIOR_CHAIN_STEPS = 4000
PRIOR_CHAIN_BETA = 0.9
PRIOR_CHAIN_TOLERANCE = 0.1


class FitError(ExperimentError):
    """A log-log fit was requested on too few or non-positive points."""


class _Task(BaseModel):
    """Picklable sweep item: the resolved config plus item coordinates."""

    model_config = ConfigDict(frozen=True)

    config: ExperimentConfig
    eps: float = 0.0
    seed: int = 0
    value: float = 0.0
    P: int = 0
    kappa: float = 0.0


def build_truth(
    config: ExperimentConfig,
) -> tuple[ConductivityField, ConductivityLike, tuple[float, ...]]:
    """Ground truth as (grid field, solver conductivity, fitted mesh radii)."""
    g = config.geometry
    truth = config.truth
    if truth.kind == TruthKind.HOMOGENEOUS:
        field = homogeneous_conductivity(g.grid_n, support_radius=g.r1)
        return field, field, ()
    if truth.kind == TruthKind.CONCENTRIC:
        inclusion = ConcentricConductivity(kappa=truth.kappa, rho=truth.rho)
        field = inclusion.to_field(g.grid_n, support_radius=max(truth.rho + 1e-9, g.r1))
        return field, inclusion, (truth.rho,)
    cutoff = make_cutoff(g.r0, g.r1, g.grid_n)
    prior = GaussianPrior(MaternSpec(**config.prior.model_dump()), 1.0, cutoff)
    theta = prior.draw(truth.prior_seed).theta
    field = link_apply(theta, LinkFunction(m1=g.m1), support_radius=g.r1)
    return field, field, ()


def truth_matrix(
    config: ExperimentConfig, J: int, K: int, r: float = 0.0  # noqa: N803
) -> OperatorMatrix:
    """Lambda~ of the configured truth: analytic when available, else assembled."""
    truth = config.truth
    if truth.kind == TruthKind.HOMOGENEOUS:
        return OperatorMatrix.zeros(J, K, r)
    if truth.kind == TruthKind.CONCENTRIC:
        return concentric_dtn_matrix(truth.kappa, truth.rho, J, K, r)
    _, conductor, fitted = build_truth(config)
    mesh = build_mesh(config.solver.mesh_h, fitted)
    return DtnAssembler(mesh, J, K, r).assemble(conductor)


def fit_loglog(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x.

    Raises:
        FitError: With fewer than two points or non-positive values
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape[0] < 2:
        raise FitError(f"log-log fit needs at least two points, got {xs.shape[0]}")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise FitError("log-log fit needs strictly positive values")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _spectral_data(
    config: ExperimentConfig, conductor: ConductivityLike, mesh: Any, eps: float, seed: int
) -> SpectralData:
    noise = config.noise
    if noise.model == NoiseModel.SPECTRAL:
        S = DtnAssembler(mesh, noise.J, noise.K, noise.r).assemble(conductor)  # noqa: N806
        return synth_spectral(S, eps, seed)
    electrode = synth_electrode(conductor, eps, ElectrodeLayout(P=noise.P), mesh, seed)
    return electrode_to_spectral(electrode, noise.J, noise.K).as_spectral(seed)


def _recover_item(task: _Task) -> dict[str, Any]:
    cfg = task.config
    g, noise, chain = cfg.geometry, cfg.noise, cfg.chain
    truth_field, conductor, fitted = build_truth(cfg)
    mesh = build_mesh(cfg.solver.mesh_h, fitted)
    r = noise.r if noise.model == NoiseModel.SPECTRAL else 0.0

    started = time.perf_counter()
    data = _spectral_data(cfg, conductor, mesh, task.eps, task.seed)
    cutoff = make_cutoff(g.r0, g.r1, g.grid_n)
    link = LinkFunction(m1=g.m1)
    prior = GaussianPrior(MaternSpec(**cfg.prior.model_dump()), min(task.eps, 1.0), cutoff)
    ctx = LikelihoodContext(
        data=data, assembler=DtnAssembler(mesh, noise.J, noise.K, r), link=link, cutoff=cutoff
    )
    coarse = None
    if chain.burn_in_mesh_h is not None:
        coarse_mesh = build_mesh(chain.burn_in_mesh_h, fitted)
        coarse = LikelihoodContext(
            data=data,
            assembler=DtnAssembler(coarse_mesh, noise.J, noise.K, r),
            link=link,
            cutoff=cutoff,
        )
    summary = run_chain(
        ctx,
        prior,
        chain.beta,
        chain.n_iter,
        chain.burn_in,
        task.seed,
        coarse_ctx=coarse,
        coherence_check_every=chain.coherence_check_every,
        truth=truth_field,
    )
    runtime = time.perf_counter() - started

    baseline_gamma = link_apply(prior.draw(task.seed).theta, link, support_radius=g.r1)
    baseline = sup_distance(baseline_gamma, truth_field)
    prior_mean = link_apply(np.zeros_like(truth_field.values), link, support_radius=g.r1)
    return {
        "eps": task.eps,
        "seed": task.seed,
        "sup_error": summary.sup_error,
        "baseline_error": baseline,
        "prior_mean_error": sup_distance(prior_mean, truth_field),
        "acceptance_rate": summary.acceptance_rate,
        "mc_standard_error": summary.mc_standard_error,
        "chain_length": summary.chain_length,
        "burn_in": summary.burn_in,
        "mesh_h": summary.mesh_h,
        "burn_in_mesh_h": summary.burn_in_mesh_h,
        "runtime": runtime,
        "trace": summary.trace,
    }


def _stability_item(task: _Task) -> dict[str, float]:
    cfg = task.config
    st = cfg.stability
    gamma = bump_conductivity(task.value, st.bump_radius, cfg.geometry.grid_n)
    reference = homogeneous_conductivity(cfg.geometry.grid_n, support_radius=st.bump_radius)
    mesh = build_mesh(cfg.solver.mesh_h)
    S = DtnAssembler(mesh, st.J, st.J, cfg.noise.r).assemble(gamma)  # noqa: N806
    return {
        "t": task.value,
        "sup_distance": sup_distance(gamma, reference),
        "hs_distance": hs_norm(S),
        "star_distance": op_norm_star(S),
        "hs_half": hs_norm_between(S, 0.5, -0.5),
    }


def _empirical_covariance(samples: np.ndarray) -> np.ndarray:
    return samples.T @ samples / samples.shape[0]


def _lecam_item(task: _Task) -> dict[str, float]:
    cfg = task.config
    lc = cfg.lecam
    layout = ElectrodeLayout(P=task.P)
    a_j = electrode_matrix(layout, lc.J, start=1)
    a_k = electrode_matrix(layout, lc.K, start=1)
    n = lc.J * lc.K
    rng = make_rng(task.seed, NOISE_STREAM, task.P)
    cov = np.zeros((n, n))
    for start in range(0, lc.replicates, LECAM_CHUNK):
        size = min(LECAM_CHUNK, lc.replicates - start)
        g = rng.standard_normal((size, task.P, task.P))
        projected = np.einsum("jp,rpq,kq->rjk", a_j, g, a_k).reshape(size, n)
        cov += projected.T @ projected
    cov /= lc.replicates
    exact = np.kron(a_j @ a_j.T, a_k @ a_k.T)
    return {
        "P": task.P,
        "exact_deviation": float(np.max(np.abs(exact - np.eye(n)))),
        "empirical_deviation": float(np.max(np.abs(cov - np.eye(n)))),
        "mc_mismatch": float(np.max(np.abs(cov - exact))),
    }


def _klcheck_item(task: _Task) -> dict[str, float]:
    cfg = task.config
    kc = cfg.klcheck
    L1 = concentric_dtn_matrix(task.kappa, kc.rho, kc.J, kc.K)  # noqa: N806
    L0 = OperatorMatrix.zeros(kc.J, kc.K)  # noqa: N806
    closed = kl_divergence(L1, L0, task.eps)
    mc, stderr = kl_divergence_mc(L1, L0, task.eps, kc.replicates, task.seed)
    return {
        "kappa": task.kappa,
        "eps": task.eps,
        "closed_form": closed,
        "monte_carlo": mc,
        "stderr": stderr,
        "log_ratio_variance": stderr**2 * kc.replicates,
    }


def _truncation_item(task: _Task) -> dict[str, Any]:
    cfg = task.config
    tc = cfg.truncation
    master = tc.master_J
    truth = truth_matrix(cfg, master, master)
    zero = OperatorMatrix.zeros(master, master)
    j_opt = min(optimal_truncation(task.eps, tc.alpha), master)
    candidates = sorted({max(1, j_opt // 2), j_opt, min(2 * j_opt, master)})
    threshold = 5.0 * task.eps * j_opt

    losses = {J: np.empty(tc.replicates) for J in candidates}
    null_norms = np.empty(tc.replicates)
    rejections_null = 0
    rejections_alt = 0
    for i in range(tc.replicates):
        seed_i = replicate_seed(task.seed, i)
        data = synth_spectral(truth, task.eps, seed_i)
        for J in candidates:  # noqa: N806
            losses[J][i] = hs_distance(truncation_estimator(data, J), truth) ** 2
        rejections_null += hypothesis_test(data, truth, j_opt, threshold)
        rejections_alt += hypothesis_test(data, zero, j_opt, threshold)
        noise_only = synth_spectral(zero, task.eps, seed_i)
        null_norms[i] = hs_norm(truncation_estimator(noise_only, j_opt)) ** 2

    rows = [
        {
            "eps": task.eps,
            "seed": task.seed,
            "J": J,
            "role": "optimal" if J == j_opt else ("half" if J < j_opt else "double"),
            "risk": float(losses[J].mean()),
            "risk_se": float(losses[J].std(ddof=1) / math.sqrt(tc.replicates)),
        }
        for J in candidates
    ]
    return {
        "eps": task.eps,
        "seed": task.seed,
        "J_opt": j_opt,
        "threshold": threshold,
        "rows": rows,
        "chi2_mean": float(null_norms.mean()),
        "chi2_expected": task.eps**2 * j_opt**2,
        "chi2_se": float(null_norms.std(ddof=1) / math.sqrt(tc.replicates)),
        "null_rejection_rate": rejections_null / tc.replicates,
        "power": rejections_alt / tc.replicates,
        "separation": hs_norm(truncate(truth, j_opt, j_opt)),
    }


def _fmt(value: float) -> str:
    return f"{value:g}"


class ExperimentService:
    """Runs one configured experiment and writes its result files."""

    def __init__(
        self,
        config: ExperimentConfig,
        out_dir: Path | None = None,
        *,
        workers: int = 1,
        show_progress: bool = True,
    ) -> None:
        self.config = config
        self.out_dir = out_dir or config.output.directory
        self.workers = workers
        self.show_progress = show_progress
        self.config_hash = config.config_hash()

    def run(self) -> ExperimentResult:
        handlers: dict[ExperimentKind, Callable[[], ExperimentResult]] = {
            ExperimentKind.RECOVER: self.recover,
            ExperimentKind.STABILITY: self.stability,
            ExperimentKind.LECAM: self.lecam,
            ExperimentKind.KLCHECK: self.klcheck,
            ExperimentKind.TRUNCATION: self.truncation,
        }
        logger.info(
            "Running experiment",
            experiment=self.config.experiment.value,
            config_hash=self.config_hash[:12],
            workers=self.workers,
        )
        return handlers[self.config.experiment]()

    def _result(self) -> ExperimentResult:
        return ExperimentResult(experiment=self.config.experiment, config_hash=self.config_hash)

    def _sweep(self, fn: Callable[[_Task], Any], tasks: list[_Task], label: str) -> list[Any]:
        return run_sweep(
            fn, tasks, workers=self.workers, description=label, show_progress=self.show_progress
        )

    def _json(self, result: ExperimentResult, name: str, data: dict[str, Any]) -> None:
        payload = {"config": self.config.model_dump(mode="json"), **data}
        result.files.append(
            write_json_result(self.out_dir / name, payload, config_hash=self.config_hash)
        )

    def _csv(
        self, result: ExperimentResult, name: str, header: list[str], rows: list[list[Any]]
    ) -> None:
        result.files.append(
            write_csv_result(self.out_dir / name, header, rows, config_hash=self.config_hash)
        )

    def recover(self) -> ExperimentResult:
        """Posterior-mean recovery for every (eps, seed)."""
        cfg = self.config
        if cfg.noise.model == NoiseModel.ELECTRODE and cfg.noise.r != 0.0:
            raise ConfigError("electrode data are converted at r = 0; set noise.r = 0")
        result = self._result()
        tasks = [_Task(config=cfg, eps=e, seed=s) for e in cfg.noise.eps for s in cfg.seeds]
        runs = self._sweep(_recover_item, tasks, "Posterior chains")

        record_runtime = cfg.output.record_runtime
        header = [
            "eps",
            "seed",
            "sup_error",
            "baseline_error",
            "prior_mean_error",
            "acceptance",
            "mc_standard_error",
        ]
        if record_runtime:
            header.append("runtime")
        rows = []
        for run in runs:
            tag = f"eps{_fmt(run['eps'])}_seed{run['seed']}"
            trace = run.pop("trace")
            runtime = run.pop("runtime")
            if record_runtime:
                run["runtime"] = runtime
            self._json(result, f"runs/recover_{tag}.json", {"summary": run})
            self._csv(
                result,
                f"runs/trace_{tag}.csv",
                ["step", "loglik", "accepted", "sup_theta"],
                [list(t) for t in trace],
            )
            row = [
                run["eps"],
                run["seed"],
                run["sup_error"],
                run["baseline_error"],
                run["prior_mean_error"],
                run["acceptance_rate"],
                run["mc_standard_error"],
            ]
            if record_runtime:
                row.append(runtime)
            rows.append(row)
            # the prior mean Phi(0) = 1 is exact for a homogeneous truth
            if run["prior_mean_error"] > 0.0:
                name, reference = "prior mean", run["prior_mean_error"]
            else:
                name, reference = "prior draw", run["baseline_error"]
            result.add_check(
                f"posterior beats {name} baseline ({tag})",
                run["sup_error"] < reference,
                f"sup_error={run['sup_error']:.4g}, baseline={reference:.4g}",
            )
        self._csv(result, "recover.csv", header, rows)

        variance, expected = prior_chain_variance(cfg, cfg.seeds[0])
        if expected > 0.0:
            preserved = abs(variance / expected - 1.0) < PRIOR_CHAIN_TOLERANCE
        else:
            preserved = variance == 0.0
        result.add_check(
            "likelihood-free chain preserves the prior variance",
            preserved,
            f"chain={variance:.4g}, prior={expected:.4g}",
        )

        levels = sorted(set(cfg.noise.eps), reverse=True)
        if len(levels) > 1:
            medians = [
                statistics.median(r["sup_error"] for r in runs if r["eps"] == e) for e in levels
            ]
            result.add_check(
                "median sup-error nonincreasing as eps decreases",
                all(b <= a for a, b in zip(medians, medians[1:], strict=False)),
                ", ".join(f"eps={_fmt(e)}: {m:.4g}" for e, m in zip(levels, medians, strict=True)),
            )
        return result

    def stability(self) -> ExperimentResult:
        """Forward stability and norm equivalence along t -> 1 + t bump."""
        cfg = self.config
        t_values = cfg.stability.t_values
        if len(t_values) < 2:
            raise FitError(
                f"stability sweep needs at least two family members, got {len(t_values)}"
            )
        result = self._result()
        tasks = [_Task(config=cfg, value=t) for t in t_values]
        points = self._sweep(_stability_item, tasks, "Stability family")

        columns = ["t", "sup_distance", "hs_distance", "star_distance", "hs_half"]
        self._csv(result, "stability.csv", columns, [[p[c] for c in columns] for p in points])

        sup = np.array([p["sup_distance"] for p in points])
        hs = np.array([p["hs_distance"] for p in points])
        star = np.array([p["star_distance"] for p in points])
        slopes = {
            "forward": fit_loglog(sup, hs),
            "hs_vs_star": fit_loglog(star, hs),
            "star_vs_hs": fit_loglog(hs, star),
            "inverse": fit_loglog(hs, sup),
        }
        self._json(result, "stability_fit.json", {"slopes": slopes})

        lo, hi = SLOPE_EQUIVALENCE
        result.add_check(
            "forward Holder exponent",
            slopes["forward"] >= SLOPE_FORWARD_MIN,
            f"slope={slopes['forward']:.4g} (>= {SLOPE_FORWARD_MIN})",
        )
        for key in ("hs_vs_star", "star_vs_hs"):
            result.add_check(
                f"norm equivalence exponent {key}",
                lo <= slopes[key] <= hi,
                f"slope={slopes[key]:.4g} in [{lo}, {hi}]",
            )
        result.add_check(
            "operator norm below Hilbert-Schmidt norm",
            all(p["star_distance"] <= p["hs_half"] * (1.0 + 1e-12) for p in points),
        )
        return result

    def lecam(self) -> ExperimentResult:
        """Electrode/spectral kernel study over the P grid."""
        cfg = self.config
        lc = cfg.lecam
        if not lc.p_grid:
            raise ConfigError("lecam.p_grid must not be empty")
        result = self._result()
        seed = cfg.seeds[0]
        p_grid = sorted(set(lc.p_grid))
        tasks = [_Task(config=cfg, P=p, seed=seed) for p in p_grid]
        rows = self._sweep(_lecam_item, tasks, "Electrode to spectral")

        columns = ["P", "exact_deviation", "empirical_deviation", "mc_mismatch"]
        self._csv(result, "lecam.csv", columns, [[r[c] for c in columns] for r in rows])

        exact = [r["exact_deviation"] for r in rows]
        result.add_check(
            "covariance deviation strictly decreasing in P",
            all(b < a for a, b in zip(exact, exact[1:], strict=False)),
            ", ".join(f"P={r['P']}: {r['exact_deviation']:.4g}" for r in rows),
        )
        n = lc.J * lc.K
        z = float(stats.norm.isf(0.001 / (2 * n * n)))
        tolerance = z * math.sqrt(2.0 / lc.replicates)
        result.add_check(
            "empirical covariance matches kron(G_J, G_K)",
            all(r["mc_mismatch"] <= tolerance for r in rows),
            f"tolerance={tolerance:.4g}",
        )

        exactness = spectral_to_electrode_study(
            lc.exactness_P, lc.eps, lc.replicates, seed, master=4 * lc.exactness_P
        )
        fidelity = composition_fidelity(cfg, max(p_grid))
        self._json(result, "lecam_exactness.json", {**exactness, "composition_error": fidelity})
        result.add_check(
            "spectral to electrode noise covariance is identity",
            exactness["max_deviation"] <= exactness["tolerance"],
            f"max deviation {exactness['max_deviation']:.4g} <= {exactness['tolerance']:.4g}",
        )
        result.add_check(
            "spectral to electrode noise variance law",
            exactness["variance_p_value"] > 0.001,
            f"p={exactness['variance_p_value']:.4g}",
        )
        result.add_check(
            "composition returns the projected operator",
            fidelity < 1e-3,
            f"hs error {fidelity:.3g} at P={max(p_grid)}",
        )
        return result

    def klcheck(self) -> ExperimentResult:
        """Closed-form versus Monte Carlo KL and the two-point bound table."""
        cfg = self.config
        kc = cfg.klcheck
        result = self._result()
        tasks = [
            _Task(config=cfg, kappa=k, eps=e, seed=cfg.seeds[0]) for k in kc.kappas for e in kc.eps
        ]
        rows = self._sweep(_klcheck_item, tasks, "KL Monte Carlo")
        columns = ["kappa", "eps", "closed_form", "monte_carlo", "stderr", "log_ratio_variance"]
        self._csv(result, "klcheck.csv", columns, [[r[c] for c in columns] for r in rows])
        for r in rows:
            tag = f"kappa={_fmt(r['kappa'])}, eps={_fmt(r['eps'])}"
            result.add_check(
                f"KL closed form matches Monte Carlo ({tag})",
                abs(r["closed_form"] - r["monte_carlo"]) <= MC_SIGMAS * r["stderr"] + 1e-12,
                f"{r['closed_form']:.6g} vs {r['monte_carlo']:.6g} +- {r['stderr']:.2g}",
            )
            var_se = r["log_ratio_variance"] * math.sqrt(2.0 / (kc.replicates - 1))
            result.add_check(
                f"log-ratio variance equals twice the KL ({tag})",
                abs(r["log_ratio_variance"] - 2.0 * r["closed_form"]) <= MC_SIGMAS * var_se + 1e-12,
            )

        bounds = [[mu, two_point_risk_bound(mu)] for mu in kc.mu_grid]
        self._csv(result, "two_point.csv", ["mu", "bound"], bounds)
        threshold = two_point_threshold(0.25)
        variance_law = []
        for eps in VARIANCE_LAW_EPS:
            data = synth_spectral(
                OperatorMatrix.zeros(VARIANCE_LAW_SIZE, VARIANCE_LAW_SIZE), eps, cfg.seeds[0]
            )
            passed, p_value = chi_square_variance_test(data.Y, eps)
            variance_law.append({"eps": eps, "p_value": p_value, "passed": passed})
        self._json(
            result, "klcheck.json", {"two_point_threshold": threshold, "variance_law": variance_law}
        )
        result.add_check("two-point bound at zero is 1/3", two_point_risk_bound(0.0) == 1.0 / 3.0)
        result.add_check(
            "two-point bound above 1/4 for mu <= 0.01",
            all(b > 0.25 for mu, b in bounds if mu <= 0.01) and threshold > 0.01,
            f"threshold mu*={threshold:.6g}",
        )
        for entry in variance_law:
            result.add_check(
                f"spectral noise variance law (eps={_fmt(entry['eps'])})",
                entry["passed"],
                f"p={entry['p_value']:.4g}",
            )
        return result

    def truncation(self) -> ExperimentResult:
        """Bias-variance sweep of the spectral-truncation estimator and test."""
        cfg = self.config
        result = self._result()
        tasks = [_Task(config=cfg, eps=e, seed=s) for e in cfg.truncation.eps for s in cfg.seeds]
        items = self._sweep(_truncation_item, tasks, "Truncation estimator")

        columns = ["eps", "seed", "J", "role", "risk", "risk_se"]
        rows = [[row[c] for c in columns] for item in items for row in item["rows"]]
        self._csv(result, "truncation.csv", columns, rows)
        summaries = [{k: v for k, v in item.items() if k != "rows"} for item in items]
        self._json(result, "truncation.json", {"runs": summaries})

        for item in items:
            tag = f"eps={_fmt(item['eps'])}, seed={item['seed']}"
            risks = {row["role"]: row["risk"] for row in item["rows"]}
            optimal = risks["optimal"]
            result.add_check(
                f"optimal truncation minimises risk ({tag})",
                all(optimal <= v for v in risks.values()),
                ", ".join(f"{k}={v:.4g}" for k, v in risks.items()),
            )
            result.add_check(
                f"chi-square mean of pure-noise estimator ({tag})",
                abs(item["chi2_mean"] - item["chi2_expected"]) <= MC_SIGMAS * item["chi2_se"],
                f"{item['chi2_mean']:.4g} vs {item['chi2_expected']:.4g}",
            )
            result.add_check(
                f"test rejects the truth rarely ({tag})",
                item["null_rejection_rate"] < 0.01,
                f"rate={item['null_rejection_rate']:.4g}",
            )
            if item["separation"] > 2.0 * item["threshold"]:
                result.add_check(
                    f"test detects a separated alternative ({tag})",
                    item["power"] > 0.99,
                    f"power={item['power']:.4g}",
                )
        return result


def spectral_to_electrode_study(
    P: int,  # noqa: N803
    eps: float,
    replicates: int,
    seed: int,
    *,
    master: int = 32,
) -> dict[str, float]:
    """Empirical covariance of spectral-to-electrode noise against the identity."""
    layout = ElectrodeLayout(P=P)
    signal = OperatorMatrix.zeros(master, master)
    samples = np.empty((replicates, P * P))
    for i in range(replicates):
        data = ContinuousData(signal, eps, replicate_seed(seed, i))
        samples[i] = spectral_to_electrode(data, layout).Y.ravel() / eps
    cov = _empirical_covariance(samples)
    n = P * P
    z = float(stats.norm.isf(0.001 / (2 * n * n)))
    _, p_value = chi_square_variance_test(samples, 1.0)
    return {
        "P": P,
        "replicates": replicates,
        "max_deviation": float(np.max(np.abs(cov - np.eye(n)))),
        "tolerance": z * math.sqrt(2.0 / replicates),
        "variance_p_value": p_value,
    }


def composition_fidelity(config: ExperimentConfig, P: int, master: int = 16) -> float:  # noqa: N803
    """HS error of the noiseless electrode round trip against pi_JK Lambda."""
    lc = config.lecam
    signal = truth_matrix(config, master, master)
    electrode = spectral_to_electrode(ContinuousData(signal, 0.0, 0), ElectrodeLayout(P=P))
    projected = electrode_to_spectral(electrode, lc.J, lc.K)
    return hs_distance(OperatorMatrix(entries=projected.Y), truncate(signal, lc.J, lc.K))


def prior_chain_variance(
    config: ExperimentConfig, seed: int, steps: int = PRIOR_CHAIN_STEPS
) -> tuple[float, float]:
    """Variance of theta(0) along a likelihood-free pCN chain, and the prior's exact value.

    With the likelihood weight at zero every proposal is accepted and the
    chain must leave the prior invariant.
    """
    g = config.geometry
    eps = min(max(config.noise.eps), 1.0)
    cutoff = make_cutoff(g.r0, g.r1, g.grid_n)
    prior = GaussianPrior(MaternSpec(**config.prior.model_dump()), eps, cutoff)
    ctx = LikelihoodContext(
        data=synth_spectral(OperatorMatrix.zeros(1, 1), eps, seed),
        assembler=DtnAssembler(build_mesh(0.4), 1, 1),
        cutoff=cutoff,
        weight=0.0,
    )
    center = prior.grid_n // 2
    burn_in = steps // 20
    rng = make_rng(seed, CHAIN_STREAM)
    state = initial_state(np.zeros((prior.grid_n, prior.grid_n)), ctx)
    values = np.empty(steps)
    for i in range(burn_in + steps):
        state = pcn_step(state, PRIOR_CHAIN_BETA, ctx, prior, rng)
        if i >= burn_in:
            values[i - burn_in] = state.theta[center, center]
    expected = (prior.factor * config.prior.amplitude * cutoff.values[center, center]) ** 2
    return float(values.var()), float(expected)


def cmd_recover(
    config: ExperimentConfig, out_dir: Path | None = None, **kwargs: Any
) -> ExperimentResult:
    return ExperimentService(config, out_dir, **kwargs).recover()


def cmd_stability(
    config: ExperimentConfig, out_dir: Path | None = None, **kwargs: Any
) -> ExperimentResult:
    return ExperimentService(config, out_dir, **kwargs).stability()


def cmd_lecam(
    config: ExperimentConfig, out_dir: Path | None = None, **kwargs: Any
) -> ExperimentResult:
    return ExperimentService(config, out_dir, **kwargs).lecam()


def cmd_klcheck(
    config: ExperimentConfig, out_dir: Path | None = None, **kwargs: Any
) -> ExperimentResult:
    return ExperimentService(config, out_dir, **kwargs).klcheck()


def cmd_truncation(
    config: ExperimentConfig, out_dir: Path | None = None, **kwargs: Any
) -> ExperimentResult:
    return ExperimentService(config, out_dir, **kwargs).truncation()
