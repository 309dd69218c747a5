"""Command-line front end: ``fermicluster <command> <model-file> [options]``.

Exit status: 0 when every asserted invariant holds, 1 when a mathematical
check fails, 2 on input errors.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from fermicluster import __version__, bounds, checks, cumulants, discretize, fock
from fermicluster.modelfile import ModelFile, ModelFileError, load_model, parse_model
from fermicluster.report import FORMATS, RunReport, Verdict, emit

COMMANDS = ("exact", "discretize", "bounds", "cluster-check", "verify")
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def bundled_models() -> list[str]:
    root = resources.files("fermicluster") / "models"
    return sorted(p.name[: -len(".model")] for p in root.iterdir() if p.name.endswith(".model"))


def resolve_model(name: str) -> ModelFile:
    """A path on disk, or the name of a bundled model."""
    if Path(name).exists():
        return load_model(name)
    stem = name[: -len(".model")] if name.endswith(".model") else name
    if stem in bundled_models():
        text = (resources.files("fermicluster") / "models" / f"{stem}.model").read_text()
        return parse_model(text, f"{stem}.model")
    raise ModelFileError("no such file or bundled model", 0, 0, name)


def _verdicts(check_list) -> list[Verdict]:
    out = []
    for c in check_list:
        detail = f"value {c.value:.6g} vs {c.threshold:.6g}" + (f" ({c.detail})" if c.detail else "")
        out.append(Verdict(c.name, c.passed, detail))
    return out


def _complex_rows(name, m, table):
    rows = []
    for idx in itertools.product(range(table.shape[0]), repeat=table.ndim):
        z = complex(table[idx])
        rows.append([name, m, " ".join(map(str, idx)), z.real, z.imag])
    return rows


def cmd_exact(mf: ModelFile, rng) -> RunReport:
    spec, run = mf.spec, mf.run
    z = fock.partition_function(spec)
    rows = []
    worst = 0.0
    for m in range(1, run.m_max + 1):
        if m > spec.n_modes:
            break
        rows += _complex_rows("gamma", m, cumulants.moment_table(spec, m).entries)
        tlog = cumulants.cumulant_table(spec, m, cumulants.GRASSMANN_LOG).entries
        tpart = cumulants.cumulant_table(spec, m, cumulants.PARTITION).entries
        worst = max(worst, float(np.max(np.abs(tlog - tpart))))
        rows += _complex_rows("gamma_T", m, tlog)
    g1 = cumulants.moment_table(spec, 1).entries
    herm = float(np.max(np.abs(g1 - g1.conj().T)))
    verdicts = _verdicts([
        checks._le("truncated expectations: partition formula = log generating function", worst, 1e-9),
        checks._le("gamma_1 hermitian", herm, 1e-12),
    ])
    results = {"Z": z, "log_Z": float(np.log(z)), "mean_particle_number": float(fock.expectation(spec, fock.number_operator(spec.n_modes)).real)}
    return RunReport("exact", mf.path, {}, ["quantity", "m", "indices", "re", "im"], rows, results, verdicts)


def cmd_discretize(mf: ModelFile, rng) -> RunReport:
    spec, run = mf.spec, mf.run
    n_list = list(run.N)
    conv = discretize.convergence_study(spec, n_list, run.source_degree)
    rows = []
    for r in conv:
        q = discretize.build_Q(r.N, spec.beta, spec.energy)
        qr = float(np.max(np.abs(q @ discretize.build_R(r.N, spec.beta, spec.energy) - np.eye(q.shape[0]))))
        rows.append([r.N, r.trace_rel_error, r.trace_ratio, r.body_rel_error, r.ratio, r.max_coeff_error, qr])
    clist = [checks.check_finite_identity(spec, run.identity_N, run.source_degree)]
    clist.append(checks._le("Q R = 1", max(row[-1] for row in rows), 1e-12))
    if spec.interactions:
        ratios = [r.ratio for r in conv if r.ratio is not None]
        if ratios:
            clist.append(checks._in_band("convolution formula error halves as N doubles", ratios))
    results = {"Z": fock.partition_function(spec), "Z0": discretize.free_partition_function(spec)}
    columns = ["N", "trace_rel_error", "trace_ratio", "rel_error", "ratio", "max_coeff_error", "qr_residual"]
    return RunReport("discretize", mf.path, {}, columns, rows, results, _verdicts(clist))


def cmd_bounds(mf: ModelFile, rng) -> RunReport:
    spec, run = mf.spec, mf.run
    rep = bounds.bounds_summary(spec, run.quad_tol)
    rows = []
    per = max(1, run.detbound_trials // run.detbound_max_size)
    for size in range(1, run.detbound_max_size + 1):
        s = bounds.detbound_sample_check(spec, size, per, rng)
        rows.append([size, per, s.max_ratio, s.ok])
    results = {
        "delta": rep.delta,
        "alpha": rep.alpha,
        "omega": rep.omega,
        "v_norm_3delta": rep.v_norm_3delta,
        "omega_v_norm_3delta": rep.hypothesis_value,
    }
    verdicts = [Verdict(f"sampled determinants of size {r[0]} <= delta^(2n)", r[3], f"max ratio {r[2]:.6g}") for r in rows]
    return RunReport("bounds", mf.path, {}, ["size", "trials", "max_ratio", "pass"], rows, results, verdicts)


def hypothesis_line(rep: bounds.BoundsReport) -> str:
    return f"omega*||V||_{{3δ}} = {rep.hypothesis_value:.17g} <= 0.5: {'yes' if rep.hypothesis_ok else 'no'}"


def cmd_cluster_check(mf: ModelFile, rng) -> RunReport:
    spec, run = mf.spec, mf.run
    rep = bounds.clustering_check(spec, run.m_max, run.quad_tol)
    rows = [[r.m, r.lhs, r.rhs, r.passed] for r in rep.rows]
    verdicts = [Verdict(f"l1-clustering m={r.m}", r.passed, f"lhs {r.lhs:.6g} rhs {r.rhs:.6g}") for r in rep.rows]
    results = {"delta": rep.delta, "alpha": rep.alpha, "omega": rep.omega, "v_norm_3delta": rep.v_norm_3delta}
    return RunReport("cluster-check", mf.path, {}, ["m", "lhs", "rhs", "pass"], rows, results, verdicts, [hypothesis_line(rep)])


def cmd_verify(mf: ModelFile, rng) -> RunReport:
    clist = checks.verify_suite(mf.spec, mf.run, rng)
    rows = [[c.name, c.value, c.threshold, c.passed] for c in clist]
    return RunReport("verify", mf.path, {}, ["check", "value", "threshold", "pass"], rows, {}, _verdicts(clist))


HANDLERS = {
    "exact": cmd_exact,
    "discretize": cmd_discretize,
    "bounds": cmd_bounds,
    "cluster-check": cmd_cluster_check,
    "verify": cmd_verify,
}


def run(command: str, model: str, out_path=None, format: str = "text", seed: int | None = None) -> tuple[int, RunReport | None]:
    """Execute one command; returns (exit code, report)."""
    try:
        mf = resolve_model(model)
    except ModelFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT, None
    if seed is not None:
        mf.run = replace(mf.run, seed=seed)
    rng = np.random.default_rng(mf.run.seed)
    start = time.perf_counter()
    try:
        report = HANDLERS[command](mf, rng)
    except discretize.BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT, None
    report.wall_clock = time.perf_counter() - start
    report.config = mf.run.as_dict()
    report.version = __version__
    report.seed = mf.run.seed
    try:
        text = emit(report, format, out_path)
    except OSError as exc:
        print(f"error: cannot write {out_path}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT, report
    if out_path is None:
        sys.stdout.write(text)
    for v in report.failures:
        print(f"assertion failed: {v.name}: {v.detail}", file=sys.stderr)
    return (EXIT_OK if report.ok else EXIT_FAIL), report


def _seed(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fermicluster", description="Exact and Grassmann checks of fermionic cumulant bounds.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("model", help="model file path or bundled model name")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=FORMATS, default="text")
    p.add_argument("--seed", type=_seed, help="override the [run] seed")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, _ = run(args.command, args.model, args.out, args.format, args.seed)
    return code


if __name__ == "__main__":
    sys.exit(main())
