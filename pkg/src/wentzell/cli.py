"""Command-line front end.

    wentzell {validate,assemble,eigs,oracle,evolve,verify} [--config PATH] [--out DIR] [--seed N] [--quiet]

Exit codes: 0 success, 1 hypothesis violation, 2 numerical failure,
3 acceptance failure. Failures print a JSON error body on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

COMMANDS = ("validate", "assemble", "eigs", "oracle", "evolve", "verify")


def _limit_threads():
    # must run before numpy loads its BLAS
    n = os.environ.get("WENTZELL_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wentzell", description="fourth-order diffusion with dynamic boundary conditions")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration (default: reference configuration)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="seed for randomized checks (overrides seed)")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.add_argument("--criteria", help="verify only: comma-separated criterion numbers")
    return p


class Runner:
    def __init__(self, cfg, out: Path, quiet: bool):
        self.cfg, self.out, self.quiet = cfg, out, quiet

    def say(self, msg: str):
        if not self.quiet:
            print(msg)

    # shared builders

    def operator(self):
        from .elliptic_core import realize

        mesh = self.cfg.build_mesh()
        coeffs = self.cfg.build_coefficients()
        return mesh, coeffs, realize(mesh, coeffs, mode=self.cfg.mode)

    def system(self):
        from .wentzell_operator import assemble_wentzell_form

        mesh, coeffs, op = self.operator()
        system = assemble_wentzell_form(op, coeffs.alpha, coeffs.gamma, coeffs.beta, k=self.cfg.order_power)
        return mesh, coeffs, system

    def initial(self, mesh):
        from .wentzell_operator import ProductState

        ini = self.cfg.initial
        return ProductState.from_functions(mesh, ini.get("u1", 1.0), ini.get("u2"))

    # commands

    def validate(self) -> int:
        import numpy as np

        from .coefficients import check_principal_symbol, validate_coefficients
        from .errors import HypothesisViolation
        from .export import write_json

        mesh = self.cfg.build_mesh()
        coeffs = self.cfg.build_coefficients()
        report = validate_coefficients(mesh, coeffs)
        payload = {"hypotheses": report.to_dict()}
        if report.passed:
            payload["symbol"] = check_principal_symbol(coeffs, mesh, np.pi / 2).to_dict()
        write_json(self.out / "hypothesis_report.json", payload)
        for c in report.checks:
            self.say(f"[{'ok' if c.passed else 'VIOLATED'}] {c.name} (margin {c.margin:.4g})")
        if not report.passed:
            raise HypothesisViolation(
                "coefficient hypotheses violated: " + ", ".join(c.name for c in report.failures())
            )
        self.say(f"principal symbol: a0 in [{payload['symbol']['a0_min']:.4g}, {payload['symbol']['a0_max']:.4g}], "
                 f"sector constant {payload['symbol']['lower_bound']:.4g}")
        return 0

    def assemble(self) -> int:
        import numpy as np

        from .export import write_json, write_matrix_csv

        _, _, system = self.system()
        op = system.op
        write_matrix_csv(self.out / "A.csv", system.A)
        write_matrix_csv(self.out / "M_H.csv", system.M_H)
        write_matrix_csv(self.out / "M_omega.csv", op.M_omega)
        write_matrix_csv(self.out / "K.csv", op.K)
        write_matrix_csv(self.out / "M_gamma_delta.csv", op.M_gamma_delta)
        A = system.A
        report = {
            "size": system.size,
            "A_asymmetry": float(np.max(np.abs(A - A.T)) / np.max(np.abs(A))),
            "S_asymmetry": float(abs(op.S - op.S.T).max()),
            "semibound": float(op.semibound),
            "metadata": system.metadata,
        }
        write_json(self.out / "symmetry_report.json", report)
        self.say(f"N = {system.size}, relative asymmetry of A = {report['A_asymmetry']:.2e}")
        return 0

    def eigs(self) -> int:
        from .export import write_eigen_csv, write_eigenvectors_csv
        from .spectral import eig_generalized

        _, _, system = self.system()
        decomp = eig_generalized(system, self.cfg.eigen_count)
        self._check_residuals(decomp)
        write_eigen_csv(self.out / "eigenvalues.csv", decomp)
        write_eigenvectors_csv(self.out / "eigenvectors.csv", decomp, min(decomp.count, 10))
        for k in range(min(decomp.count, 6)):
            self.say(f"lambda_{k + 1} = {decomp.eigenvalues[k]:.10g}  (residual {decomp.residuals[k]:.1e})")
        return 0

    def _check_residuals(self, decomp):
        from .errors import WentzellError

        worst = float(decomp.residuals.max())
        if worst > 1e-9:
            raise WentzellError(f"eigen residual {worst:.2e} exceeds 1e-9")

    def oracle(self) -> int:
        import csv

        from .coefficients import Field
        from .errors import PreconditionError
        from .spectral import eig_generalized, oracle_eigenvalues_interval

        cfg = self.cfg
        if cfg.domain["type"] != "interval":
            raise PreconditionError("the oracle is one-dimensional: use an interval domain")
        c = {**type(cfg)().coefficients, **cfg.coefficients}
        vals = {}
        for name in ("Q", "alpha", "beta", "gamma", "delta"):
            spec = c[name]
            fld = Field(spec) if not isinstance(spec, list) else None
            if fld is None or not fld.is_constant:
                raise PreconditionError("the oracle needs constant scalar coefficients")
            vals[name] = fld._value
        count = cfg.eigen_count or 6
        _, _, system = self.system()
        if cfg.order_power != 1:
            raise PreconditionError("the oracle covers the fourth-order problem (order_power = 1)")
        decomp = eig_generalized(system, count)
        length = float(cfg.domain.get("b", 1.0)) - float(cfg.domain.get("a", 0.0))
        res = oracle_eigenvalues_interval(vals["Q"], vals["alpha"], vals["beta"], vals["gamma"], vals["delta"],
                                          length, count)
        path = self.out / "oracle_comparison.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "oracle", "discrete", "rel_error"])
            for k, lo in enumerate(res.eigenvalues):
                ld = decomp.eigenvalues[k]
                rel = abs(ld - lo) / abs(lo) if lo != 0 else abs(ld - lo)
                w.writerow([k + 1, repr(float(lo)), repr(float(ld)), repr(float(rel))])
                self.say(f"k={k + 1}: oracle {lo:.10g}  discrete {ld:.10g}  rel {rel:.2e}")
        if not res.complete:
            self.say(f"warning: only {len(res.eigenvalues)} oracle roots below {res.scan_ceiling:g}")
        return 0

    def evolve(self) -> int:
        import numpy as np

        from .export import svg_polylines, write_json, write_trajectory_csv
        from .semigroup import decay_fit, evolve_spectral, positivity_scan, steady_state, step_theta
        from .spectral import eig_generalized

        cfg = self.cfg
        mesh, coeffs, system = self.system()
        f = self.initial(mesh)
        times = cfg.time_grid()
        decomp = eig_generalized(system)
        self._check_residuals(decomp)
        if cfg.scheme["method"] == "spectral":
            traj = evolve_spectral(decomp, f, times)
        else:
            dt = float(cfg.scheme.get("dt", 1e-4))
            steps = np.rint(times / dt).astype(int)
            if np.any(np.abs(steps * dt - times) > 1e-9 * max(1.0, times.max())):
                from .errors import PreconditionError

                raise PreconditionError("theta scheme: every output time must be a multiple of dt")
            full = step_theta(system, f, dt, float(cfg.scheme.get("theta", 0.5)), int(steps.max()))
            idx = np.searchsorted(np.rint(full.times / dt).astype(int), steps)
            traj = type(full)(times, full.values[idx], full.method, system, full.capped)
        write_trajectory_csv(self.out / "trajectory.csv", traj)

        lam = decomp.eigenvalues
        diag = {"lambda1": float(lam[0]), "lambda2": float(lam[1]) if lam.size > 1 else None,
                "method": traj.method, "capped": traj.capped, "t0": None, "dip": None, "decay_fit": None}
        conservative = not np.any(coeffs.gamma.on_boundary(mesh)) and not system.op.has_robin
        if f.min() >= 0 and (np.any(f.u1 > 0) or np.any(f.u2 > 0)):
            scan = positivity_scan(decomp, f, traj.times)
            diag["t0"], diag["dip"] = scan.t0, scan.dip
            diag["minima"] = scan.minima
        if conservative:
            fbar = steady_state(f, mesh, coeffs.beta, M_omega=system.op.M_omega).state.u1
            dist = [system.norm(u - fbar) for u in traj.values]
            diag["steady_value"] = float(fbar[0])
        else:
            dist = traj.norms()
        diag["decay_fit"] = decay_fit(traj.times, dist)
        diag["pairing"] = traj.pairings()
        write_json(self.out / "diagnostics.json", diag)
        if cfg.plots:
            snaps = np.unique(np.linspace(0, len(traj.times) - 1, min(6, len(traj.times))).astype(int))
            order = np.argsort(mesh.nodes[:, 0]) if mesh.dimension == 1 else None
            if order is not None:
                svg_polylines(self.out / "snapshots.svg",
                              [(f"t={traj.times[i]:.3g}", mesh.nodes[order, 0], traj.values[i, order]) for i in snaps],
                              title="u1(t, x)", xlabel="x", ylabel="u1")
            svg_polylines(self.out / "min_value.svg", [("min", traj.times, traj.values.min(axis=1))],
                          title="minimum node value", xlabel="t", ylabel="min u")
        self.say(f"{traj.times.size} states written; lambda1 = {lam[0]:.6g}, decay fit = {diag['decay_fit']}")
        return 0

    def verify(self, criteria=None, seed=0) -> int:
        from .acceptance import run_all
        from .errors import AcceptanceFailure
        from .export import write_json

        results = run_all(criteria, echo=print if not self.quiet else None, seed=seed)
        write_json(self.out / "acceptance.json",
                   [{k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results])
        failed = [r.number for r in results if not r.passed]
        if failed:
            raise AcceptanceFailure(f"acceptance criteria failed: {failed}")
        self.say(f"all {len(results)} criteria passed")
        return 0


def _error_body(exc) -> dict:
    body = {"error": getattr(exc, "kind", type(exc).__name__), "message": str(exc),
            "exit_code": getattr(exc, "exit_code", 2)}
    defect = getattr(exc, "defect", None)
    if defect is not None:
        body["defect"] = defect
    return body


def main(argv=None) -> int:
    _limit_threads()
    args = build_parser().parse_args(argv)
    from .config import RunConfig
    from .errors import WentzellError

    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out or cfg.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise WentzellError(f"cannot create output directory {out}: {exc}") from None
        runner = Runner(cfg, out, args.quiet)
        if args.command == "verify":
            crit = [int(c) for c in args.criteria.split(",")] if args.criteria else None
            return runner.verify(crit, cfg.seed)
        return getattr(runner, args.command)()
    except WentzellError as exc:
        print(json.dumps(_error_body(exc)), file=sys.stderr)
        return exc.exit_code
    except (ValueError, ArithmeticError) as exc:
        # anything numerical that escaped the typed errors
        print(json.dumps({"error": "numerical-failure", "message": str(exc), "exit_code": 2}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
