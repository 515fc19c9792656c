"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import io as dio
from .algebra import (
    ConnectionForm,
    GwData,
    ProductTable,
    check_frobenius,
    constant_flat_frame,
    flatness_residual,
    pm_gw_data,
    quantum_connection_matrices,
    quantum_ode_system,
)
from .linalg import max_norm
from .oracle import OdePath, OracleError, rk_integrate
from .projective import (
    check_identity,
    givental_matrix,
    givental_truncation,
    pm_closed_form,
    pm_flat_frame,
    pm_system,
)
from .series import (
    ConvergenceError,
    evaluate,
    frobenius_chain,
    recover_terms,
    scalar_binomial_identity,
    solve_via_block_exp,
    solve_via_egt,
    subst1_coeffs,
    subst3_coeffs,
)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_CONVERGENCE = 0, 1, 2, 3

DEFAULTS = {"hbar": [0.0, 1.0], "N": 25, "K": 25, "J": 25, "d_max": 8, "tol": 1e-8}
VERIFY_T = 0.3 + 0.2j
IDENTITY_T = -2.0
SUITES = ("frobenius", "scalar", "cross-method", "identity", "flatness", "roundtrip")


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    pm: int | None = None
    hbar: complex = 1j
    t: list[complex] = field(default_factory=list)
    N: int = 25
    K: int = 25
    J: int = 25
    d_max: int = 8
    tol: float = 1e-8
    format: str = "json"
    output: str | None = None
    suite: str = "all"

    def __post_init__(self):
        for name in ("N", "K", "J"):
            if getattr(self, name) < 1:
                raise InputError(f"--{ {'N': 'order', 'K': 'kmax', 'J': 'jmax'}[name]} must be positive")
        if self.d_max < 0:
            raise InputError("--dmax must be nonnegative")
        if not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.pm is not None and self.pm < 1:
            raise InputError("--pm must be at least 1")

    def header(self) -> dict:
        cfg = asdict(self)
        cfg["hbar"] = [self.hbar.real, self.hbar.imag]
        cfg["t"] = [[z.real, z.imag] for z in self.t]
        return {"defaults": DEFAULTS, "config": cfg}


def _parse_hbar(s: str) -> complex:
    try:
        parts = [float(p) for p in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RE,IM, got {s!r}")
    if len(parts) == 1:
        return complex(parts[0])
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected RE,IM, got {s!r}")
    return complex(parts[0], parts[1])


def _parse_t(s: str) -> list[complex]:
    """Comma-separated complex literals such as ``0.3+0.2j,-1`` (``i`` works for ``j``)."""
    try:
        return [complex(p.strip().replace("i", "j")) for p in s.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse complex list {s!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--input", metavar="FILE", help="JSON ProductTable or GwData")
    src.add_argument("--pm", type=int, metavar="M", help="builtin projective space P^M")
    common.add_argument("--hbar", type=_parse_hbar, default=1j, metavar="RE,IM")
    common.add_argument("--t", type=_parse_t, default=None, metavar="LIST")
    common.add_argument("--order", dest="N", type=int, default=DEFAULTS["N"], metavar="N")
    common.add_argument("--kmax", dest="K", type=int, default=DEFAULTS["K"], metavar="K")
    common.add_argument("--jmax", dest="J", type=int, default=DEFAULTS["J"], metavar="J")
    common.add_argument("--dmax", dest="d_max", type=int, default=DEFAULTS["d_max"], metavar="D")
    common.add_argument("--tol", type=float, default=DEFAULTS["tol"], metavar="X")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", metavar="FILE")

    p = argparse.ArgumentParser(prog="dubrovin", description="Flat sections of Dubrovin connections.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("flat", parents=[common], help="gauge matrix, inverse and flatness residual")
    v = sub.add_parser("verify", parents=[common], help="run verification checks")
    v.add_argument("--suite", choices=("all",) + SUITES, default="all")
    sub.add_parser("gw-recover", parents=[common], help="recover invariants from the series solution")
    sub.add_parser("pm-closed-form", parents=[common], help="closed-form P^m frame")
    sub.add_parser("givental-check", parents=[common], help="M(0) B(t) = M(t) residual")
    return p


def _source(cfg: RunConfig) -> ProductTable | GwData:
    if cfg.pm is not None:
        return pm_gw_data(cfg.pm)
    if cfg.input is None:
        raise InputError("one of --input or --pm is required")
    try:
        return dio.load(cfg.input)
    except OSError as exc:
        raise InputError(f"cannot read {cfg.input}: {exc}") from exc


def _need_pm(cfg: RunConfig) -> int:
    if cfg.pm is None:
        raise InputError(f"{cfg.command} needs --pm M")
    return cfg.pm


def _coords(cfg: RunConfig, n: int, default: complex) -> np.ndarray:
    if not cfg.t:
        return np.full(n, default, dtype=complex)
    if len(cfg.t) != n:
        raise InputError(f"--t needs {n} coordinates, got {len(cfg.t)}")
    return np.array(cfg.t, dtype=complex)


# -- commands ---------------------------------------------------------------

def cmd_flat(cfg: RunConfig) -> tuple[int, dict]:
    data = _source(cfg)
    if isinstance(data, ProductTable):
        form = ConnectionForm.from_table(data, cfg.hbar)
        t = _coords(cfg, data.dim, 0.0)
        try:
            frame = constant_flat_frame(t, form)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        res = flatness_residual(lambda s: constant_flat_frame(s, form).g_inv, lambda s: form.gammas, t, cfg.hbar)
        return EXIT_OK, {"g": frame.g, "g_inv": frame.g_inv, "flatness_residual": res}
    t = _coords(cfg, data.h2_rank, 0.0)
    chain = lambda s: frobenius_chain(data, s, cfg.hbar, cfg.K, cfg.tol)
    frame = chain(t)
    res = flatness_residual(lambda s: chain(s).g_inv, lambda s: quantum_connection_matrices(data, s), t, cfg.hbar)
    out = {"g": frame.g, "g_inv": frame.g_inv, "flatness_residual": res}
    if cfg.pm is not None:
        closed = pm_flat_frame(cfg.pm, cfg.hbar, t[0], cfg.N).g_inv
        out["closed_form_difference"] = max_norm(closed - frame.g_inv)
    return EXIT_OK, out


def _check(name: str, residual: float, tol: float) -> dict:
    return {"check": name, "residual": float(residual), "tol": tol, "pass": bool(residual <= tol)}


def _cross_method(m: int, cfg: RunConfig, t: complex) -> float:
    psys = pm_system(m, cfg.hbar)
    osys = psys.ode_system()
    values = [
        evaluate(subst1_coeffs(osys, cfg.N), t).value,
        evaluate(subst3_coeffs(osys, cfg.K, cfg.J), t).value,
        solve_via_block_exp(osys, t, cfg.K, cfg.tol),
        solve_via_egt(osys, t, cfg.K, cfg.tol),
        pm_closed_form(psys, t, cfg.N),
        rk_integrate(osys, OdePath(t, 4096), cfg.tol).value,
    ]
    return max(max_norm(a - b) for i, a in enumerate(values) for b in values[i + 1 :])


def _scalar_suite(samples: int = 100, n_max: int = 12) -> float:
    rng = np.random.default_rng(0)
    r = np.sqrt(rng.uniform(size=(samples, 2)))
    th = rng.uniform(0, 2 * np.pi, size=(samples, 2))
    z = r * np.exp(1j * th)
    worst = 0.0
    for a, c in z:
        for n in range(n_max + 1):
            lhs, rhs = scalar_binomial_identity(a, c, n)
            worst = max(worst, abs(lhs - rhs))
    return worst


def _roundtrip(data: GwData, cfg: RunConfig) -> float:
    return max((row["error"] for row in _recover(data, cfg)), default=0.0)


def cmd_verify(cfg: RunConfig) -> tuple[int, dict]:
    data = _source(cfg)
    suites = SUITES if cfg.suite == "all" else (cfg.suite,)
    checks = []
    table = data if isinstance(data, ProductTable) else data.cup
    for s in suites:
        if s == "frobenius":
            ok, res = check_frobenius(table, cfg.tol)
            checks.append(_check("frobenius", res, cfg.tol))
        elif s == "scalar":
            checks.append(_check("scalar-identity", _scalar_suite(), cfg.tol))
        elif s == "cross-method" and cfg.pm is not None:
            t = _coords(cfg, 1, VERIFY_T)[0]
            checks.append(_check("cross-method", _cross_method(cfg.pm, cfg, t), cfg.tol))
        elif s == "identity" and cfg.pm is not None:
            g = givental_truncation(cfg.pm, cfg.hbar, cfg.d_max)
            res = check_identity(g, pm_system(cfg.pm, cfg.hbar), IDENTITY_T, max(cfg.N, 40))
            checks.append(_check("givental-identity", res, cfg.tol))
        elif s == "flatness":
            if isinstance(data, ProductTable):
                if not check_frobenius(table, cfg.tol)[0]:
                    continue
                form = ConnectionForm.from_table(data, cfg.hbar)
                t = _coords(cfg, data.dim, 0.1)
                res = flatness_residual(
                    lambda u: constant_flat_frame(u, form).g_inv, lambda u: form.gammas, t, cfg.hbar
                )
            else:
                t = _coords(cfg, data.h2_rank, 0.1)
                res = flatness_residual(
                    lambda u: frobenius_chain(data, u, cfg.hbar, cfg.K, cfg.tol).g_inv,
                    lambda u: quantum_connection_matrices(data, u),
                    t,
                    cfg.hbar,
                )
            checks.append(_check("flatness", res, 1e-6))
        elif s == "roundtrip" and isinstance(data, GwData):
            checks.append(_check("gw-roundtrip", _roundtrip(data, cfg), cfg.tol))
    status = EXIT_OK if all(c["pass"] for c in checks) else EXIT_VERIFY
    return status, {"checks": checks, "all_pass": status == EXIT_OK}


def _recover(data: GwData, cfg: RunConfig) -> list[dict]:
    rows = []
    h = data.cup.pairing
    for i in range(1, data.h2_rank + 1):
        exps = {cls.exponents[i - 1] for cls in data.classes}
        if exps and max(exps) > cfg.K:
            raise InputError(f"--kmax {cfg.K} is below exponent {max(exps)} in direction {i}")
        sys_i = quantum_ode_system(data, i, np.zeros(i - 1), cfg.hbar)
        Z = subst3_coeffs(sys_i, max(exps, default=1), max(cfg.J, 1))
        found = recover_terms(Z)
        for k in sorted(exps | set(found)):
            C = found.get(k, np.zeros((data.dim, data.dim), dtype=complex)) / cfg.hbar
            expected = sum(
                (cls.invariants[:, i, :] for cls in data.classes if cls.exponents[i - 1] == k),
                np.zeros((data.dim, data.dim), dtype=complex),
            )
            rows.append({"direction": i, "exponent": k, "C": C, "error": max_norm(C @ h - expected)})
    return rows


def cmd_gw_recover(cfg: RunConfig) -> tuple[int, dict]:
    data = _source(cfg)
    if not isinstance(data, GwData):
        raise InputError("gw-recover needs GwData input (a 'cup' field)")
    rows = _recover(data, cfg)
    return EXIT_OK, {"recovered": rows, "max_error": max((r["error"] for r in rows), default=0.0)}


def cmd_pm_closed_form(cfg: RunConfig) -> tuple[int, dict]:
    m = _need_pm(cfg)
    t = _coords(cfg, 1, VERIFY_T)[0]
    psys = pm_system(m, cfg.hbar)
    B = pm_closed_form(psys, t, cfg.N)
    ref = solve_via_block_exp(psys.ode_system(), t, cfg.K, cfg.tol)
    return EXIT_OK, {
        "alpha": psys.alpha,
        "B": B,
        "flat_frame_g_inv": pm_flat_frame(m, cfg.hbar, t, cfg.N).g_inv,
        "block_exp_difference": max_norm(B - ref),
    }


def cmd_givental_check(cfg: RunConfig) -> tuple[int, dict]:
    m = _need_pm(cfg)
    t = _coords(cfg, 1, IDENTITY_T)[0]
    g = givental_truncation(m, cfg.hbar, cfg.d_max)
    res = check_identity(g, pm_system(m, cfg.hbar), t, cfg.N)
    coarse = check_identity(givental_truncation(m, cfg.hbar, cfg.d_max // 2), pm_system(m, cfg.hbar), t, cfg.N)
    status = EXIT_OK if res <= cfg.tol else EXIT_VERIFY
    return status, {
        "M0": givental_matrix(g, 0.0),
        "Mt": givental_matrix(g, t),
        "residual": res,
        "residual_half_dmax": coarse,
        "pass": status == EXIT_OK,
    }


COMMANDS = {
    "flat": cmd_flat,
    "verify": cmd_verify,
    "gw-recover": cmd_gw_recover,
    "pm-closed-form": cmd_pm_closed_form,
    "givental-check": cmd_givental_check,
}


# -- output -----------------------------------------------------------------

def _matrices(report: dict, prefix: str = "") -> dict[str, np.ndarray]:
    out = {}
    for key, val in report.items():
        name = f"{prefix}{key}"
        if isinstance(val, np.ndarray):
            out[name] = val
        elif isinstance(val, (int, float, complex, np.number)) and not isinstance(val, bool):
            out[name] = np.array([[val]])
        elif isinstance(val, list):
            for i, item in enumerate(val):
                if isinstance(item, dict):
                    label = item.get("check", i)
                    out.update(_matrices(item, f"{name}[{label}]."))
        elif isinstance(val, dict):
            out.update(_matrices(val, f"{name}."))
    return out


def render(cfg: RunConfig, status: int, report: dict) -> str:
    head = cfg.header()
    if cfg.format == "json":
        return json.dumps({**head, "status": status, **dio.encode(report)}, indent=2) + "\n"
    lines = [f"# defaults: {json.dumps(DEFAULTS)}", f"# config: {json.dumps(head['config'])}", f"# status: {status}"]
    for key, val in report.items():
        if isinstance(val, (bool, str)):
            lines.append(f"# {key}: {val}")
    return "\n".join(lines) + "\n" + dio.matrices_to_csv(_matrices(report))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = vars(args)
    if opts["t"] is None:
        opts["t"] = []
    try:
        cfg = RunConfig(**opts)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        status, report = COMMANDS[cfg.command](cfg)
    except (InputError, dio.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial", None)
        if partial is None:
            partial = getattr(exc, "value", None)
        status, report = EXIT_CONVERGENCE, {"partial": True, "message": str(exc)}
        if partial is not None:
            report["partial_value"] = partial
    text = render(cfg, status, report)
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
